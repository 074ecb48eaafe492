"""Case model: fixture values, validation codes, JSON round trip."""

import dataclasses
import json

import pytest

from bdscuc.grid import (CaseFormatError, CaseValidationError, load_case,
                         save_case, toy_case, validate_case)


def test_toy3_shape():
    case = toy_case()
    assert case.horizon.periods == 4
    assert case.horizon.dt == 1.0
    assert len(case.buses) == 3
    assert len(case.generators) == 2
    assert len(case.storage) == 1
    assert case.storage[0].capital_cost == 2_000_000.0  # 20 MWh at 100k $/MWh
    assert validate_case(case).ok


def test_toy3_capacity_covers_peak_load():
    case = toy_case()
    disc = sum(s.p_max for s in case.storage)
    gen = sum(g.p_max for g in case.generators)
    for t in range(case.horizon.periods):
        load = sum(p.demand[t] for p in case.loads)
        wind = sum(p.available[t] for p in case.renewables)
        assert gen + wind + disc > load


def test_save_load_round_trip(tmp_path):
    case = toy_case()
    path = tmp_path / "case.json"
    save_case(case, path)
    again = load_case(path)
    assert again == case  # frozen dataclasses compare field for field


def test_validation_error_names_field(tmp_path):
    case = toy_case()
    bad = dataclasses.replace(
        case, storage=(dataclasses.replace(case.storage[0], eff_charge=1.2),))
    path = tmp_path / "bad.json"
    save_case(bad, path)
    with pytest.raises(CaseValidationError) as err:
        load_case(path)
    assert "eff_charge" in str(err.value)
    assert "EFF_RANGE" in err.value.report.codes()


def test_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(CaseFormatError):
        load_case(path)


def test_missing_key_is_format_error(tmp_path):
    doc = {"horizon": {"periods": 1}}  # dt_hours missing
    path = tmp_path / "short.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(CaseFormatError):
        load_case(path)


def test_storage_row_from_published_fleet_table(tmp_path):
    # BESS #4 of the reference fleet: bus 14, 200 MWh, 100 MW, 75k $/MWh,
    # initial SOC 40%
    doc = {
        "horizon": {"periods": 2, "dt_hours": 1.0},
        "buses": [14],
        "reference_bus": 14,
        "generators": [{"id": "G", "bus": 14, "p_min_mw": 0, "p_max_mw": 500,
                        "cost_mwh": 10, "cost_noload": 0, "cost_startup": 0,
                        "ramp_mw_per_h": 500, "initial_on": True,
                        "initial_output_mw": 100}],
        "storage": [{"id": "B4", "bus": 14, "e_max_mwh": 200, "e_min_mwh": 0,
                     "e_initial_mwh": 80.0, "p_max_mw": 100, "p_min_mw": 0,
                     "eff_charge": 0.95, "eff_discharge": 0.95,
                     "capital_cost": 15_000_000.0, "soh_eol": 0.5,
                     "soh_initial": 1.0, "ambient_temp_c": 25.0}],
        "loads": [{"bus": 14, "demand_mw": [100, 100]}],
        "renewables": [],
        "lines": [],
    }
    path = tmp_path / "b4.json"
    path.write_text(json.dumps(doc))
    case = load_case(path)
    st = case.storage[0]
    assert st.e_max == 200.0
    assert st.p_max == 100.0
    assert st.bus == 14
    assert st.capital_cost == 200 * 75_000
    assert st.salvage_value == 0.0   # default when absent
    assert st.e_initial == pytest.approx(0.4 * st.e_max)


def test_validate_unknown_bus():
    case = toy_case()
    bad_line = dataclasses.replace(case.lines[0], to_bus=99)
    bad = dataclasses.replace(case, lines=(bad_line,) + case.lines[1:])
    report = validate_case(bad)
    assert "UNKNOWN_BUS" in report.codes()


def test_validate_soc_range():
    case = toy_case()
    bad_st = dataclasses.replace(case.storage[0], e_initial=25.0)  # e_max = 20
    report = validate_case(dataclasses.replace(case, storage=(bad_st,)))
    assert report.codes() == ["SOC_RANGE"]


def test_validate_duplicate_ids():
    case = toy_case()
    dup = dataclasses.replace(case, generators=case.generators + (case.generators[0],))
    assert "DUPLICATE_ID" in validate_case(dup).codes()


def test_validate_reference_bus():
    case = toy_case()
    assert "REF_BUS" in validate_case(
        dataclasses.replace(case, reference_bus=42)).codes()


def test_validate_profile_length():
    case = toy_case()
    short = dataclasses.replace(case.loads[0], demand=(60.0, 80.0))
    assert "PROFILE_LENGTH" in validate_case(
        dataclasses.replace(case, loads=(short,))).codes()


def test_validate_initial_output_off_unit():
    case = toy_case()
    bad = dataclasses.replace(case.generators[1], initial_output=5.0)  # off at t=0
    report = validate_case(dataclasses.replace(
        case, generators=(case.generators[0], bad)))
    assert "INITIAL_OUTPUT" in report.codes()
