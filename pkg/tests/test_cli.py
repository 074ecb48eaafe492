"""CLI surface: subcommands, exit codes, artifact schemas, determinism."""

import csv
import json
import os

import pytest

from bdscuc.cli import main
from bdscuc.milp import parse_lp, solve, SolveOptions


def _read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _read_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def solved_lbd_dir(case_file, net_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("lbd_run")
    code = main(["solve", "--case", case_file, "--mode", "lbd",
                 "--net", net_file, "--mipgap", "0.01",
                 "--out", str(out)])
    assert code == 0
    return out


def test_solve_tscuc_artifacts(case_file, net_file, tmp_path):
    out = tmp_path / "run"
    code = main(["solve", "--case", case_file, "--mode", "tscuc",
                 "--net", net_file, "--mipgap", "0", "--out", str(out)])
    assert code == 0
    costs = _read_json(out / "costs.json")
    assert set(costs) == {"mode", "fuel_cost", "degradation_cost",
                          "total_cost", "mipgap_achieved", "solve_seconds",
                          "status"}
    assert costs["mode"] == "tscuc"
    assert costs["degradation_cost"] > 0          # ex-post network cost
    assert costs["total_cost"] == pytest.approx(
        costs["fuel_cost"] + costs["degradation_cost"], abs=1e-9)
    audit = _read_json(out / "audit.json")
    assert audit["pass"] is True
    assert (out / "schedule.csv").exists()


def test_solve_lbd_missing_net_exits_2(case_file, tmp_path):
    code = main(["solve", "--case", case_file, "--mode", "lbd",
                 "--out", str(tmp_path / "x")])
    assert code == 2


def test_solve_bad_case_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    code = main(["solve", "--case", str(bad), "--mode", "tscuc",
                 "--out", str(tmp_path / "y")])
    assert code == 2


def test_solve_infeasible_exits_1(case_file, tmp_path):
    import dataclasses
    from bdscuc.grid import load_case, save_case
    case = load_case(case_file)
    heavy = dataclasses.replace(case.loads[0],
                                demand=(500.0, 500.0, 500.0, 500.0))
    save_case(dataclasses.replace(case, loads=(heavy,)),
              tmp_path / "heavy.json")
    code = main(["solve", "--case", str(tmp_path / "heavy.json"),
                 "--mode", "tscuc", "--out", str(tmp_path / "z")])
    assert code == 1


def test_solve_deterministic_artifacts(case_file, net_file, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main(["solve", "--case", case_file, "--mode", "lbd",
                     "--net", net_file, "--mipgap", "0.01", "--seed", "0",
                     "--out", str(out)])
        assert code == 0
        outs.append(out)
    for artifact in ("costs.json", "schedule.csv", "audit.json"):
        b1 = (outs[0] / artifact).read_bytes()
        b2 = (outs[1] / artifact).read_bytes()
        assert b1 == b2, f"{artifact} differs between identical runs"


def test_lbd_costs_parity_through_cli(solved_lbd_dir, case_file, net_file):
    # costs.json carries the forward-pass degradation; it must agree with the
    # solver's objective term within the parity tolerance
    costs = _read_json(solved_lbd_dir / "costs.json")
    assert costs["status"] == "optimal"
    assert costs["mode"] == "lbd"
    code = main(["verify", "--case", case_file, "--net", net_file,
                 "--schedule", str(solved_lbd_dir / "schedule.csv")])
    assert code == 0


def test_verify_catches_corruption(solved_lbd_dir, case_file, net_file,
                                   tmp_path):
    rows = (solved_lbd_dir / "schedule.csv").read_text().splitlines()
    header, body = rows[0], rows[1:]
    # double one generator output value
    for i, line in enumerate(body):
        cells = line.split(",")
        if cells[3] == "p" and float(cells[4]) > 0:
            cells[4] = repr(float(cells[4]) * 2)
            body[i] = ",".join(cells)
            break
    bad = tmp_path / "schedule.csv"
    bad.write_text("\n".join([header] + body) + "\n")
    code = main(["verify", "--case", case_file, "--net", net_file,
                 "--schedule", str(bad)])
    assert code == 1


def test_sweep_gap_monotone_and_csv(case_file, net_file, tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep-gap", "--case", case_file, "--net", net_file,
                 "--gaps", "0.1,0.01,0", "--out", str(out)])
    assert code == 0
    rows = _read_rows(out / "sweep_gap.csv")
    assert [r["gap"] for r in rows] == ["0.1", "0.01", "0"]
    totals = [float(r["total_cost"]) for r in rows]
    assert totals[0] >= totals[1] - 1e-6
    assert totals[1] >= totals[2] - 1e-6
    assert all(r["status"] == "optimal" for r in rows)


def test_sweep_gap_rejects_negative(case_file, net_file, tmp_path):
    code = main(["sweep-gap", "--case", case_file, "--net", net_file,
                 "--gaps", "0.1,-0.1", "--out", str(tmp_path / "s")])
    assert code == 2


def test_single_gap_sweep_matches_solve(case_file, net_file, tmp_path,
                                        lbd_solved):
    out = tmp_path / "one"
    code = main(["sweep-gap", "--case", case_file, "--net", net_file,
                 "--gaps", "0.01", "--out", str(out)])
    assert code == 0
    row = _read_rows(out / "sweep_gap.csv")[0]
    assert float(row["total_cost"]) == pytest.approx(
        lbd_solved[2].objective, abs=1e-9)


def test_sweep_bess_counts(case_file, net_file, tmp_path, toy3, default_net):
    from bdscuc.embedding import propagate_bounds, storage_feature_box

    out = tmp_path / "bess"
    code = main(["sweep-bess", "--case", case_file, "--net", net_file,
                 "--counts", "0,1", "--mipgap", "0.01", "--out", str(out)])
    assert code == 0
    rows = _read_rows(out / "sweep_bess.csv")
    assert [int(r["count"]) for r in rows] == [0, 1]
    assert float(rows[0]["degradation_cost"]) == 0.0
    # storage can only help: it may idle at worst
    assert float(rows[1]["total_cost"]) <= float(rows[0]["total_cost"]) + 1e-6
    # binaries grow by T * (2 + unstable neurons) per added unit
    unstable = propagate_bounds(default_net,
                                storage_feature_box(toy3, 0)).unstable_count()
    T = toy3.horizon.periods
    grown = int(rows[1]["binaries"]) - int(rows[0]["binaries"])
    assert grown == T * (2 + unstable)


def test_train_cli_roundtrip(tmp_path):
    out = tmp_path / "small_net.json"
    code = main(["train", "--samples", "600", "--hidden", "6,6",
                 "--seed", "1", "--restarts", "1", "--rmse-target", "0.5",
                 "--out", str(out)])
    assert code == 0
    from bdscuc.degradation import load_net
    net = load_net(out)
    assert net.layer_sizes == (5, 6, 6, 1)


def test_export_lp_roundtrip(case_file, tmp_path, toy3, tscuc_solved):
    out = tmp_path / "model.lp"
    code = main(["export-lp", "--case", case_file, "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert "Minimize" in text and "Binaries" in text
    again = solve(parse_lp(text), SolveOptions(rel_mipgap=0.0, time_limit=300))
    assert again.objective == pytest.approx(tscuc_solved[2].objective, rel=1e-9)


def test_export_lp_with_net(case_file, net_file, tmp_path):
    out = tmp_path / "lbd.lp"
    code = main(["export-lp", "--case", case_file, "--net", net_file,
                 "--out", str(out)])
    assert code == 0
    assert "d_nn_B1_1" in out.read_text()    # network indicator binaries


def test_economics_report(case_file, net_file, tmp_path):
    out = tmp_path / "econ"
    code = main(["economics", "--case", case_file, "--net", net_file,
                 "--mipgap", "0.01", "--out", str(out)])
    assert code == 0
    doc = _read_json(out / "economics.json")
    assert doc["horizon_cap_years"] == 25.0
    assert len(doc["per_storage"]) == 1
    unit = doc["per_storage"][0]
    assert unit["storage_id"] == "B1"
    assert unit["expected_lifetime_years"] <= 25.0
    assert doc["economic_benefit"] == pytest.approx(
        doc["daily_saving"] * 365.0 * doc["lifetime_years_used"], rel=1e-9)
