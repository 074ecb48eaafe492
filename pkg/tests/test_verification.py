"""Audit, parity, and the exhaustive optimality oracle."""

import copy
import dataclasses

import numpy as np
import pytest

from bdscuc.formulation import build_tscuc
from bdscuc.grid import Generator, GridCase, Horizon, LoadProfile, toy_case
from bdscuc.milp import SolveOptions, solve
from bdscuc.verify import (BudgetExceededError, InfeasibleCaseError,
                           audit_feasibility, brute_force_reference,
                           recompute_degradation_cost, verify_parity)


def test_solved_schedule_passes_audit(toy3, tscuc_schedule):
    report = audit_feasibility(tscuc_schedule, toy3)
    assert report.ok
    assert report.max_residual <= 1e-6


def test_audit_catches_every_corruption(toy3, tscuc_schedule,
                                        corruption_library):
    caught = []
    for name, mutate, family in corruption_library():
        sched = copy.deepcopy(tscuc_schedule)
        mutate(sched)
        report = audit_feasibility(sched, toy3)
        assert not report.ok, f"corruption {name} was not caught"
        assert family in report.families(), (
            f"corruption {name}: expected family {family}, "
            f"got {report.families()}")
        caught.append(family)
    assert len(set(caught)) >= 10


def test_audit_terminal_residual_magnitude(toy3, tscuc_schedule):
    sched = copy.deepcopy(tscuc_schedule)
    sched.st_energy[0, -1] += 1.0
    report = audit_feasibility(sched, toy3)
    viol = [v for v in report.violations if v.family == "terminal_soc"]
    assert viol and viol[0].residual == pytest.approx(1.0, abs=1e-9)


def test_recompute_idle_schedule(toy3, default_net, tscuc_schedule):
    from bdscuc.degradation import FeatureVector, forward
    from bdscuc.formulation import degradation_cost_coefficient

    sched = copy.deepcopy(tscuc_schedule)
    sched.st_disc[:] = 0.0
    sched.st_char[:] = 0.0
    sched.st_udisc[:] = 0.0
    sched.st_uchar[:] = 0.0
    st = toy3.storage[0]
    sched.st_energy[:] = st.e_initial
    sched.st_soc[:] = st.e_initial / st.e_max
    rec = recompute_degradation_cost(sched, toy3, default_net)
    idle = FeatureVector(st.ambient_temp, 0.0, st.e_initial / st.e_max, 0.0,
                         st.soh_initial)
    expected = (toy3.horizon.periods * degradation_cost_coefficient(st)
                * forward(default_net, idle))
    assert rec.cost == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_recompute_scales_linearly_with_coefficient(toy3, default_net,
                                                    tscuc_schedule):
    rec1 = recompute_degradation_cost(tscuc_schedule, toy3, default_net)
    # halving (1 - soh_eol) doubles the cost coefficient exactly
    tweaked_storage = dataclasses.replace(toy3.storage[0], soh_eol=0.75)
    case2 = dataclasses.replace(toy3, storage=(tweaked_storage,))
    rec2 = recompute_degradation_cost(tscuc_schedule, case2, default_net)
    assert rec2.cost == pytest.approx(2.0 * rec1.cost, rel=1e-12)


def test_recompute_flags_out_of_box_features(toy3, default_net,
                                             tscuc_schedule):
    cold = dataclasses.replace(toy3.storage[0], ambient_temp=-30.0)
    case2 = dataclasses.replace(toy3, storage=(cold,))
    rec = recompute_degradation_cost(tscuc_schedule, case2, default_net)
    assert any(name == "temp" for (_, _, name) in rec.out_of_box)


def test_parity_reference_pair():
    report = verify_parity(14_289.49, 14_289.50)
    assert report.relative_difference == pytest.approx(0.01 / 14_289.50, rel=1e-6)
    assert report.ok


def test_parity_equal_and_failing_pairs():
    assert verify_parity(100.0, 100.0).relative_difference == 0.0
    bad = verify_parity(90.0, 100.0)
    assert bad.relative_difference == pytest.approx(0.1)
    assert not bad.ok


def test_parity_rejects_negative():
    with pytest.raises(ValueError):
        verify_parity(-1.0, 5.0)


def test_lbd_parity_on_fixture(toy3, default_net, lbd_solved, lbd_schedule):
    rec = recompute_degradation_cost(lbd_schedule, toy3, default_net)
    report = verify_parity(lbd_schedule.breakdown.degradation, rec.cost)
    assert report.ok, (report.milp_degradation_cost, report.recomputed_cost)


def test_brute_force_matches_solver(toy3, tscuc_solved, brute_force_toy3):
    _, _, result = tscuc_solved
    rel = abs(result.objective - brute_force_toy3) / max(1, abs(brute_force_toy3))
    assert rel <= 1e-6


def test_brute_force_single_generator():
    case = GridCase(
        horizon=Horizon(periods=1, dt=1.0),
        buses=(1,), reference_bus=1,
        generators=(Generator(id="G", bus=1, p_min=0.0, p_max=100.0,
                              cost_linear=20.0, cost_noload=100.0,
                              cost_startup=50.0, ramp=100.0,
                              initial_on=False, initial_output=0.0),),
        loads=(LoadProfile(bus=1, demand=(50.0,)),),
    )
    assert brute_force_reference(case) == pytest.approx(1150.0, abs=1e-7)


def test_brute_force_detects_infeasible():
    case = GridCase(
        horizon=Horizon(periods=1, dt=1.0),
        buses=(1,), reference_bus=1,
        generators=(Generator(id="G", bus=1, p_min=0.0, p_max=10.0,
                              cost_linear=20.0, cost_noload=0.0,
                              cost_startup=0.0, ramp=100.0,
                              initial_on=False, initial_output=0.0),),
        loads=(LoadProfile(bus=1, demand=(50.0,)),),
    )
    with pytest.raises(InfeasibleCaseError):
        brute_force_reference(case)


def test_brute_force_budget(toy3):
    extra = dataclasses.replace(toy3.generators[0], id="G3", bus=2)
    big = dataclasses.replace(toy3, generators=toy3.generators + (extra,))
    with pytest.raises(BudgetExceededError):
        brute_force_reference(big)   # 4 * (2*3 + 2*1) = 32 > 24
