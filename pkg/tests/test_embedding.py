"""Network embedding: feature wiring, interval bounds, exact big-M encoding."""

import dataclasses

import numpy as np
import pytest

from bdscuc.degradation import DegradationNet, FeatureVector, forward
from bdscuc.embedding import (BoxContainmentError, UnsoundBoundsError,
                              build_lbdscuc, encode_network,
                              feature_expressions, pinned_network_output,
                              propagate_bounds, storage_feature_box,
                              NeuronBounds)
from bdscuc.formulation import build_tscuc, extract_schedule
from bdscuc.grid import toy_case
from bdscuc.milp import MilpModel, SolveOptions, solve
from bdscuc.milp.model import LinExpr


def _tiny_net(w_first, b1, b2=0.0, b3=0.0):
    """5 -> 1 -> 1 -> 1 chain with identity scaler for hand analysis."""
    Ws = [np.array(w_first, dtype=float).reshape(5, 1),
          np.array([[1.0]]), np.array([[1.0]])]
    bs = [np.array([b1], dtype=float), np.array([b2]), np.array([b3])]
    return DegradationNet((5, 1, 1, 1), Ws, bs, np.zeros(5), np.ones(5))


def test_feature_values_from_fixture(toy3):
    model, index = build_tscuc(toy3)
    feats = feature_expressions(index, toy3, 0, 0)
    vals = {index.p_disc[0, 0]: 10.0, index.p_char[0, 0]: 0.0,
            index.energy[0, 0]: 10.0 - 10.0 / 0.95}
    # discharging 10 MW for one hour from a 20 MWh unit
    assert feats.dod.value(vals) == pytest.approx((10 / 0.95) / 20)
    assert feats.c_rate.value(vals) == pytest.approx(0.5)
    idle = {index.p_disc[0, 0]: 0.0, index.p_char[0, 0]: 0.0,
            index.energy[0, 0]: 10.0}
    assert feats.dod.value(idle) == 0.0
    assert feats.c_rate.value(idle) == 0.0
    assert feats.soc.value(idle) == pytest.approx(0.5)
    assert feats.temp.constant == 25.0
    assert feats.soh.constant == 1.0


def test_feature_boxes(toy3):
    lo, hi = storage_feature_box(toy3, 0)
    assert (lo[1], hi[1]) == (0.0, pytest.approx(0.5))          # c-rate
    assert (lo[2], hi[2]) == (pytest.approx(0.1), 1.0)          # soc
    assert (lo[3], hi[3]) == (0.0, pytest.approx(10 / (0.95 * 20)))  # dod
    assert lo[0] == hi[0] == 25.0
    assert lo[4] == hi[4] == 1.0


def test_interval_arithmetic_single_neuron():
    net = _tiny_net([1.0, -2.0, 0.0, 0.0, 0.0], b1=0.5)
    box = (np.zeros(5), np.ones(5))
    bounds = propagate_bounds(net, box)
    assert bounds.pre_lo[0][0] == pytest.approx(-1.5)
    assert bounds.pre_hi[0][0] == pytest.approx(1.5)


def test_interval_arithmetic_constant_neuron():
    net = _tiny_net([0.0] * 5, b1=0.3)
    bounds = propagate_bounds(net, (np.zeros(5), np.ones(5)))
    assert bounds.pre_lo[0][0] == pytest.approx(0.3)
    assert bounds.pre_hi[0][0] == pytest.approx(0.3)
    assert bounds.tags()[0][0] == "pass"


def test_bounds_sound_by_sampling(default_net, toy3):
    box = storage_feature_box(toy3, 0)
    bounds = propagate_bounds(default_net, box)
    rng = np.random.default_rng(2)
    X = box[0] + (box[1] - box[0]) * rng.random((1000, 5))
    a = default_net.scale_features(X)
    for layer, (W, b) in enumerate(zip(default_net.weights, default_net.biases)):
        x = a @ W + b
        assert np.all(x >= bounds.pre_lo[layer] - 1e-9)
        assert np.all(x <= bounds.pre_hi[layer] + 1e-9)
        a = np.maximum(x, 0.0)


def test_negative_interval_prunes_without_binaries():
    net = _tiny_net([1.0, -2.0, 0.0, 0.0, 0.0], b1=-3.5, b2=0.7)
    box = (np.zeros(5), np.ones(5))
    bounds = propagate_bounds(net, box)
    assert bounds.pre_hi[0][0] < 0                     # always inactive
    assert bounds.tags()[0][0] == "pruned"
    model = MilpModel()
    in_vars = [model.add_continuous(0, 1, f"i{j}") for j in range(5)]
    from bdscuc.embedding import FeatureExpr
    feats = FeatureExpr(*[LinExpr({v: 1.0}) for v in in_vars],
                        lo=np.zeros(5), hi=np.ones(5))
    encode_network(model, net, feats, bounds, "t")
    assert model.num_binaries == 0
    # downstream sees the constant zero: forward is relu(0 + 0.7) = 0.7
    val = pinned_network_output(net, np.full(5, 0.2), box=box)
    assert val == pytest.approx(0.7, abs=1e-9)


def test_forced_indicator_cases():
    # single unstable neuron with [L, U] = [-2, 2]: identity chain after it
    net = _tiny_net([4.0, 0, 0, 0, 0], b1=-2.0)
    box = (np.zeros(5), np.ones(5))
    # x = 4*in0 - 2: pin to 1.5 -> relu = 1.5; pin to -1 -> relu = 0
    for in0, expected in ((0.875, 1.5), (0.25, 0.0)):
        pt = np.array([in0, 0, 0, 0, 0])
        assert pinned_network_output(net, pt, box=box) == \
            pytest.approx(expected, abs=1e-9)


def test_pinned_outputs_match_forward(default_net):
    box = default_net.training_box()
    bounds = propagate_bounds(default_net, box)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(25):
        pt = box[0] + (box[1] - box[0]) * rng.random(5)
        milp_val = pinned_network_output(default_net, pt, box=box, bounds=bounds)
        direct = float(default_net.forward_batch(pt[None, :])[0])
        worst = max(worst, abs(milp_val - direct))
    assert worst <= 1e-6


def test_tightened_bounds_leave_outputs_unchanged(default_net):
    """Encoding must be insensitive to slack in sound per-neuron intervals."""
    box = default_net.training_box()
    loose = propagate_bounds(default_net, box)
    rng = np.random.default_rng(8)
    X = box[0] + (box[1] - box[0]) * rng.random((300, 5))
    # empirical pre-activation ranges over the sample
    a = default_net.scale_features(X)
    emp_lo, emp_hi = [], []
    for W, b in zip(default_net.weights, default_net.biases):
        x = a @ W + b
        emp_lo.append(x.min(axis=0) - 1e-9)
        emp_hi.append(x.max(axis=0) + 1e-9)
        a = np.maximum(x, 0.0)
    tight = NeuronBounds(input_lo=box[0], input_hi=box[1],
                         pre_lo=emp_lo, pre_hi=emp_hi)
    for pt in X[:10]:
        loose_val = pinned_network_output(default_net, pt, box=box, bounds=loose)
        tight_val = pinned_network_output(default_net, pt, box=box, bounds=tight)
        assert tight_val == pytest.approx(loose_val, abs=1e-7)


def test_unsound_bounds_rejected(default_net, toy3):
    model, index = build_tscuc(toy3)
    feats = feature_expressions(index, toy3, 0, 0)
    small = (feats.lo.copy(), feats.hi.copy())
    small[1][1] = feats.hi[1] * 0.2    # c-rate box shrunk below reachable
    bounds = propagate_bounds(default_net, small)
    with pytest.raises(UnsoundBoundsError):
        encode_network(model, default_net, feats, bounds, "bad")


def test_degradation_coefficient_reference_unit():
    from bdscuc.formulation import degradation_cost_coefficient
    from bdscuc.grid import StorageUnit
    unit = StorageUnit(id="B4", bus=14, e_max=200.0, e_min=0.0, e_initial=80.0,
                       p_max=100.0, p_min=0.0, eff_charge=0.95,
                       eff_discharge=0.95, capital_cost=200 * 75_000.0,
                       salvage_value=0.0, soh_eol=0.5, soh_initial=1.0,
                       ambient_temp=25.0)
    assert degradation_cost_coefficient(unit) == pytest.approx(30_000_000.0)


def test_lbd_census(toy3, default_net, lbd_solved):
    tmodel, _ = build_tscuc(toy3)
    lmodel, lindex = lbd_solved[0], lbd_solved[1]
    T = toy3.horizon.periods
    unstable = lindex.unstable_neurons[0]
    assert lmodel.num_binaries == tmodel.num_binaries + T * unstable
    bounds = propagate_bounds(default_net, storage_feature_box(toy3, 0))
    assert unstable == bounds.unstable_count()


def test_lbd_objective_decomposition(toy3, lbd_solved, lbd_schedule):
    _, index, result = lbd_solved
    sched = lbd_schedule
    assert sched.breakdown.fuel + sched.breakdown.degradation == \
        pytest.approx(result.objective, abs=1e-6)


def test_idle_storage_costs_idle_forward_value(toy3, default_net):
    model, index = build_lbdscuc(toy3, default_net)
    T = toy3.horizon.periods
    for t in range(T):
        model.set_bounds(index.p_disc[0, t], 0.0, 0.0)
        model.set_bounds(index.p_char[0, t], 0.0, 0.0)
    res = solve(model, SolveOptions(rel_mipgap=0.0, time_limit=300))
    assert res.status == "optimal"
    sched = extract_schedule(res, index, toy3)
    st = toy3.storage[0]
    idle = FeatureVector(temp=st.ambient_temp, c_rate=0.0,
                         soc=st.e_initial / st.e_max, dod=0.0,
                         soh=st.soh_initial)
    expected = T * index.deg_coeff[0] * forward(default_net, idle)
    assert sched.breakdown.degradation == pytest.approx(expected, abs=1e-6)


def test_box_containment_error_names_unit_and_feature(toy3, default_net):
    hot = dataclasses.replace(toy3.storage[0], p_max=50.0)   # c-rate up to 2.5
    case = dataclasses.replace(toy3, storage=(hot,))
    with pytest.raises(BoxContainmentError) as err:
        build_lbdscuc(case, default_net)
    msg = str(err.value)
    assert "B1" in msg and "c_rate" in msg
