"""Exact mixed-integer embedding of the degradation network.

Each network evaluation is compiled into linear rows: the input scaler and
every affine layer become equality rows, and every ReLU whose pre-activation
interval [L, U] straddles zero is linearized exactly with one binary d:

    a >= x,   a >= 0,   a <= x - L * (1 - d),   a <= U * d

Neurons with U <= 0 are pruned to the constant 0; neurons with L >= 0 pass
through (a is the pre-activation variable itself, no binary). Interval
arithmetic over the storage unit's reachable feature box supplies sound
per-neuron big-M constants, so for any feasible integer point the encoded
output equals the plain forward pass.

The degradation-aware commitment model extends the traditional one with a
network evaluation per storage unit and period; the objective gains
(capital - salvage) / (1 - soh_eol) dollars per unit of predicted SOH loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .degradation import DegradationNet
from .formulation import (VariableIndex, build_tscuc,
                          degradation_cost_coefficient)
from .grid import GridCase
from .milp.model import LinExpr, MilpModel, VarId

PRUNED = "pruned"          # U <= 0: activation is constant zero
PASS_THROUGH = "pass"      # L >= 0: activation equals pre-activation
UNSTABLE = "unstable"      # L < 0 < U: needs the binary indicator

# tolerated overshoot of a feature box beyond the net's training box,
# as a fraction of the per-feature training span (min-max fits shrink
# slightly inside the sampling box)
CONTAINMENT_SLACK = 0.02


class UnsoundBoundsError(Exception):
    """Feature box exceeds the box the neuron bounds were propagated for."""


class BoxContainmentError(Exception):
    """A storage unit's reachable features leave the net's training box."""


@dataclass
class FeatureExpr:
    """The five network inputs as affine functions of model variables."""
    temp: LinExpr
    c_rate: LinExpr
    soc: LinExpr
    dod: LinExpr
    soh: LinExpr
    lo: np.ndarray    # (5,) reachable lower bounds, raw feature units
    hi: np.ndarray    # (5,) reachable upper bounds

    def as_list(self) -> list[LinExpr]:
        return [self.temp, self.c_rate, self.soc, self.dod, self.soh]


@dataclass
class NeuronBounds:
    """Sound pre-activation intervals per layer for a given input box."""
    input_lo: np.ndarray
    input_hi: np.ndarray
    pre_lo: list[np.ndarray]    # one array per affine layer (h1, h2, output)
    pre_hi: list[np.ndarray]

    def tags(self) -> list[list[str]]:
        out = []
        for lo, hi in zip(self.pre_lo, self.pre_hi):
            layer = []
            for L, U in zip(lo, hi):
                if U <= 0:
                    layer.append(PRUNED)
                elif L >= 0:
                    layer.append(PASS_THROUGH)
                else:
                    layer.append(UNSTABLE)
            out.append(layer)
        return out

    def unstable_count(self) -> int:
        return sum(tag == UNSTABLE for layer in self.tags() for tag in layer)


@dataclass
class ReluEncoding:
    """Bookkeeping for one embedded evaluation."""
    pre_vars: list[list[VarId | None]]       # None for pruned neurons
    act_vars: list[list[VarId | None]]       # None for pruned; == pre for pass
    indicators: list[list[VarId | None]]     # binaries for unstable neurons
    tags: list[list[str]]
    output: VarId

    def binary_count(self) -> int:
        return sum(v is not None for layer in self.indicators for v in layer)


def feature_expressions(index: VariableIndex, case: GridCase, s: int, t: int
                        ) -> FeatureExpr:
    """Wire the five degradation features to decision variables of unit s at t.

    Temperature and health are case constants. C-rate is total throughput
    power over capacity. The interval SOC is the mean of the boundary
    energies. Depth of discharge equals |delta SOC| because mode exclusivity
    zeroes one of the two power terms.
    """
    st = case.storage[s]
    dt = case.horizon.dt
    temp = LinExpr(constant=st.ambient_temp)
    soh = LinExpr(constant=st.soh_initial)

    c_rate = LinExpr()
    c_rate.add_term(index.p_disc[s, t], 1.0 / st.e_max)
    c_rate.add_term(index.p_char[s, t], 1.0 / st.e_max)

    soc = LinExpr()
    soc.add_term(index.energy[s, t], 1.0 / (2.0 * st.e_max))
    if t == 0:
        soc.constant += st.e_initial / (2.0 * st.e_max)
    else:
        soc.add_term(index.energy[s, t - 1], 1.0 / (2.0 * st.e_max))

    dod = LinExpr()
    dod.add_term(index.p_disc[s, t], dt / (st.eff_discharge * st.e_max))
    dod.add_term(index.p_char[s, t], dt * st.eff_charge / st.e_max)

    lo, hi = storage_feature_box(case, s)
    return FeatureExpr(temp=temp, c_rate=c_rate, soc=soc, dod=dod, soh=soh,
                       lo=lo, hi=hi)


def propagate_bounds(net: DegradationNet, box: tuple[np.ndarray, np.ndarray]
                     ) -> NeuronBounds:
    """Interval arithmetic through the scaler and every affine layer."""
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if np.any(lo > hi):
        raise ValueError("empty feature box")
    a_lo = net.scale_features(lo)
    a_hi = net.scale_features(hi)
    pre_lo, pre_hi = [], []
    for W, b in zip(net.weights, net.biases):
        Wp = np.maximum(W, 0.0)
        Wn = np.minimum(W, 0.0)
        x_lo = a_lo @ Wp + a_hi @ Wn + b
        x_hi = a_hi @ Wp + a_lo @ Wn + b
        pre_lo.append(x_lo)
        pre_hi.append(x_hi)
        a_lo = np.maximum(x_lo, 0.0)
        a_hi = np.maximum(x_hi, 0.0)
    return NeuronBounds(input_lo=lo, input_hi=hi, pre_lo=pre_lo, pre_hi=pre_hi)


def encode_network(model: MilpModel, net: DegradationNet, features: FeatureExpr,
                   bounds: NeuronBounds, name_prefix: str,
                   bookkeeping: list | None = None) -> VarId:
    """Add one exact network evaluation to the model; returns the output var.

    Pass a list as `bookkeeping` to receive the :class:`ReluEncoding` record
    (per-neuron variables, indicators, and stability tags).
    """
    tol = 1e-9 + 1e-9 * np.abs(bounds.input_hi - bounds.input_lo)
    if np.any(features.lo < bounds.input_lo - tol) or \
            np.any(features.hi > bounds.input_hi + tol):
        raise UnsoundBoundsError(
            f"{name_prefix}: feature box [{features.lo}, {features.hi}] exceeds "
            f"the propagated box [{bounds.input_lo}, {bounds.input_hi}]")

    # scaler as an affine pre-layer over the feature expressions
    prev: list[LinExpr | None] = []
    for j, expr in enumerate(features.as_list()):
        scaled = expr * (1.0 / net.scaler_scale[j])
        scaled.constant -= net.scaler_offset[j] / net.scaler_scale[j]
        prev.append(scaled)

    encoding = ReluEncoding(pre_vars=[], act_vars=[], indicators=[],
                            tags=bounds.tags(), output=None)  # type: ignore

    n_layers = len(net.weights)
    for layer in range(n_layers):
        W, b = net.weights[layer], net.biases[layer]
        tags = encoding.tags[layer]
        lo_l, hi_l = bounds.pre_lo[layer], bounds.pre_hi[layer]
        nxt: list[LinExpr | None] = []
        pre_row, act_row, ind_row = [], [], []
        for i in range(W.shape[1]):
            tag = tags[i]
            base = f"{name_prefix}_l{layer + 1}n{i + 1}"
            if tag == PRUNED:
                pre_row.append(None)
                act_row.append(None)
                ind_row.append(None)
                nxt.append(None)
                continue
            L, U = float(lo_l[i]), float(hi_l[i])
            x_expr = LinExpr(constant=b[i])
            for j in range(W.shape[0]):
                w = W[j, i]
                if w == 0.0 or prev[j] is None:
                    continue
                contrib = prev[j] * w
                x_expr = x_expr + contrib
            x_var = model.add_continuous(L, U, f"x_{base}")
            model.add_constraint(x_var - x_expr, "=", 0.0, f"def_{base}")
            pre_row.append(x_var)
            if tag == PASS_THROUGH:
                act_row.append(x_var)
                ind_row.append(None)
                nxt.append(LinExpr({x_var: 1.0}))
                continue
            a_var = model.add_continuous(0.0, max(0.0, U), f"a_{base}")
            d_var = model.add_binary(f"d_{base}")
            model.add_constraint(a_var - x_var, ">=", 0.0, f"relu_lb_{base}")
            model.add_constraint(a_var - x_var - L * d_var, "<=", -L,
                                 f"relu_ub1_{base}")
            model.add_constraint(a_var - U * d_var, "<=", 0.0, f"relu_ub2_{base}")
            act_row.append(a_var)
            ind_row.append(d_var)
            nxt.append(LinExpr({a_var: 1.0}))
        encoding.pre_vars.append(pre_row)
        encoding.act_vars.append(act_row)
        encoding.indicators.append(ind_row)
        prev = nxt

    out = encoding.act_vars[-1][0]
    if out is None:
        # pruned output neuron: emit an explicit constant-zero handle
        out = model.add_continuous(0.0, 0.0, f"a_{name_prefix}_out0")
    encoding.output = out
    if bookkeeping is not None:
        bookkeeping.append(encoding)
    return out


def storage_feature_box(case: GridCase, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Reachable feature box of unit s (identical across periods)."""
    st = case.storage[s]
    dt = case.horizon.dt
    lo = np.array([st.ambient_temp, 0.0, st.e_min / st.e_max, 0.0, st.soh_initial])
    hi = np.array([
        st.ambient_temp,
        st.p_max / st.e_max,
        1.0,
        min(1.0, dt * st.p_max / (st.eff_discharge * st.e_max)),
        st.soh_initial,
    ])
    return lo, hi


def check_box_containment(case: GridCase, net: DegradationNet) -> None:
    """Every unit's reachable features must lie in the net's training box."""
    t_lo, t_hi = net.training_box()
    slack = CONTAINMENT_SLACK * net.scaler_scale
    feature_names = ("temp", "c_rate", "soc", "dod", "soh")
    for s, st in enumerate(case.storage):
        lo, hi = storage_feature_box(case, s)
        for j, name in enumerate(feature_names):
            if lo[j] < t_lo[j] - slack[j] or hi[j] > t_hi[j] + slack[j]:
                raise BoxContainmentError(
                    f"storage {st.id!r} feature {name!r} spans "
                    f"[{lo[j]:.4g}, {hi[j]:.4g}], outside the training box "
                    f"[{t_lo[j]:.4g}, {t_hi[j]:.4g}]")


def build_lbdscuc(case: GridCase, net: DegradationNet,
                  allow_shedding: bool = False) -> tuple[MilpModel, VariableIndex]:
    """Degradation-aware commitment model: traditional rows plus one embedded
    network evaluation per storage unit and period, costed in the objective."""
    net.validate()
    check_box_containment(case, net)
    model, index = build_tscuc(case, allow_shedding=allow_shedding)
    model.name = "lbdscuc"

    obj = model.objective
    for s, st in enumerate(case.storage):
        box = storage_feature_box(case, s)
        bounds = propagate_bounds(net, box)
        index.deg_coeff[s] = degradation_cost_coefficient(st)
        index.unstable_neurons[s] = bounds.unstable_count()
        for t in range(case.horizon.periods):
            features = feature_expressions(index, case, s, t)
            out = encode_network(model, net, features, bounds,
                                 f"nn_{st.id}_{t + 1}")
            index.deg_output[s, t] = out
            obj.add_term(out, index.deg_coeff[s])
    model.set_objective(obj)
    return model, index


def pinned_network_output(net: DegradationNet, point: np.ndarray,
                          box: tuple[np.ndarray, np.ndarray] | None = None,
                          bounds: NeuronBounds | None = None) -> float:
    """Solve the encoded network alone with its inputs fixed to `point`.

    Exactness probe: the unique integer-feasible output must equal the plain
    forward pass. Bounds default to propagation over `box` (or the net's
    training box), NOT over the pinned point, so the binaries stay live.
    """
    from .milp.branch_bound import solve
    from .milp.model import SolveOptions

    point = np.asarray(point, dtype=float)
    if box is None:
        box = net.training_box()
    if bounds is None:
        bounds = propagate_bounds(net, box)
    model = MilpModel("pinned_net")
    in_vars = [model.add_continuous(box[0][j], box[1][j], f"in{j}")
               for j in range(5)]
    exprs = [LinExpr({v: 1.0}) for v in in_vars]
    features = FeatureExpr(*exprs, lo=np.asarray(box[0], float),
                           hi=np.asarray(box[1], float))
    out = encode_network(model, net, features, bounds, "pin")
    for j, v in enumerate(in_vars):
        model.set_bounds(v, point[j], point[j])
    model.set_objective(LinExpr({out: 1.0}))
    result = solve(model, SolveOptions(rel_mipgap=0.0, time_limit=120.0))
    if result.status != "optimal":
        raise RuntimeError(f"pinned-network solve ended {result.status}")
    return float(result.values[out])
