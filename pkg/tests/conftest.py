"""Shared fixtures: the toy case, one trained default network, cached solves.

Training and the reference solves are session-scoped because they are the
expensive parts of the suite; every test that needs the default network or a
solved toy3 model reuses the same objects.
"""

import pytest

from bdscuc.degradation import generate_dataset, train, save_net
from bdscuc.embedding import build_lbdscuc
from bdscuc.formulation import build_tscuc, extract_schedule
from bdscuc.grid import toy_case, save_case
from bdscuc.milp import SolveOptions, solve


@pytest.fixture(scope="session")
def toy3():
    return toy_case()


@pytest.fixture(scope="session")
def default_net():
    """The contract training run: 10k synthetic samples, seed 0, hidden (8, 8)."""
    return train(generate_dataset(10000, 0), (8, 8), seed=0)


@pytest.fixture(scope="session")
def tscuc_solved(toy3):
    model, index = build_tscuc(toy3)
    result = solve(model, SolveOptions(rel_mipgap=0.0, time_limit=300))
    assert result.status == "optimal"
    return model, index, result


@pytest.fixture(scope="session")
def tscuc_schedule(toy3, tscuc_solved):
    _, index, result = tscuc_solved
    return extract_schedule(result, index, toy3)


@pytest.fixture(scope="session")
def lbd_solved(toy3, default_net):
    model, index = build_lbdscuc(toy3, default_net)
    result = solve(model, SolveOptions(rel_mipgap=0.01, time_limit=600))
    assert result.status == "optimal"
    return model, index, result


@pytest.fixture(scope="session")
def lbd_schedule(toy3, lbd_solved):
    _, index, result = lbd_solved
    return extract_schedule(result, index, toy3)


@pytest.fixture(scope="session")
def case_file(toy3, tmp_path_factory):
    path = tmp_path_factory.mktemp("case") / "toy3.json"
    save_case(toy3, path)
    return str(path)


@pytest.fixture(scope="session")
def net_file(default_net, tmp_path_factory):
    path = tmp_path_factory.mktemp("net") / "net.json"
    save_net(default_net, path)
    return str(path)


@pytest.fixture(scope="session")
def brute_force_toy3(toy3):
    from bdscuc.verify import brute_force_reference
    return brute_force_reference(toy3)


@pytest.fixture(scope="session")
def corruption_library():
    """One schedule mutation per constraint family, as (name, mutate, family)."""
    def library():
        return [
            ("terminal", lambda s: s.st_energy.__setitem__(
                (0, -1), s.st_energy[0, -1] + 1.0), "terminal_soc"),
            ("both_modes", lambda s: (s.st_udisc.__setitem__((0, 1), 1.0),
                                      s.st_uchar.__setitem__((0, 1), 1.0)),
             "mode_exclusivity"),
            ("balance", lambda s: s.gen_p.__setitem__(
                (0, 0), s.gen_p[0, 0] + 5.0), "nodal_balance"),
            ("uncommitted_output", lambda s: s.gen_on.__setitem__((0, 2), 0.0),
             "gen_limits"),
            ("ramp_jump", lambda s: (s.gen_p.__setitem__((0, 1), 0.0),
                                     s.gen_on.__setitem__((0, 1), 0.0)),
             "ramp"),
            ("free_start", lambda s: (s.gen_on.__setitem__((1, 1), 1.0),
                                      s.gen_p.__setitem__((1, 1), 5.0)),
             "startup"),
            ("overflow", lambda s: s.flow.__setitem__((0, 0), 200.0),
             "flow_bounds"),
            ("angle_drift", lambda s: s.theta.__setitem__(
                (1, 0), s.theta[1, 0] + 0.01), "flow_physics"),
            ("soc_off", lambda s: s.st_soc.__setitem__(
                (0, 0), s.st_soc[0, 0] + 0.2), "soc_link"),
            ("ungated_discharge", lambda s: s.st_disc.__setitem__((0, 0), 3.0),
             "storage_power"),
            ("overfull", lambda s: s.st_energy.__setitem__((0, 0), 30.0),
             "energy_bounds"),
            ("phantom_wind", lambda s: s.renewable.__setitem__((0, 0), 50.0),
             "renewable_bounds"),
        ]
    return library
