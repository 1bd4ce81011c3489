import numpy as np
import pytest

from liningbayes.fem import LiningModel, build_mesh


@pytest.fixture(scope="session")
def reference_model():
    """Reference lining: D = 6.2 m, E = 3.5e7 kPa, t = 0.35 m, k_f = 1000, N_e = 100."""
    return LiningModel.from_section(6.2, 3.5e7, 0.35, k_f=1000.0, n_elements=100)


@pytest.fixture(scope="session")
def reference_mesh(reference_model):
    return build_mesh(reference_model)


@pytest.fixture(scope="session")
def small_model():
    return LiningModel.from_section(6.2, 3.5e7, 0.35, k_f=1000.0, n_elements=24, eta=0.26)


@pytest.fixture(scope="session")
def small_mesh(small_model):
    return build_mesh(small_model)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


TINY = {
    "name": "tiny",
    "seed": 99,
    "lining": {"n_elements": 24, "eta": 0.26},
    "truth": {"knots": [520.0, 200.0, 80.0, 200.0, 520.0, 200.0, 80.0, 200.0]},
    "observations": {"noise_std": 0.05, "sigma": 0.1},
    "cases": {"A": {"baselines": 2}, "A1": {"baselines": 2, "force": True},
              "F": {"baselines": 12}, "F1": {"baselines": 12, "force": True}},
    "inversion": {"n_knots": 8, "prior": [0.0, 600.0], "density_bins": 30, "monitoring_points": 36},
    "sampler": {"n_chains": 16, "iterations": 3000, "thin": 10},
}


@pytest.fixture
def tiny():
    """Fast scenario: 24 elements, 8 knots, point-symmetric 8-knot truth."""
    import copy

    from liningbayes.scenario import Scenario

    return Scenario.from_dict(copy.deepcopy(TINY))


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion that ran."""
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
