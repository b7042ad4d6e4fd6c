"""Shared fixtures: the hand-checkable 2-bus and 3-bus networks plus the
bundled 39-bus case. All expected values in the tests were computed by hand
or against independent oracles before being frozen here.
"""

import numpy as np
import pytest

from swingctl.controller import SafetySpec
from swingctl.equilibrium import solve_equilibrium
from swingctl.netgraph import PowerNetwork, build_incidence
from swingctl.scenario_io import bundled_path, load_network


@pytest.fixture(scope="session")
def net2():
    # single line, unit everything: lam_eq = pi/6 solves sin(lam) = 0.5
    return PowerNetwork(
        inertia=np.array([1.0, 1.0]),
        damping=np.array([1.0, 1.0]),
        p_nom=np.array([0.5, -0.5]),
        edges=((0, 1),),
        susceptance=np.array([1.0]),
    )


@pytest.fixture(scope="session")
def inc2(net2):
    return build_incidence(net2)


@pytest.fixture(scope="session")
def eq2(net2, inc2):
    return solve_equilibrium(net2, inc2)


@pytest.fixture(scope="session")
def net3():
    # path 1-2-3 with unit susceptance; mixed inertia exercises M != I paths
    return PowerNetwork(
        inertia=np.array([1.0, 0.8, 1.2]),
        damping=np.array([1.0, 1.0, 1.0]),
        p_nom=np.array([0.4, 0.1, -0.5]),
        edges=((0, 1), (1, 2)),
        susceptance=np.array([1.0, 1.0]),
    )


@pytest.fixture(scope="session")
def inc3(net3):
    return build_incidence(net3)


@pytest.fixture(scope="session")
def eq3(net3, inc3):
    return solve_equilibrium(net3, inc3)


@pytest.fixture(scope="session")
def spec_band():
    return SafetySpec(omega_min=-0.2, omega_max=0.2)


@pytest.fixture(scope="session")
def net39():
    return load_network(bundled_path("ieee39_net.json"))


@pytest.fixture(scope="session")
def inc39(net39):
    return build_incidence(net39)


@pytest.fixture(scope="session")
def eq39(net39, inc39):
    return solve_equilibrium(net39, inc39)
