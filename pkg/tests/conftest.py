"""Shared expensive fixtures: flow families and kernel grids."""

import numpy as np
import pytest

from qg3.fields import dilated_velocity_family
from qg3.flow import integrate_flow
from qg3.grid import Grid3


@pytest.fixture(scope="session")
def flow_grid():
    return Grid3(64, 2 * np.pi)


@pytest.fixture(scope="session")
def flow_family(flow_grid):
    """Flows of the exact-dilation velocity family, keyed by (j, V).

    Built once per session: the same flows serve the flow-bound sweeps, the
    diffeomorphism suite and the acceptance tests.
    """
    rng = np.random.default_rng(21)
    vels = dilated_velocity_family(flow_grid, rng, j_list=(2, 3, 4), grad_linf=1.0)
    flows = {}
    for j, V in [(2, 0.05), (2, 0.1), (2, 0.2), (3, 0.1), (4, 0.1)]:
        flows[(j, V)] = integrate_flow(vels[j], j=j, t_final=V)
    return flows


@pytest.fixture(scope="session")
def commutator_grid():
    # half-size box: the lattice reaches dyadic index 4 at n = 64
    return Grid3(64, np.pi)


@pytest.fixture(scope="session")
def commutator_flows(commutator_grid):
    """Dilation-family flows on the commutator grid, keyed by (j, V)."""
    rng = np.random.default_rng(33)
    vels = dilated_velocity_family(commutator_grid, rng, j_list=(2, 3, 4),
                                   grad_linf=1.0, band=(0.4, 0.7))
    flows = {}
    for j, V in [(2, 0.1), (3, 0.05), (3, 0.1), (3, 0.2), (4, 0.1)]:
        flows[(j, V)] = integrate_flow(vels[j], j=j, t_final=V)
    return flows
