import numpy as np
import pytest

from coarsepde.ics import cgle_paper_ic
from coarsepde.solvers import paper_config, simulate_cgle

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def cgle_paper_traj():
    """The reference CGLE run (c1=1, c2=2, L=200, N=128, dt=0.01, T=20)."""
    return simulate_cgle(cgle_paper_ic(), paper_config(T=20.0, sample_every=1))


@pytest.fixture(scope="session")
def circle_distances():
    """256 points uniform on the unit circle with Euclidean distances."""
    from scipy.spatial.distance import pdist, squareform

    theta = 2.0 * np.pi * np.arange(256) / 256
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    return theta, squareform(pdist(pts))
