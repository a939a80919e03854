import numpy as np
import pytest
from scipy.spatial.distance import cdist, pdist, squareform
from scipy.stats import spearmanr

from coarsepde.datastore import ParticleEnsemble
from coarsepde.errors import ConfigError, DisconnectedKernelError
from coarsepde.ics import burgers_two_hump_ic
from coarsepde.manifold import (box_moments, density_box_moments,
                                diffusion_maps, ensemble_box_moments,
                                geometric_harmonics, kernel_chain,
                                moment_distance_matrix, nystrom_extend,
                                select_independent_coords)
from coarsepde.particles import lift_density, make_rng

TWO_PI = 2.0 * np.pi


# --- moments ---------------------------------------------------------------

def test_box_moments_empty():
    mv = box_moments(np.zeros(0), (0.0, 1.0), R=5.0, K=4)
    assert np.all(mv.moments == 0.0)


def test_box_moments_single_particle_at_right_edge():
    mv = box_moments(np.array([1.0]), (0.0, 1.0), R=1.0, K=6)
    assert np.allclose(mv.moments, 1.0)


def test_box_moments_uniform_monte_carlo():
    rng = make_rng(1)
    pos = rng.random(10_000)
    mv = box_moments(pos, (0.0, 1.0), R=10_000.0, K=6)
    ks = np.arange(7)
    assert np.allclose(mv.moments, 1.0 / (ks + 1), rtol=0.02)


def test_box_moments_rescaling():
    mv = box_moments(np.array([2.5]), (2.0, 3.0), R=1.0, K=2)
    assert np.allclose(mv.moments, [1.0, 0.5, 0.25])


def test_ensemble_moments_match_single_box_op():
    ens = lift_density(burgers_two_hump_ic(16), R=200.0, seed=0)
    all_moments = ensemble_box_moments(ens, 16, 4)
    w = TWO_PI / 16
    for i in (0, 7, 15):
        inside = ens.positions[(ens.positions >= i * w)
                               & (ens.positions < (i + 1) * w)]
        mv = box_moments(inside, (i * w, (i + 1) * w), R=200.0, K=4)
        assert np.allclose(all_moments[i], mv.moments, atol=1e-12)


def test_density_box_moments_infinite_particle_limit():
    """Quadrature moments equal the R -> infinity limit of lifted moments."""
    field = burgers_two_hump_ic(128)
    exact = density_box_moments(field, 128, 6)
    r = 4e6
    sampled = ensemble_box_moments(lift_density(field, R=r, seed=0), 128, 6)
    assert np.max(np.abs(exact - sampled)) < 5e-4
    # with grid == boxes the closed form is mass / (k + 1)
    w = TWO_PI / 128
    ks = np.arange(7)
    assert np.allclose(exact, np.outer(field.values * w, 1.0 / (ks + 1)))


def test_moment_distance_examples():
    d = moment_distance_matrix([np.array([0.0, 0.0]), np.array([3.0, 4.0])])
    assert d[0, 1] == pytest.approx(5.0)
    assert d[0, 0] == 0.0
    assert np.allclose(d, d.T)
    with pytest.raises(ConfigError):
        moment_distance_matrix([np.zeros(3), np.zeros(4)])


# --- diffusion maps ---------------------------------------------------------

def test_trivial_eigenpair_any_input():
    rng = make_rng(5)
    pts = rng.random((40, 3))
    emb = diffusion_maps(squareform(pdist(pts)), m=5)
    assert abs(emb.eigenvalues[0]) < 1e-10
    phi0 = emb.eigenvectors[:, 0]
    assert phi0.std() / np.abs(phi0).mean() < 1e-8


def test_kernel_chain_row_stochastic():
    rng = make_rng(6)
    pts = rng.random((60, 2))
    d = squareform(pdist(pts))
    eps = float(np.median(squareform(d, checks=False)))
    chain = kernel_chain(d, eps)
    assert np.max(np.abs(chain["w_hat"].sum(axis=1) - 1.0)) < 1e-12
    # A 1 = 0
    a = np.eye(60) - chain["w_hat"]
    assert np.max(np.abs(a @ np.ones(60))) < 1e-10


def test_spectrum_real_in_zero_two():
    rng = make_rng(7)
    pts = rng.random((50, 2))
    emb = diffusion_maps(squareform(pdist(pts)), m=48)
    assert emb.eigenvalues.min() > -1e-10
    assert emb.eigenvalues.max() < 2.0 + 1e-10


def test_circle_recovery(circle_distances):
    theta, d = circle_distances
    emb = diffusion_maps(d, m=10)
    phi1, phi2 = emb.eigenvectors[:, 1], emb.eigenvectors[:, 2]
    ang = np.arctan2(phi2, phi1)
    rel = np.mod(ang - ang[0], 2.0 * np.pi)
    rho = max(abs(spearmanr(rel, theta).statistic),
              abs(spearmanr(np.mod(-ang + ang[0], 2 * np.pi),
                            theta).statistic))
    assert rho >= 0.999


def test_permutation_equivariance():
    rng = make_rng(8)
    pts = rng.random((45, 2))
    d = squareform(pdist(pts))
    emb = diffusion_maps(d, m=4)
    perm = rng.permutation(45)
    emb_p = diffusion_maps(d[np.ix_(perm, perm)], m=4)
    for k in range(1, 5):
        a = emb.eigenvectors[perm, k]
        b = emb_p.eigenvectors[:, k]
        assert min(np.max(np.abs(a - b)), np.max(np.abs(a + b))) < 1e-8


def test_disconnected_kernel_rejected():
    # one point so far away its kernel row is numerically zero off-diagonal
    pts = np.concatenate([np.linspace(0, 1, 12), [1e6]])[:, None]
    d = squareform(pdist(pts))
    with pytest.raises(DisconnectedKernelError):
        diffusion_maps(d, epsilon_rule=1.0, m=3)


def test_input_validation():
    d = np.ones((5, 5))
    with pytest.raises(ConfigError):
        diffusion_maps(d, m=2)  # nonzero diagonal
    rng = make_rng(9)
    pts = rng.random((12, 2))
    d = squareform(pdist(pts))
    with pytest.raises(ConfigError):
        diffusion_maps(d, m=11)  # needs m + 2 points


# --- independent coordinate selection ---------------------------------------

def test_select_circle_two_coords(circle_distances):
    _, d = circle_distances
    emb = diffusion_maps(d, m=8)
    assert select_independent_coords(emb) == [1, 2]


def test_select_line_single_coord():
    x = np.linspace(0.0, 1.0, 200)[:, None]
    emb = diffusion_maps(squareform(pdist(x)), m=8)
    assert select_independent_coords(emb) == [1]


def test_select_burgers_snapshot_single_coord():
    ens = lift_density(burgers_two_hump_ic(128), R=4e4, seed=123)
    mom = ensemble_box_moments(ens, 128, 6)
    emb = diffusion_maps(moment_distance_matrix(mom), m=10)
    assert select_independent_coords(emb) == [1]
    rho = spearmanr(emb.eigenvectors[:, 1], mom[:, 0]).statistic
    assert abs(rho) >= 0.99


# --- Nystrom extension -------------------------------------------------------

def test_nystrom_self_consistency(circle_distances):
    _, d = circle_distances
    emb = diffusion_maps(d, m=6)
    ext = nystrom_extend(emb, d[:10])
    assert np.max(np.abs(ext - emb.eigenvectors[:10])) < 1e-6


def test_nystrom_held_out_circle():
    theta = 2.0 * np.pi * np.arange(320) / 320
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    rng = make_rng(10)
    test_idx = rng.choice(320, 64, replace=False)
    train_idx = np.setdiff1d(np.arange(320), test_idx)
    d_train = squareform(pdist(pts[train_idx]))
    emb = diffusion_maps(d_train, m=6)
    ext = nystrom_extend(emb, cdist(pts[test_idx], pts[train_idx]))
    ang = np.arctan2(ext[:, 2], ext[:, 1])
    rel = np.mod(ang - ang[0], 2 * np.pi)
    true_rel = np.mod(theta[test_idx] - theta[test_idx][0], 2 * np.pi)
    rho = max(abs(spearmanr(rel, true_rel).statistic),
              abs(spearmanr(np.mod(-ang + ang[0], 2 * np.pi),
                            true_rel).statistic))
    assert rho >= 0.999


def test_nystrom_warns_on_degenerate_eigenvalue(circle_distances):
    _, d = circle_distances
    emb = diffusion_maps(d, m=4)
    bad = emb.eigenvalues.copy()
    bad[2] = 1.0 - 1e-14  # eigenvalue of A at 1: W_hat eigenvalue vanishes
    from dataclasses import replace
    emb_bad = replace(emb, eigenvalues=bad)
    with pytest.warns(UserWarning, match="skipping"):
        ext = nystrom_extend(emb_bad, d[:5])
    assert np.all(ext[:, 2] == 0.0)


# --- geometric harmonics -----------------------------------------------------

def test_gh_reproduces_eigenfunction():
    rng = make_rng(11)
    x = np.sort(rng.random(80))
    gh_probe = geometric_harmonics(x, np.zeros(80), n_harmonics=10,
                                   eps_gh=0.05)
    target = gh_probe.eigenvectors[:, 3]
    gh = geometric_harmonics(x, target, n_harmonics=10, eps_gh=0.05)
    assert np.max(np.abs(gh(x) - target)) < 1e-8


def test_gh_constant_target():
    rng = make_rng(12)
    x = np.sort(rng.random(120))
    gh = geometric_harmonics(x, np.full(120, 2.5), n_harmonics=25,
                             eps_gh=0.05)
    new = np.linspace(0.05, 0.95, 40)
    assert np.max(np.abs(gh(new) - 2.5)) < 1e-5


def test_gh_truncates_ill_conditioned():
    x = np.linspace(0, 1, 50)
    with pytest.warns(UserWarning, match="truncating"):
        geometric_harmonics(x, np.sin(x), n_harmonics=50, eps_gh=1e3)


def test_gh_phi_to_density_monotone_map():
    """phi_1 -> box density on Burgers data: held-out error < 5% of range."""
    ens = lift_density(burgers_two_hump_ic(128), R=4e4, seed=42)
    mom = ensemble_box_moments(ens, 128, 6)
    emb = diffusion_maps(moment_distance_matrix(mom), m=6)
    phi1 = emb.eigenvectors[:, 1]
    w = TWO_PI / 128
    rho = mom[:, 0] / w
    rng = make_rng(13)
    held = rng.choice(128, 25, replace=False)
    train = np.setdiff1d(np.arange(128), held)
    gh = geometric_harmonics(phi1[train], rho[train], n_harmonics=30)
    err = np.abs(gh(phi1[held]) - rho[held])
    assert err.max() < 0.05 * (rho.max() - rho.min())
