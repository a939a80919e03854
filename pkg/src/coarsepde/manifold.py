"""Moment featureization, Diffusion Maps, Nystrom extension and
Geometric Harmonics.

The kernel chain: W_ij = exp(-d_ij^2 / eps); W_bar = D^-1 W D^-1 with
D = diag(row sums of W); W_hat = D_bar^-1 W_bar (row stochastic); the
diffusion operator is A = I - W_hat. Eigenpairs of A, ascending in
lambda, give the embedding coordinates. The eigenproblem is solved on
the symmetric conjugation D_bar^1/2 W_hat D_bar^-1/2 and the
eigenvectors are transformed back.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import eigh
from scipy.spatial.distance import cdist, pdist, squareform

from . import _kernels as kernels
from .datastore import ParticleEnsemble, ScalarField1D
from .errors import ConfigError, DisconnectedKernelError

NYSTROM_EIGENVALUE_CUTOFF = 1e-12
GH_EIGENVALUE_CUTOFF = 1e-10


@dataclass(frozen=True)
class MomentVector:
    """Raw moments M_0..M_K of one box's particle distribution."""

    moments: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.moments, dtype=np.float64)
        m.setflags(write=False)
        object.__setattr__(self, "moments", m)
        if m.ndim != 1 or m.size < 2:
            raise ConfigError("need at least moments M_0 and M_1")
        if m[0] < 0:
            raise ConfigError("M_0 must be nonnegative")


def box_moments(positions_in_box: np.ndarray, box_bounds: tuple[float, float],
                R: float, K: int) -> MomentVector:
    """M_k = (1/R) sum_p x_p^k with x_p rescaled to [0, 1] in the box."""
    lo, hi = box_bounds
    if K < 1 or hi <= lo or R <= 0:
        raise ConfigError("need K >= 1, hi > lo and R > 0")
    pos = np.asarray(positions_in_box, dtype=np.float64)
    if pos.size and (pos.min() < lo or pos.max() > hi):
        raise ConfigError("positions fall outside the box bounds")
    xn = (pos - lo) / (hi - lo)
    powers = xn[None, :] ** np.arange(K + 1)[:, None]
    return MomentVector(powers.sum(axis=1) / R)


def ensemble_box_moments(ensemble: ParticleEnsemble, n_boxes: int,
                         K: int) -> np.ndarray:
    """Moment vectors of every box of an ensemble, shape (n_boxes, K+1)."""
    if K < 1 or n_boxes < 2:
        raise ConfigError("need K >= 1 and n_boxes >= 2")
    return kernels.box_moments(ensemble.positions, n_boxes,
                               ensemble.domain_length, 1.0 / ensemble.R, K)


def density_box_moments(field: ScalarField1D, n_boxes: int,
                        K: int) -> np.ndarray:
    """Expected box moments of a density field (infinite-particle limit).

    Exact for densities that are piecewise constant on the field's grid:
    M_k(box) = sum_cells rho_cell * w_box * (b^{k+1} - a^{k+1}) / (k+1)
    with [a, b] the cell's span in box-normalized coordinates.
    """
    n = field.n
    if n % n_boxes != 0:
        raise ConfigError("field grid must be a multiple of n_boxes")
    per = n // n_boxes
    w_box = field.domain_length / n_boxes
    edges = np.arange(per + 1) / per  # cell edges in box coordinates
    ks = np.arange(K + 1)
    # weight[c, k] = integral of x^k over cell c of the unit box
    weight = (edges[1:, None] ** (ks + 1) - edges[:-1, None] ** (ks + 1)) \
        / (ks + 1)
    rho = field.values.reshape(n_boxes, per)
    return w_box * (rho @ weight)


def moment_distance_matrix(moment_vectors) -> np.ndarray:
    """Pairwise Euclidean distances between truncated raw moment vectors."""
    rows = [mv.moments if isinstance(mv, MomentVector) else np.asarray(mv)
            for mv in moment_vectors]
    lengths = {r.shape[-1] for r in rows}
    if len(lengths) != 1:
        raise ConfigError("moment vectors have mismatched lengths")
    data = np.asarray(rows, dtype=np.float64)
    return squareform(pdist(data, metric="euclidean"))


@dataclass(frozen=True)
class EmbeddingResult:
    """Diffusion Maps eigenpairs plus what Nystrom extension needs."""

    eigenvalues: np.ndarray      # of A = I - W_hat, ascending
    eigenvectors: np.ndarray     # (n_points, m+1), unit-norm columns
    epsilon: float
    kernel_row_sums: np.ndarray  # D, row sums of the raw kernel W
    epsilon_rule: str
    independent_indices: list[int] | None = None

    @property
    def n_points(self) -> int:
        return self.eigenvectors.shape[0]

    def with_independent_indices(self, idx: list[int]) -> "EmbeddingResult":
        return replace(self, independent_indices=list(idx))


def _resolve_epsilon(distances: np.ndarray, epsilon_rule) -> tuple[float, str]:
    if isinstance(epsilon_rule, (int, float)):
        eps = float(epsilon_rule)
        rule = "fixed"
    elif epsilon_rule == "median":
        eps = float(np.median(squareform(distances, checks=False)))
        rule = "median"
    elif epsilon_rule == "median_sq":
        eps = float(np.median(squareform(distances, checks=False)) ** 2)
        rule = "median_sq"
    else:
        raise ConfigError(f"unknown epsilon rule {epsilon_rule!r}")
    if eps <= 0:
        raise ConfigError("kernel width must be positive (identical points?)")
    return eps, rule


def kernel_chain(distances: np.ndarray, eps: float) -> dict:
    """The full normalization chain for a training distance matrix."""
    w = np.exp(-(distances * distances) / eps)
    off = w - np.diag(np.diag(w))
    if np.any(off.max(axis=1) < 1e-300):
        raise DisconnectedKernelError(
            "kernel graph is numerically disconnected; increase epsilon"
        )
    d = w.sum(axis=1)
    w_bar = w / np.outer(d, d)
    d_bar = w_bar.sum(axis=1)
    w_hat = w_bar / d_bar[:, None]
    return {"w": w, "d": d, "w_bar": w_bar, "d_bar": d_bar, "w_hat": w_hat}


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def diffusion_maps(distances: np.ndarray, epsilon_rule="median",
                   m: int = 10) -> EmbeddingResult:
    """Embed points given their pairwise distances.

    Returns the m+1 leading eigenpairs of the diffusion operator
    (including the trivial constant one at lambda_0 = 0).
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ConfigError("distance matrix must be square")
    n = d.shape[0]
    if n < m + 2:
        raise ConfigError(f"need at least m+2={m + 2} points, got {n}")
    if not np.allclose(d, d.T, atol=1e-12):
        raise ConfigError("distance matrix must be symmetric")
    if np.abs(np.diag(d)).max() > 1e-12:
        raise ConfigError("distance matrix must have a zero diagonal")

    eps, rule = _resolve_epsilon(d, epsilon_rule)
    chain = kernel_chain(d, eps)
    d_bar = chain["d_bar"]
    sqrt_d_bar = np.sqrt(d_bar)
    sym = chain["w_bar"] / np.outer(sqrt_d_bar, sqrt_d_bar)
    sym = 0.5 * (sym + sym.T)
    mu, v = eigh(sym)                      # ascending eigenvalues of W_hat
    mu = mu[::-1][: m + 1]                 # descending -> lambda ascending
    v = v[:, ::-1][:, : m + 1]
    phi = v / sqrt_d_bar[:, None]
    phi = phi / np.linalg.norm(phi, axis=0)
    phi = _fix_signs(phi)
    return EmbeddingResult(
        eigenvalues=1.0 - mu,
        eigenvectors=phi,
        epsilon=eps,
        kernel_row_sums=chain["d"],
        epsilon_rule=rule,
    )


def nystrom_extend(emb: EmbeddingResult,
                   distances_new_to_train: np.ndarray) -> np.ndarray:
    """Extend the embedding coordinates to new points.

    ``distances_new_to_train`` is (n_new, n_train) in the training metric.
    Coordinates whose eigenvalue is too close to 1 cannot be divided
    through and are returned as zeros (with a warning).
    """
    d = np.atleast_2d(np.asarray(distances_new_to_train, dtype=np.float64))
    if d.shape[1] != emb.n_points:
        raise ConfigError("distance block does not match training set size")
    w_new = np.exp(-(d * d) / emb.epsilon)
    d_new = w_new.sum(axis=1)
    if np.any(d_new <= 0):
        raise DisconnectedKernelError(
            "a new point has no kernel weight on the training set"
        )
    w_bar = w_new / np.outer(d_new, emb.kernel_row_sums)
    w_hat = w_bar / w_bar.sum(axis=1)[:, None]
    mu = 1.0 - emb.eigenvalues
    out = np.zeros((d.shape[0], emb.eigenvectors.shape[1]))
    usable = mu >= NYSTROM_EIGENVALUE_CUTOFF
    if not usable.all():
        warnings.warn(
            f"skipping {int((~usable).sum())} coordinate(s) with eigenvalue "
            "too close to 1 in the Nystrom extension",
            stacklevel=2,
        )
    proj = w_hat @ emb.eigenvectors[:, usable]
    out[:, usable] = proj / mu[usable]
    return out


def _local_linear_residual(x: np.ndarray, y: np.ndarray,
                           n_neighbors: int) -> float:
    """Leave-one-out local-linear-regression residual of y against x."""
    n = x.shape[0]
    dist = cdist(x, x)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1)[:, :n_neighbors]
    pred = np.empty(n)
    for i in range(n):
        nb = order[i]
        a = np.column_stack([np.ones(nb.size), x[nb]])
        coef, *_ = np.linalg.lstsq(a, y[nb], rcond=None)
        pred[i] = coef[0] + x[i] @ coef[1:]
    denom = float(np.sum(y * y))
    if denom == 0.0:
        return 0.0
    return float(np.sqrt(np.sum((y - pred) ** 2) / denom))


def select_independent_coords(emb: EmbeddingResult, r_threshold: float = 0.5,
                              n_neighbors: int | None = None,
                              significance: float = 0.01) -> list[int]:
    """Indices of eigenvectors that parameterize new directions.

    Eigenvector 1 is always accepted; each later one is accepted when its
    leave-one-out local-linear-regression residual against the already
    accepted coordinates exceeds the threshold. Eigenvectors whose kernel
    eigenvalue mu_k = 1 - lambda_k has decayed below ``significance`` of
    mu_1 carry no diffusion structure (on sampled data they are noise
    modes with large residuals) and are not considered.
    """
    n_coords = emb.eigenvectors.shape[1]
    if n_coords < 3:
        raise ConfigError("need at least two nontrivial eigenvectors")
    n = emb.n_points
    if n_neighbors is None:
        n_neighbors = int(np.ceil(n / 10))
    n_neighbors = max(3, min(n_neighbors, n - 1))
    mu = 1.0 - emb.eigenvalues
    accepted = [1]
    for k in range(2, n_coords):
        if mu[k] < significance * mu[1]:
            continue
        x = emb.eigenvectors[:, accepted]
        r = _local_linear_residual(x, emb.eigenvectors[:, k], n_neighbors)
        if r > r_threshold:
            accepted.append(k)
    return accepted


class GeometricHarmonics:
    """Kernel-eigenfunction expansion of a function sampled on a manifold."""

    def __init__(self, coords: np.ndarray, values: np.ndarray,
                 n_harmonics: int, eps_gh: float | None = None):
        x = np.asarray(coords, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(values, dtype=np.float64)
        if y.shape[0] != x.shape[0]:
            raise ConfigError("coords and target values disagree in length")
        if eps_gh is None:
            eps_gh = float(np.median(pdist(x, metric="sqeuclidean")))
        if eps_gh <= 0:
            raise ConfigError("eps_gh must be positive")
        g = np.exp(-cdist(x, x, metric="sqeuclidean") / eps_gh)
        sig, psi = eigh(g)
        sig = sig[::-1][:n_harmonics]
        psi = psi[:, ::-1][:, :n_harmonics]
        keep = sig > GH_EIGENVALUE_CUTOFF
        if not keep.all():
            warnings.warn(
                f"truncating {int((~keep).sum())} ill-conditioned harmonics",
                stacklevel=2,
            )
            sig, psi = sig[keep], psi[:, keep]
        self.eps_gh = eps_gh
        self.train_coords = x
        self.eigenvalues = sig
        self.eigenvectors = psi
        self.coefficients = psi.T @ y

    def __call__(self, new_coords: np.ndarray) -> np.ndarray:
        x = np.asarray(new_coords, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        g = np.exp(-cdist(x, self.train_coords, metric="sqeuclidean")
                   / self.eps_gh)
        psi_new = (g @ self.eigenvectors) / self.eigenvalues
        return psi_new @ self.coefficients


def geometric_harmonics(coords: np.ndarray, target_values: np.ndarray,
                        n_harmonics: int,
                        eps_gh: float | None = None) -> GeometricHarmonics:
    """Fit target values on sample coordinates; returns a callable that
    evaluates the extension at new coordinates."""
    return GeometricHarmonics(coords, target_values, n_harmonics, eps_gh)
