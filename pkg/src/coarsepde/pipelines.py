"""Multi-stage workflows built from the module operations.

Burgers workflow: particle simulations -> per-box moment vectors ->
global Diffusion Maps embedding (trained on a mass-stratified subsample,
Nystrom-extended everywhere) -> phi_1 trajectories -> network training
-> rollout -> scoring against the finite-volume truth.

Emergent workflow: CGLE simulation -> scrambled agent bundle -> chart ->
spline resampling of transients onto the phi grid -> network training ->
corridor rollout -> scoring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import spearmanr

from .datastore import ScalarField1D, Trajectory
from .errors import ConfigError
from .manifold import (EmbeddingResult, density_box_moments, diffusion_maps,
                       ensemble_box_moments, geometric_harmonics,
                       moment_distance_matrix, nystrom_extend)
from .particles import ParticleSimConfig, estimate_density, \
    iter_particle_snapshots

NYSTROM_CHUNK = 65536


def simulate_particles_with_moments(
    ic: ScalarField1D, cfg: ParticleSimConfig, k_moments: int
) -> tuple[Trajectory, np.ndarray]:
    """One particle simulation recording both density snapshots and the
    live-ensemble box moments, shape (n_snapshots, n_boxes, K+1)."""
    rows, moments = [], []
    for _, ens in iter_particle_snapshots(ic, cfg):
        rows.append(estimate_density(ens, cfg.n_boxes).values)
        moments.append(ensemble_box_moments(ens, cfg.n_boxes, k_moments))
    traj = Trajectory(
        values=np.array(rows),
        dt_sample=cfg.dt_sample,
        domain_length=ic.domain_length,
        boundary="periodic",
    )
    return traj, np.array(moments)


def stratified_moment_subsample(moments: np.ndarray,
                                n_train: int) -> np.ndarray:
    """Pick training rows spanning the observed mass (M_0) range.

    ``moments`` is (n_rows, K+1); rows are sorted by M_0 and sampled at
    evenly spaced ranks, which is deterministic and covers the range.
    """
    rows = moments.reshape(-1, moments.shape[-1])
    if rows.shape[0] < n_train:
        return rows.copy()
    order = np.argsort(rows[:, 0], kind="stable")
    picks = np.linspace(0, rows.shape[0] - 1, n_train).round().astype(int)
    return rows[order[np.unique(picks)]]


@dataclass(frozen=True)
class MomentEmbedding:
    """A trained moment-space embedding with its training vectors."""

    embedding: EmbeddingResult
    train_moments: np.ndarray
    box_width: float

    def extend_phi(self, moments: np.ndarray,
                   coord: int = 1) -> np.ndarray:
        """Nystrom-extend one diffusion coordinate to arbitrary moment
        vectors; the leading axis structure of ``moments`` is kept."""
        rows = moments.reshape(-1, moments.shape[-1])
        out = np.empty(rows.shape[0])
        for start in range(0, rows.shape[0], NYSTROM_CHUNK):
            block = rows[start:start + NYSTROM_CHUNK]
            dists = cdist(block, self.train_moments, metric="euclidean")
            out[start:start + NYSTROM_CHUNK] = \
                nystrom_extend(self.embedding, dists)[:, coord]
        return out.reshape(moments.shape[:-1])

    def phi_to_density_map(self, n_harmonics: int = 40,
                           eps_gh: float | None = None):
        """Geometric Harmonics map from phi_1 back to box density."""
        phi_train = self.embedding.eigenvectors[:, 1]
        rho_train = self.train_moments[:, 0] / self.box_width
        return geometric_harmonics(phi_train, rho_train, n_harmonics, eps_gh)


def train_moment_embedding(moments_pool: np.ndarray, box_width: float,
                           n_train: int = 512, epsilon_rule="median",
                           m: int = 10) -> MomentEmbedding:
    """Embed a mass-stratified subsample of (snapshot, box) moment rows."""
    train = stratified_moment_subsample(moments_pool, n_train)
    dists = moment_distance_matrix(train)
    emb = diffusion_maps(dists, epsilon_rule=epsilon_rule, m=m)
    return MomentEmbedding(embedding=emb, train_moments=train,
                           box_width=box_width)


def phi_trajectory(me: MomentEmbedding, moments: np.ndarray,
                   dt_sample: float, domain_length: float) -> Trajectory:
    """phi_1 field trajectory from per-snapshot box moments."""
    phi = me.extend_phi(moments)
    return Trajectory(values=phi, dt_sample=dt_sample,
                      domain_length=domain_length, boundary="periodic")


def density_trajectory_to_phi(me: MomentEmbedding, traj: Trajectory,
                              n_boxes: int, k_moments: int) -> Trajectory:
    """phi_1 transform of a density trajectory via expected box moments.

    Uses the infinite-particle (quadrature) moments of each snapshot, so
    the result is deterministic and noise-free; suitable for truth
    references and rollout initial states.
    """
    moments = np.array([
        density_box_moments(traj.snapshot(i), n_boxes, k_moments)
        for i in range(traj.n_snapshots)
    ])
    return phi_trajectory(me, moments, traj.dt_sample, traj.domain_length)


def spearman_phi_vs_mass(me: MomentEmbedding,
                         moments_snapshot: np.ndarray) -> float:
    """|Spearman| between extended phi_1 and box mass for one snapshot."""
    phi = me.extend_phi(moments_snapshot)
    rho = spearmanr(phi, moments_snapshot[:, 0]).statistic
    return float(abs(rho))


def embed_single_snapshot(moments_snapshot: np.ndarray, epsilon_rule="median",
                          m: int = 10) -> EmbeddingResult:
    """Diffusion Maps on the boxes of one snapshot (no subsampling)."""
    dists = moment_distance_matrix(moments_snapshot)
    return diffusion_maps(dists, epsilon_rule=epsilon_rule, m=m)


def save_moment_embedding(path_stem, me: MomentEmbedding,
                          provenance: dict | None = None) -> None:
    """Persist a moment embedding: matrices via the datastore plus a JSON
    with scalars (epsilon, eigenvalues, box width)."""
    import json
    from pathlib import Path

    from .datastore import write_matrix

    stem = str(path_stem)
    write_matrix(f"{stem}.train", me.train_moments, provenance=provenance)
    write_matrix(f"{stem}.evecs", me.embedding.eigenvectors,
                 provenance=provenance)
    write_matrix(f"{stem}.rowsums", me.embedding.kernel_row_sums,
                 provenance=provenance)
    meta = {
        "eigenvalues": me.embedding.eigenvalues.tolist(),
        "epsilon": me.embedding.epsilon,
        "epsilon_rule": me.embedding.epsilon_rule,
        "box_width": me.box_width,
        "provenance": provenance or {},
    }
    Path(f"{stem}.emb.json").write_text(json.dumps(meta, indent=2),
                                        encoding="utf-8")


def load_moment_embedding(path_stem) -> MomentEmbedding:
    import json
    from pathlib import Path

    from .datastore import read_matrix

    stem = str(path_stem)
    meta = json.loads(Path(f"{stem}.emb.json").read_text(encoding="utf-8"))
    emb = EmbeddingResult(
        eigenvalues=np.array(meta["eigenvalues"]),
        eigenvectors=read_matrix(f"{stem}.evecs"),
        epsilon=float(meta["epsilon"]),
        kernel_row_sums=read_matrix(f"{stem}.rowsums"),
        epsilon_rule=meta["epsilon_rule"],
    )
    return MomentEmbedding(embedding=emb,
                           train_moments=read_matrix(f"{stem}.train"),
                           box_width=float(meta["box_width"]))


def align_times(traj: Trajectory, ref: Trajectory) -> tuple[Trajectory,
                                                            Trajectory]:
    """Truncate two trajectories to their common sampled time range."""
    if not np.isclose(traj.dt_sample, ref.dt_sample, rtol=1e-9):
        raise ConfigError("trajectories have different sampling intervals")
    n = min(traj.n_snapshots, ref.n_snapshots)
    a = Trajectory(traj.values[:n], traj.dt_sample, traj.domain_length,
                   traj.boundary, traj.t0, traj.origin)
    b = Trajectory(ref.values[:n], ref.dt_sample, ref.domain_length,
                   ref.boundary, ref.t0, ref.origin)
    return a, b
