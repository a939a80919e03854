"""Emergent space recovery from scrambled agent time series.

Agents are grid points whose spatial labels have been deliberately
scrambled; treating each agent's time series as a data point, Diffusion
Maps recovers a single coordinate that orders the agents, and the fields
are resampled onto a uniform grid in that coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.spatial.distance import pdist, squareform
from scipy.stats import kendalltau, spearmanr

from .datastore import Trajectory
from .errors import ConfigError
from .manifold import diffusion_maps, select_independent_coords
from .particles import make_rng


@dataclass(frozen=True)
class AgentBundle:
    """Per-agent time series, (n_agents, n_times, 2) real channels.

    ``permutation[j]`` is the original grid index of bundle row j; it is
    ground truth retained for verification only and is never read by the
    recovery pipeline.
    """

    series: np.ndarray
    dt_sample: float
    permutation: np.ndarray | None = None

    def __post_init__(self):
        s = np.ascontiguousarray(self.series, dtype=np.float64)
        s.setflags(write=False)
        object.__setattr__(self, "series", s)
        if s.ndim != 3 or s.shape[2] != 2:
            raise ConfigError("series must have shape (agents, times, 2)")
        if s.shape[0] < 8:
            raise ConfigError("need at least 8 agents")
        if not np.isfinite(s).all():
            raise ConfigError("series contain non-finite values")
        if self.dt_sample <= 0:
            raise ConfigError("dt_sample must be positive")

    @property
    def n_agents(self) -> int:
        return self.series.shape[0]

    @property
    def n_times(self) -> int:
        return self.series.shape[1]


@dataclass(frozen=True)
class EmergentChart:
    """The recovered agent coordinate and the ordering it induces."""

    phi1: np.ndarray
    rescaled_phi: np.ndarray  # affine image of phi1 with range [-1, 1]
    agent_order: np.ndarray   # bundle rows sorted by phi1

    def __post_init__(self):
        if not (self.phi1.shape == self.rescaled_phi.shape
                == self.agent_order.shape):
            raise ConfigError("chart fields must have matching lengths")
        lo, hi = self.rescaled_phi.min(), self.rescaled_phi.max()
        if not (np.isclose(lo, -1.0) and np.isclose(hi, 1.0)):
            raise ConfigError("rescaled_phi must span [-1, 1]")
        if sorted(self.agent_order.tolist()) != list(range(self.phi1.size)):
            raise ConfigError("agent_order must be a permutation")


def scramble(traj: Trajectory, seed: int) -> AgentBundle:
    """Randomly permute the agent (grid) axis of a complex trajectory."""
    if not traj.is_complex:
        raise ConfigError("scramble expects a complex trajectory")
    rng = make_rng(seed)
    perm = rng.permutation(traj.n_grid)
    values = traj.values[:, perm]  # (times, agents) -> permuted agents
    series = np.stack([values.T.real, values.T.imag], axis=-1)
    return AgentBundle(series=series, dt_sample=traj.dt_sample,
                       permutation=perm)


def unscramble(bundle: AgentBundle, domain_length: float,
               boundary: str = "zero_flux", t0: float = 0.0) -> Trajectory:
    """Invert a scramble using the stored permutation (verification only)."""
    if bundle.permutation is None:
        raise ConfigError("bundle carries no ground-truth permutation")
    inv = np.empty_like(bundle.permutation)
    inv[bundle.permutation] = np.arange(bundle.n_agents)
    w = bundle.series[..., 0] + 1j * bundle.series[..., 1]
    return Trajectory(values=w[inv].T.copy(), dt_sample=bundle.dt_sample,
                      domain_length=domain_length, boundary=boundary, t0=t0)


def timeseries_distance_matrix(bundle: AgentBundle,
                               subsample_every: int = 10) -> np.ndarray:
    """Euclidean distances between agents' (re, im) time series after
    temporal subsampling.

    Subsampled distances are rescaled by sqrt(subsample_every) so they
    estimate the full-resolution series distance: the value (and hence
    the median-based kernel width downstream) is then independent of the
    sampling rate, which makes the recovered ordering invariant under
    subsampling.
    """
    if subsample_every < 1:
        raise ConfigError("subsample_every must be >= 1")
    sub = bundle.series[:, ::subsample_every, :]
    if sub.shape[1] < 2:
        raise ConfigError("subsampled series are too short")
    flat = sub.reshape(bundle.n_agents, -1)
    return np.sqrt(subsample_every) * squareform(
        pdist(flat, metric="euclidean"))


def build_emergent_chart(bundle: AgentBundle, subsample_every: int = 10,
                         epsilon_rule="median", m: int = 4,
                         r_threshold: float = 0.5) -> EmergentChart:
    """Run Diffusion Maps on time-series distances and chart the agents.

    Raises when more than one independent coordinate is detected among
    the m leading nontrivial eigenvectors: the data then do not embed in
    one dimension under the current settings. The sign of phi1 is
    normalized so agent 0 gets a negative value.
    """
    dists = timeseries_distance_matrix(bundle, subsample_every)
    emb = diffusion_maps(dists, epsilon_rule=epsilon_rule, m=m)
    independent = select_independent_coords(emb, r_threshold=r_threshold)
    if independent != [1]:
        raise ConfigError(
            f"expected a single independent coordinate, found eigenvector "
            f"indices {independent}"
        )
    phi1 = emb.eigenvectors[:, 1].copy()
    if phi1[0] > 0:
        phi1 = -phi1
    lo, hi = phi1.min(), phi1.max()
    if hi - lo <= 0:
        raise ConfigError("phi1 is degenerate (all agents identical?)")
    rescaled = 2.0 * (phi1 - lo) / (hi - lo) - 1.0
    return EmergentChart(
        phi1=phi1,
        rescaled_phi=rescaled,
        agent_order=np.argsort(phi1, kind="stable"),
    )


def resample_on_phi(bundle: AgentBundle, chart: EmergentChart,
                    n_grid: int = 128) -> Trajectory:
    """Cubic-spline resampling of the fields onto a uniform phi grid.

    Agents are sorted by phi1 and a not-a-knot cubic spline is fitted
    along phi for both channels over all times (the data are gridded in
    time, so the tensor-product spline restricted to the sample times
    reduces to these per-time splines). The output grid is the inclusive
    uniform grid on [-1, 1].
    """
    if n_grid < 8:
        raise ConfigError("need n_grid >= 8")
    order = chart.agent_order
    phi_sorted = chart.rescaled_phi[order]
    if np.min(np.diff(phi_sorted)) < 1e-12:
        raise ConfigError("duplicate phi1 values; cannot resample")
    w = bundle.series[..., 0] + 1j * bundle.series[..., 1]
    spline = make_interp_spline(phi_sorted, w[order], k=3, axis=0)
    phi_grid = np.linspace(-1.0, 1.0, n_grid)
    resampled = spline(phi_grid)
    return Trajectory(
        values=resampled.T.copy(),
        dt_sample=bundle.dt_sample,
        domain_length=2.0,
        boundary="zero_flux",
        origin=-1.0,
        grid_spacing=2.0 / (n_grid - 1),
    )


def verify_ordering(chart: EmergentChart,
                    true_positions: np.ndarray) -> dict:
    """Rank correlations between phi1 and the true agent positions."""
    x = np.asarray(true_positions, dtype=np.float64)
    if x.shape != chart.phi1.shape:
        raise ConfigError("true positions do not match the chart size")
    rho = float(spearmanr(chart.phi1, x).statistic)
    tau = float(kendalltau(chart.phi1, x).statistic)
    return {"spearman": rho, "kendall": tau, "flipped": bool(rho < 0)}
