"""Interacting-particle simulation of the density-coupled SDE.

Each particle obeys dZ = (1/2) rho(Z, t) dt + sqrt(2 nu) dW on the
periodic domain, where rho is the box-histogram density estimate of the
ensemble itself. Lifting (density -> particles) and restriction
(particles -> density) translate between field and particle descriptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _kernels as kernels
from .datastore import ParticleEnsemble, ScalarField1D, Trajectory
from .errors import ConfigError

TWO_PI = 2.0 * math.pi


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Counter-based (Philox) generator so streams are named and seedable."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class ParticleSimConfig:
    nu: float
    dt: float
    R: float
    seed: int
    T: float
    n_boxes: int = 128
    sample_every: int = 1

    def __post_init__(self):
        if self.nu <= 0 or self.dt <= 0 or self.R <= 0:
            raise ConfigError("nu, dt and R must be positive")
        if self.T < 0:
            raise ConfigError("T must be nonnegative")
        if self.n_boxes < 2 or self.sample_every < 1:
            raise ConfigError("need n_boxes >= 2 and sample_every >= 1")

    @property
    def dt_sample(self) -> float:
        return self.dt * self.sample_every

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def lift_density(field: ScalarField1D, R: float, seed: int) -> ParticleEnsemble:
    """Draw a particle ensemble consistent with a nonnegative density field.

    Per box of width w, places round(rho_i * w * R) particles uniformly in
    that box (round half to even), so the total count is R * integral(rho)
    up to per-box rounding.
    """
    if field.boundary != "periodic":
        raise ConfigError("lifting requires a periodic density field")
    rho = field.values
    neg = np.flatnonzero(rho < 0.0)
    if neg.size:
        raise ConfigError(
            f"density is negative in box {int(neg[0])} "
            f"(value {rho[neg[0]]:g}); cannot lift"
        )
    n_boxes = field.n
    w = field.domain_length / n_boxes
    counts = np.rint(rho * (w * R)).astype(np.int64)
    total = int(counts.sum())
    rng = make_rng(seed)
    u = rng.random(total)
    box = np.repeat(np.arange(n_boxes, dtype=np.float64), counts)
    pos = (box + u) * w
    # Guard the FP edge where (i + u) * w rounds up to the domain length.
    np.minimum(pos, np.nextafter(field.domain_length, 0.0), out=pos)
    return ParticleEnsemble(pos, R=R, domain_length=field.domain_length)


def estimate_density(ensemble: ParticleEnsemble, n_boxes: int) -> ScalarField1D:
    """Box-count density rho_i = n_i / (w R), collocated at box centers."""
    if n_boxes < 2:
        raise ConfigError("need n_boxes >= 2")
    counts = kernels.box_counts(ensemble.positions, n_boxes,
                                ensemble.domain_length)
    w = ensemble.domain_length / n_boxes
    rho = counts * (1.0 / (w * ensemble.R))
    return ScalarField1D(rho, domain_length=ensemble.domain_length,
                         boundary="periodic")


def step_euler_maruyama(ensemble: ParticleEnsemble, dt: float, nu: float,
                        n_boxes: int,
                        rng: np.random.Generator) -> ParticleEnsemble:
    """Advance every particle one step; the drift density is refreshed
    from the ensemble at step start (the particle itself included)."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    w = ensemble.domain_length / n_boxes
    inv_wr = 1.0 / (w * ensemble.R)
    sigma = math.sqrt(2.0 * nu * dt)
    noise = sigma * rng.standard_normal(ensemble.count)
    pos = kernels.em_step(ensemble.positions, noise, dt, n_boxes,
                          ensemble.domain_length, inv_wr)
    return ParticleEnsemble(pos, R=ensemble.R,
                            domain_length=ensemble.domain_length)


def iter_particle_snapshots(
    ic: ScalarField1D, cfg: ParticleSimConfig
) -> Iterator[tuple[float, ParticleEnsemble]]:
    """Yield (time, ensemble) at every sampling instant of a simulation.

    The ensemble evolves in between yields; consumers may keep references
    (ensembles are immutable). Deterministic given cfg.seed.
    """
    seq = np.random.SeedSequence(cfg.seed)
    lift_seed, dyn_seed = seq.spawn(2)
    ens = lift_density(ic, cfg.R, lift_seed)
    rng = make_rng(dyn_seed)
    yield 0.0, ens
    for step in range(1, cfg.n_steps + 1):
        ens = step_euler_maruyama(ens, cfg.dt, cfg.nu, cfg.n_boxes, rng)
        if step % cfg.sample_every == 0:
            yield step * cfg.dt, ens


def simulate_particles(
    ic: ScalarField1D, cfg: ParticleSimConfig
) -> tuple[Trajectory, ParticleEnsemble]:
    """Lift, evolve to T, record density snapshots every sample_every steps."""
    rows = []
    last = None
    for _, ens in iter_particle_snapshots(ic, cfg):
        rows.append(estimate_density(ens, cfg.n_boxes).values)
        last = ens
    traj = Trajectory(
        values=np.array(rows),
        dt_sample=cfg.dt_sample,
        domain_length=ic.domain_length,
        boundary="periodic",
    )
    return traj, last
