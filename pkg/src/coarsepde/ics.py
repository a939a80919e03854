"""Initial-condition builders used by the CLI and the test pipelines."""

from __future__ import annotations

import math

import numpy as np

from .datastore import ComplexField1D, ScalarField1D
from .particles import TWO_PI, make_rng

EQ14_OFFSET = 2.0
EQ14_FLOOR = 1e-3


def burgers_two_hump_ic(n: int = 128) -> ScalarField1D:
    """rho_0(z) = 1 - cos(2 z) / 2 on the periodic domain [0, 2 pi)."""
    z = (np.arange(n) + 0.5) * (TWO_PI / n)
    return ScalarField1D(1.0 - np.cos(2.0 * z) / 2.0, domain_length=TWO_PI,
                         boundary="periodic")


def random_sine_ic(n: int, seed: int, n_terms: int = 20,
                   offset: float = EQ14_OFFSET,
                   floor: float = EQ14_FLOOR) -> ScalarField1D:
    """Random superposition of sines: amplitudes U[-1/2, 1/2], integer
    wavenumbers U{1..6}, phases U[0, 2 pi).

    The raw sum has zero mean and can go negative; densities must not, so
    an offset is added and the result clipped from below. Both constants
    are recorded by callers in dataset provenance.
    """
    rng = make_rng(seed)
    amps = rng.uniform(-0.5, 0.5, n_terms)
    wavenums = rng.integers(1, 7, n_terms)
    phases = rng.uniform(0.0, TWO_PI, n_terms)
    z = (np.arange(n) + 0.5) * (TWO_PI / n)
    rho = offset + np.sum(
        amps[:, None] * np.sin(wavenums[:, None] * z[None, :]
                               + phases[:, None]),
        axis=0,
    )
    return ScalarField1D(np.maximum(rho, floor), domain_length=TWO_PI,
                         boundary="periodic")


def constant_ic(n: int, value: float,
                domain_length: float = TWO_PI) -> ScalarField1D:
    return ScalarField1D(np.full(n, float(value)), domain_length=domain_length,
                         boundary="periodic")


def cgle_paper_ic(n: int = 128, length: float = 200.0) -> ComplexField1D:
    """W(x, 0) = (1 + cos(x pi / L)) / 2, zero-flux compatible."""
    x = (np.arange(n) + 0.5) * (length / n)
    w = (1.0 + np.cos(x * math.pi / length)) / 2.0
    return ComplexField1D(w.astype(np.complex128), domain_length=length,
                          boundary="zero_flux")


def cgle_perturbed_ic(n: int, length: float, seed: int,
                      amplitude: float = 0.1,
                      max_mode: int = 8) -> ComplexField1D:
    """Paper IC plus a seeded band-limited cosine perturbation.

    Perturbing with low cosine modes keeps the field zero-flux compatible;
    the transients then approach the limit cycle from varied directions.
    """
    rng = make_rng(seed)
    x = (np.arange(n) + 0.5) * (length / n)
    base = (1.0 + np.cos(x * math.pi / length)) / 2.0
    delta = np.zeros(n, dtype=np.complex128)
    for m in range(1, max_mode + 1):
        c = rng.uniform(-1.0, 1.0) + 1j * rng.uniform(-1.0, 1.0)
        delta += c * np.cos(math.pi * m * x / length)
    delta *= amplitude / max_mode
    return ComplexField1D(base + delta, domain_length=length,
                          boundary="zero_flux")
