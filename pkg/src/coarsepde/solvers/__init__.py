"""Ground-truth integrators: finite-volume Burgers and spectral CGLE."""

from .burgers import BurgersConfig, cfl_dt_max, simulate_burgers_fv
from .cgle import CgleConfig, paper_config, simulate_cgle
from .etdrk import EtdrkCoefficients, EtdrkStepper, etdrk_coefficients

__all__ = [
    "BurgersConfig",
    "CgleConfig",
    "EtdrkCoefficients",
    "EtdrkStepper",
    "cfl_dt_max",
    "etdrk_coefficients",
    "paper_config",
    "simulate_burgers_fv",
    "simulate_cgle",
]
