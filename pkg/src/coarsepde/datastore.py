"""Core data types and the on-disk dataset container.

A dataset is a pair of files sharing a path stem: ``<stem>.json`` holds a
:class:`DatasetManifest`, ``<stem>.bin`` holds the payload as raw
little-endian IEEE-754 float64 in row-major order. Complex payloads are
interleaved (re, im) per grid point, so a complex trajectory remains one
contiguous payload.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError

BOUNDARIES = ("periodic", "zero_flux")
DATASET_KINDS = ("scalar_traj", "complex_traj", "ensemble", "matrix")


def _require_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise ConfigError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class ScalarField1D:
    """Real grid values on a 1-D domain. Values are immutable after creation.

    The default grid is cell-centered with spacing domain_length / n;
    node-centered grids (e.g. inclusive resampling grids) override it via
    ``grid_spacing``.
    """

    values: np.ndarray
    domain_length: float
    boundary: str = "periodic"
    origin: float = 0.0
    grid_spacing: float | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size < 3:
            raise ConfigError("field needs a 1-D grid with at least 3 points")
        _require_finite(v, "field values")
        if self.domain_length <= 0:
            raise ConfigError("domain_length must be positive")
        if self.grid_spacing is not None and self.grid_spacing <= 0:
            raise ConfigError("grid_spacing must be positive")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"unknown boundary {self.boundary!r}")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        if self.grid_spacing is not None:
            return self.grid_spacing
        return self.domain_length / self.n

    def grid(self) -> np.ndarray:
        if self.grid_spacing is not None:
            return self.origin + np.arange(self.n) * self.grid_spacing
        return self.origin + (np.arange(self.n) + 0.5) * self.dx


@dataclass(frozen=True)
class ComplexField1D:
    """Complex grid values on a 1-D domain, stored as a complex128 vector."""

    values: np.ndarray
    domain_length: float
    boundary: str = "zero_flux"
    origin: float = 0.0
    grid_spacing: float | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size < 3:
            raise ConfigError("field needs a 1-D grid with at least 3 points")
        if not (np.isfinite(v.real).all() and np.isfinite(v.imag).all()):
            raise ConfigError("field values contain non-finite entries")
        if self.domain_length <= 0:
            raise ConfigError("domain_length must be positive")
        if self.grid_spacing is not None and self.grid_spacing <= 0:
            raise ConfigError("grid_spacing must be positive")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"unknown boundary {self.boundary!r}")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        if self.grid_spacing is not None:
            return self.grid_spacing
        return self.domain_length / self.n

    def grid(self) -> np.ndarray:
        if self.grid_spacing is not None:
            return self.origin + np.arange(self.n) * self.grid_spacing
        return self.origin + (np.arange(self.n) + 0.5) * self.dx


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered snapshots on a shared grid with uniform sampling.

    ``values`` has shape (n_snapshots, n_grid); dtype float64 or complex128.
    """

    values: np.ndarray
    dt_sample: float
    domain_length: float
    boundary: str
    t0: float = 0.0
    origin: float = 0.0
    grid_spacing: float | None = None

    def __post_init__(self):
        dtype = np.complex128 if np.iscomplexobj(self.values) else np.float64
        v = np.ascontiguousarray(self.values, dtype=dtype)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 3:
            raise ConfigError("trajectory needs shape (n_snapshots, n_grid>=3)")
        if np.iscomplexobj(v):
            ok = np.isfinite(v.real).all() and np.isfinite(v.imag).all()
        else:
            ok = np.isfinite(v).all()
        if not ok:
            raise ConfigError("trajectory contains non-finite values")
        if self.dt_sample <= 0:
            raise ConfigError("dt_sample must be positive")
        if self.grid_spacing is not None and self.grid_spacing <= 0:
            raise ConfigError("grid_spacing must be positive")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"unknown boundary {self.boundary!r}")

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    @property
    def n_snapshots(self) -> int:
        return self.values.shape[0]

    @property
    def n_grid(self) -> int:
        return self.values.shape[1]

    @property
    def dx(self) -> float:
        if self.grid_spacing is not None:
            return self.grid_spacing
        return self.domain_length / self.n_grid

    def times(self) -> np.ndarray:
        return self.t0 + self.dt_sample * np.arange(self.n_snapshots)

    def snapshot(self, i: int):
        cls = ComplexField1D if self.is_complex else ScalarField1D
        return cls(self.values[i], self.domain_length, self.boundary,
                   self.origin, self.grid_spacing)

    def snapshots(self) -> list:
        return [self.snapshot(i) for i in range(self.n_snapshots)]


@dataclass(frozen=True)
class ParticleEnsemble:
    """Particle positions plus the resolution factor (particles per unit mass)."""

    positions: np.ndarray
    R: float
    domain_length: float

    def __post_init__(self):
        p = np.ascontiguousarray(self.positions, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "positions", p)
        if p.ndim != 1:
            raise ConfigError("positions must be a 1-D vector")
        _require_finite(p, "positions")
        if p.size and (p.min() < 0.0 or p.max() >= self.domain_length):
            raise ConfigError("positions must lie in [0, domain_length)")
        if self.R <= 0 or self.domain_length <= 0:
            raise ConfigError("R and domain_length must be positive")

    @property
    def count(self) -> int:
        return self.positions.size


@dataclass
class DatasetManifest:
    """JSON-serializable description of a binary payload."""

    kind: str
    shape: list[int]
    dt_sample: float | None = None
    domain_length: float | None = None
    boundary: str | None = None
    seed: int | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        self.shape = [int(s) for s in self.shape]
        if any(s < 0 for s in self.shape):
            raise ConfigError("shape entries must be nonnegative")

    @property
    def n_elements(self) -> int:
        """Logical element count (complex elements count once)."""
        return math.prod(self.shape)

    @property
    def n_floats(self) -> int:
        """Number of float64 values in the .bin payload."""
        return self.n_elements * (2 if self.kind == "complex_traj" else 1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "shape": self.shape,
                "dt_sample": self.dt_sample,
                "domain_length": self.domain_length,
                "boundary": self.boundary,
                "seed": self.seed,
                "provenance": self.provenance,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"manifest is not valid JSON: {exc}") from exc
        try:
            return cls(
                kind=raw["kind"],
                shape=raw["shape"],
                dt_sample=raw.get("dt_sample"),
                domain_length=raw.get("domain_length"),
                boundary=raw.get("boundary"),
                seed=raw.get("seed"),
                provenance=raw.get("provenance", {}),
            )
        except KeyError as exc:
            raise DataFormatError(f"manifest missing field {exc}") from exc


def write_dataset(path_stem: str | Path, manifest: DatasetManifest,
                  payload: np.ndarray) -> None:
    """Write ``<stem>.json`` + ``<stem>.bin``.

    Complex payloads must be complex128 arrays of the manifest's logical
    shape; they are stored interleaved (re, im). Everything is validated
    before anything is written.
    """
    stem = Path(path_stem)
    payload = np.asarray(payload)
    if manifest.kind == "complex_traj":
        payload = np.ascontiguousarray(payload, dtype=np.complex128)
        flat = payload.view(np.float64).ravel()
    else:
        if np.iscomplexobj(payload):
            raise ConfigError(f"kind {manifest.kind!r} takes a real payload")
        payload = np.ascontiguousarray(payload, dtype=np.float64)
        flat = payload.ravel()
    if list(payload.shape) != manifest.shape:
        raise ConfigError(
            f"payload shape {list(payload.shape)} does not match manifest "
            f"shape {manifest.shape}"
        )
    _require_finite(flat, "payload")

    stem.parent.mkdir(parents=True, exist_ok=True)
    # append suffixes rather than Path.with_suffix: stems may contain dots
    Path(f"{stem}.json").write_text(manifest.to_json() + "\n",
                                    encoding="utf-8")
    with open(f"{stem}.bin", "wb") as fh:
        fh.write(flat.astype("<f8", copy=False).tobytes())


def read_dataset(path_stem: str | Path) -> tuple[DatasetManifest, np.ndarray]:
    """Exact inverse of :func:`write_dataset`."""
    stem = Path(path_stem)
    json_path = Path(f"{stem}.json")
    bin_path = Path(f"{stem}.bin")
    for p in (json_path, bin_path):
        if not p.exists():
            raise DataFormatError(f"missing dataset file {p}")
    manifest = DatasetManifest.from_json(json_path.read_text(encoding="utf-8"))
    raw = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
    if raw.size != manifest.n_floats:
        if manifest.kind == "complex_traj" and raw.size % 2 == 1:
            raise DataFormatError(
                f"{bin_path}: complex payload has odd float count {raw.size}"
            )
        raise DataFormatError(
            f"{bin_path}: payload has {raw.size} floats, manifest expects "
            f"{manifest.n_floats}"
        )
    if not np.isfinite(raw).all():
        raise DataFormatError(f"{bin_path}: payload contains non-finite values")
    if manifest.kind == "complex_traj":
        data = raw.view(np.complex128).reshape(manifest.shape).copy()
    else:
        data = raw.reshape(manifest.shape).copy()
    return manifest, data


def trajectory_manifest(traj: Trajectory, seed: int | None = None,
                        provenance: dict | None = None) -> DatasetManifest:
    return DatasetManifest(
        kind="complex_traj" if traj.is_complex else "scalar_traj",
        shape=list(traj.values.shape),
        dt_sample=traj.dt_sample,
        domain_length=traj.domain_length,
        boundary=traj.boundary,
        seed=seed,
        provenance={"t0": traj.t0, "origin": traj.origin,
                    "grid_spacing": traj.grid_spacing,
                    **(provenance or {})},
    )


def write_trajectory(path_stem: str | Path, traj: Trajectory,
                     seed: int | None = None,
                     provenance: dict | None = None) -> None:
    write_dataset(path_stem, trajectory_manifest(traj, seed, provenance),
                  traj.values)


def read_trajectory(path_stem: str | Path) -> Trajectory:
    manifest, data = read_dataset(path_stem)
    if manifest.kind not in ("scalar_traj", "complex_traj"):
        raise DataFormatError(f"{path_stem} is not a trajectory dataset")
    gs = manifest.provenance.get("grid_spacing")
    return Trajectory(
        values=data,
        dt_sample=manifest.dt_sample,
        domain_length=manifest.domain_length,
        boundary=manifest.boundary,
        t0=float(manifest.provenance.get("t0", 0.0)),
        origin=float(manifest.provenance.get("origin", 0.0)),
        grid_spacing=None if gs is None else float(gs),
    )


def write_ensemble(path_stem: str | Path, ens: ParticleEnsemble,
                   seed: int | None = None,
                   provenance: dict | None = None) -> None:
    manifest = DatasetManifest(
        kind="ensemble",
        shape=[ens.count],
        domain_length=ens.domain_length,
        seed=seed,
        provenance={"R": ens.R, **(provenance or {})},
    )
    write_dataset(path_stem, manifest, ens.positions)


def read_ensemble(path_stem: str | Path) -> ParticleEnsemble:
    manifest, data = read_dataset(path_stem)
    if manifest.kind != "ensemble":
        raise DataFormatError(f"{path_stem} is not an ensemble dataset")
    try:
        r = float(manifest.provenance["R"])
    except KeyError as exc:
        raise DataFormatError("ensemble manifest lacks provenance.R") from exc
    return ParticleEnsemble(positions=data, R=r,
                            domain_length=manifest.domain_length)


def write_matrix(path_stem: str | Path, values: np.ndarray,
                 seed: int | None = None,
                 provenance: dict | None = None) -> None:
    manifest = DatasetManifest(
        kind="matrix", shape=list(np.asarray(values).shape), seed=seed,
        provenance=provenance or {},
    )
    write_dataset(path_stem, manifest, values)


def read_matrix(path_stem: str | Path) -> np.ndarray:
    manifest, data = read_dataset(path_stem)
    if manifest.kind != "matrix":
        raise DataFormatError(f"{path_stem} is not a matrix dataset")
    return data
