import struct

import numpy as np
import pytest

from coarsepde.datastore import (ComplexField1D, DatasetManifest,
                                 ParticleEnsemble, ScalarField1D, Trajectory,
                                 read_dataset, read_ensemble, read_trajectory,
                                 write_dataset, write_ensemble,
                                 write_trajectory)
from coarsepde.errors import ConfigError, DataFormatError

TWO_PI = 2.0 * np.pi


def test_write_matrix_row_major(tmp_path):
    stem = tmp_path / "m"
    payload = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    write_dataset(stem, DatasetManifest(kind="matrix", shape=[2, 3]), payload)
    raw = (tmp_path / "m.bin").read_bytes()
    assert len(raw) == 48
    assert struct.unpack("<d", raw[:8])[0] == 1.0
    assert struct.unpack("<d", raw[8:16])[0] == 2.0


def test_write_empty_payload(tmp_path):
    stem = tmp_path / "empty"
    write_dataset(stem, DatasetManifest(kind="matrix", shape=[0]),
                  np.zeros(0))
    assert (tmp_path / "empty.bin").read_bytes() == b""
    manifest, data = read_dataset(stem)
    assert manifest.shape == [0]
    assert data.size == 0


def test_roundtrip_bit_identical(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.standard_normal((2000, 128))
    traj = Trajectory(values, dt_sample=1e-3, domain_length=TWO_PI,
                      boundary="periodic")
    stem = tmp_path / "traj"
    write_trajectory(stem, traj, seed=0)
    back = read_trajectory(stem)
    assert np.array_equal(back.values, traj.values)
    # re-serializing produces identical bytes
    stem2 = tmp_path / "traj2"
    write_trajectory(stem2, back, seed=0)
    assert (tmp_path / "traj.bin").read_bytes() == \
        (tmp_path / "traj2.bin").read_bytes()


def test_read_is_inverse(tmp_path):
    stem = tmp_path / "m"
    payload = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    write_dataset(stem, DatasetManifest(kind="matrix", shape=[2, 3]), payload)
    _, back = read_dataset(stem)
    assert np.array_equal(back, payload)


def test_truncated_bin_rejected(tmp_path):
    stem = tmp_path / "m"
    write_dataset(stem, DatasetManifest(kind="matrix", shape=[2, 3]),
                  np.ones((2, 3)))
    raw = (tmp_path / "m.bin").read_bytes()
    (tmp_path / "m.bin").write_bytes(raw[:-8])
    with pytest.raises(DataFormatError, match="floats"):
        read_dataset(stem)


def test_complex_odd_float_count_rejected(tmp_path):
    stem = tmp_path / "c"
    values = np.arange(6, dtype=np.complex128).reshape(2, 3) + 1j
    write_dataset(stem, DatasetManifest(kind="complex_traj", shape=[2, 3],
                                        dt_sample=0.1, domain_length=1.0,
                                        boundary="zero_flux"), values)
    raw = (tmp_path / "c.bin").read_bytes()
    (tmp_path / "c.bin").write_bytes(raw[:-8])  # 11 floats
    with pytest.raises(DataFormatError, match="odd float count"):
        read_dataset(stem)


def test_complex_roundtrip_interleaved(tmp_path):
    stem = tmp_path / "c"
    values = np.array([[1 + 2j, 3 + 4j, 5 + 6j]], dtype=np.complex128)
    write_dataset(stem, DatasetManifest(kind="complex_traj", shape=[1, 3],
                                        dt_sample=0.1, domain_length=1.0,
                                        boundary="zero_flux"), values)
    raw = (tmp_path / "c.bin").read_bytes()
    assert len(raw) == 8 * 6  # 2 floats per grid point
    first_two = struct.unpack("<2d", raw[:16])
    assert first_two == (1.0, 2.0)
    _, back = read_dataset(stem)
    assert np.array_equal(back, values)


def test_shape_mismatch_rejected_before_write(tmp_path):
    stem = tmp_path / "bad"
    with pytest.raises(ConfigError):
        write_dataset(stem, DatasetManifest(kind="matrix", shape=[2, 2]),
                      np.ones((2, 3)))
    assert not (tmp_path / "bad.json").exists()
    assert not (tmp_path / "bad.bin").exists()


def test_nonfinite_rejected(tmp_path):
    stem = tmp_path / "nf"
    with pytest.raises(ConfigError):
        write_dataset(stem, DatasetManifest(kind="matrix", shape=[3]),
                      np.array([1.0, np.nan, 2.0]))


def test_missing_file_rejected(tmp_path):
    with pytest.raises(DataFormatError, match="missing"):
        read_dataset(tmp_path / "nope")


def test_ensemble_roundtrip(tmp_path):
    ens = ParticleEnsemble(np.array([0.1, 0.5, 3.0]), R=100.0,
                           domain_length=TWO_PI)
    stem = tmp_path / "ens"
    write_ensemble(stem, ens, seed=7)
    back = read_ensemble(stem)
    assert np.array_equal(back.positions, ens.positions)
    assert back.R == ens.R


def test_field_invariants():
    with pytest.raises(ConfigError):
        ScalarField1D(np.array([1.0, 2.0]), domain_length=1.0)  # too short
    with pytest.raises(ConfigError):
        ScalarField1D(np.array([1.0, np.inf, 2.0]), domain_length=1.0)
    with pytest.raises(ConfigError):
        ScalarField1D(np.ones(4), domain_length=-1.0)
    with pytest.raises(ConfigError):
        ComplexField1D(np.ones(4, dtype=complex), domain_length=1.0,
                       boundary="weird")


def test_ensemble_invariants():
    with pytest.raises(ConfigError):
        ParticleEnsemble(np.array([0.0, TWO_PI]), R=1.0,
                         domain_length=TWO_PI)  # out of range
    with pytest.raises(ConfigError):
        ParticleEnsemble(np.array([0.0, 1.0]), R=-1.0, domain_length=TWO_PI)


def test_trajectory_uniform_times():
    traj = Trajectory(np.zeros((4, 8)), dt_sample=0.5, domain_length=1.0,
                      boundary="periodic", t0=1.0)
    assert np.allclose(np.diff(traj.times()), 0.5)
    assert traj.times()[0] == 1.0


def test_manifest_validation():
    with pytest.raises(ConfigError):
        DatasetManifest(kind="unknown", shape=[1])
    with pytest.raises(ConfigError):
        DatasetManifest(kind="matrix", shape=[-1])
