import numpy as np
import pytest

from coarsepde.datastore import ScalarField1D, Trajectory
from coarsepde.errors import BlowUpError, ConfigError
from coarsepde.pdenet import (ARCH_PRESETS, AdamState, Gradients, MlpModel,
                              TrainingSet, adam_step, build_training_pairs,
                              init_mlp, load_mlp, mlp_forward, mlp_gradient,
                              rel_mse, rollout, save_mlp, train_pde_rhs)

TWO_PI = 2.0 * np.pi


def _rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def _zeros_model(n_in=3, hidden=(4,), n_out=1, acts=("relu",)):
    model = init_mlp(n_in, list(hidden), n_out, list(acts), _rng())
    model.weights = [np.zeros_like(w) for w in model.weights]
    model.biases = [np.zeros_like(b) for b in model.biases]
    return model


# --- forward -----------------------------------------------------------------

def test_zero_model_outputs_target_mean():
    model = _zeros_model()
    model.y_mean = np.array([3.25])
    out = mlp_forward(model, np.random.default_rng(0).random((7, 3)))
    assert np.allclose(out, 3.25)


def test_single_linear_layer_identity():
    model = MlpModel(
        layer_sizes=[1, 1],
        weights=[np.array([[2.0]])],
        biases=[np.array([1.0])],
        activations=[],
        x_mean=np.zeros(1), x_scale=np.ones(1),
        y_mean=np.zeros(1), y_scale=np.ones(1),
    )
    x = np.linspace(-2, 2, 9)[:, None]
    assert np.allclose(mlp_forward(model, x), 2.0 * x + 1.0)


def test_forward_dimension_mismatch():
    model = _zeros_model(n_in=3)
    with pytest.raises(ConfigError):
        mlp_forward(model, np.ones((4, 5)))


# --- gradients ---------------------------------------------------------------

def test_zero_residual_zero_gradients():
    model = _zeros_model()
    x = np.random.default_rng(1).random((6, 3))
    y = np.zeros((6, 1))
    grads = mlp_gradient(model, x, y)
    assert grads.loss == 0.0
    assert all(np.all(g == 0.0) for g in grads.weights)
    assert all(np.all(g == 0.0) for g in grads.biases)


@pytest.mark.parametrize("preset", sorted(ARCH_PRESETS))
def test_gradient_matches_central_differences(preset):
    hidden, acts = ARCH_PRESETS[preset]
    n_in = 3 if preset.startswith("burgers") else 8
    n_out = 1 if preset.startswith("burgers") else 2
    hidden = [max(4, h // 16) for h in hidden]  # shrink for speed
    rng = _rng(2)
    model = init_mlp(n_in, hidden, n_out, acts, rng,
                     x_mean=rng.random(n_in), x_scale=1.0 + rng.random(n_in),
                     y_mean=rng.random(n_out),
                     y_scale=1.0 + rng.random(n_out))
    if "relu" in acts:
        # tanh-substitute keeps the loss twice differentiable for the check
        model.activations = ["tanh" if a == "relu" else a for a in acts]
    x = rng.random((12, n_in))
    y = rng.random((12, n_out))
    grads = mlp_gradient(model, x, y)

    def loss_at(params_w, params_b):
        probe = MlpModel(model.layer_sizes, params_w, params_b,
                         model.activations, model.x_mean, model.x_scale,
                         model.y_mean, model.y_scale)
        r = mlp_forward(probe, x) - y
        return 0.5 * float(np.mean(np.sum(r * r, axis=1)))

    h = 1e-6
    for li in range(len(model.weights)):
        flat_idx = [(0, 0), (model.weights[li].shape[0] - 1,
                             model.weights[li].shape[1] - 1)]
        for (i, j) in flat_idx:
            w_plus = [w.copy() for w in model.weights]
            w_minus = [w.copy() for w in model.weights]
            w_plus[li][i, j] += h
            w_minus[li][i, j] -= h
            fd = (loss_at(w_plus, model.biases)
                  - loss_at(w_minus, model.biases)) / (2 * h)
            an = grads.weights[li][i, j]
            assert abs(fd - an) <= 1e-5 * max(1.0, abs(fd))
        b_plus = [b.copy() for b in model.biases]
        b_minus = [b.copy() for b in model.biases]
        b_plus[li][0] += h
        b_minus[li][0] -= h
        fd = (loss_at(model.weights, b_plus)
              - loss_at(model.weights, b_minus)) / (2 * h)
        assert abs(fd - grads.biases[li][0]) <= 1e-5 * max(1.0, abs(fd))


def test_gradient_invariant_under_batch_duplication():
    rng = _rng(3)
    model = init_mlp(3, [8], 1, ["tanh"], rng)
    x = rng.random((5, 3))
    y = rng.random((5, 1))
    g1 = mlp_gradient(model, x, y)
    g2 = mlp_gradient(model, np.vstack([x, x]), np.vstack([y, y]))
    for a, b in zip(g1.weights, g2.weights):
        assert np.allclose(a, b, atol=1e-14)
    assert g1.loss == pytest.approx(g2.loss)


# --- Adam --------------------------------------------------------------------

def test_adam_zero_gradient_no_update():
    model = _zeros_model()
    state = AdamState.for_model(model)
    grads = Gradients(weights=[np.zeros_like(w) for w in model.weights],
                      biases=[np.zeros_like(b) for b in model.biases],
                      loss=0.0)
    new_model, new_state = adam_step(model, grads, state)
    assert all(np.array_equal(a, b) for a, b in
               zip(new_model.weights, model.weights))
    assert new_state.step == 1


def test_adam_first_step_magnitude():
    model = _zeros_model(n_in=2, hidden=(3,), n_out=1)
    state = AdamState.for_model(model, lr=1e-3)
    g = [np.full_like(w, 0.37) for w in model.weights]
    gb = [np.full_like(b, -2.2) for b in model.biases]
    new_model, _ = adam_step(model, Gradients(g, gb, 1.0), state)
    for old, new in zip(model.weights, new_model.weights):
        step = new - old
        assert np.allclose(np.abs(step), 1e-3, rtol=1e-4)
        assert np.all(np.sign(step) == -1.0)
    for old, new in zip(model.biases, new_model.biases):
        assert np.allclose(new - old, 1e-3, rtol=1e-4)


def test_adam_quadratic_bowl_convergence():
    """Loss drops below 1e-6 of its initial value within 1e4 steps."""
    model = MlpModel(
        layer_sizes=[1, 1],
        weights=[np.array([[1.5]])],
        biases=[np.array([-0.7])],
        activations=[],
        x_mean=np.zeros(1), x_scale=np.ones(1),
        y_mean=np.zeros(1), y_scale=np.ones(1),
    )
    x = np.linspace(-1, 1, 16)[:, None]
    y = np.zeros((16, 1))  # optimum: weight 0, bias 0
    state = AdamState.for_model(model, lr=1e-3)
    first = mlp_gradient(model, x, y).loss
    for _ in range(10_000):
        grads = mlp_gradient(model, x, y)
        model, state = adam_step(model, grads, state)
    assert mlp_gradient(model, x, y).loss < 1e-6 * first


# --- training ----------------------------------------------------------------

def test_train_linear_target_exact():
    rng = _rng(4)
    x = rng.random((256, 1))
    y = 3.0 * x - 1.2
    data = TrainingSet(x, y)
    model, history = train_pde_rhs(data, ([], []), epochs=400, lr=1e-2,
                                   batch_size=64, seed=0)
    pred = mlp_forward(model, x)
    assert float(np.mean((pred - y) ** 2)) < 1e-8
    assert history.shape == (400,)


def test_train_preset_shapes():
    rng = _rng(5)
    x = rng.random((64, 3))
    y = rng.random((64, 1))
    model, _ = train_pde_rhs(TrainingSet(x, y), "burgers_32x3_relu",
                             epochs=2, batch_size=16, seed=1)
    assert model.layer_sizes == [3, 32, 32, 32, 1]
    assert model.activations == ["relu", "relu", "linear"]
    x = rng.random((64, 8))
    y = rng.random((64, 2))
    model, _ = train_pde_rhs(TrainingSet(x, y), "cgle_96x4_tanh",
                             epochs=1, batch_size=16, seed=1)
    assert model.layer_sizes == [8, 96, 96, 96, 96, 2]
    assert model.activations == ["tanh"] * 4


def test_train_deterministic_per_seed():
    rng = _rng(6)
    x = rng.random((128, 2))
    y = rng.random((128, 1))
    m1, h1 = train_pde_rhs(TrainingSet(x, y), ([8], ["tanh"]), epochs=3,
                           batch_size=32, seed=9)
    m2, h2 = train_pde_rhs(TrainingSet(x, y), ([8], ["tanh"]), epochs=3,
                           batch_size=32, seed=9)
    assert np.array_equal(h1, h2)
    assert all(np.array_equal(a, b) for a, b in zip(m1.weights, m2.weights))


def test_training_loss_decreases_on_presets():
    """Window-5 running average of the loss is non-increasing within 20%."""
    rng = _rng(7)
    x = rng.random((2048, 3))
    y = (x[:, :1] * x[:, 1:2] + 0.05 * x[:, 2:3] ** 2)
    model, hist = train_pde_rhs(TrainingSet(x, y), "burgers_32x3_relu",
                                epochs=30, batch_size=128, seed=0)
    avg = np.convolve(hist, np.ones(5) / 5.0, mode="valid")
    assert np.all(avg[1:] <= 1.2 * avg[:-1])


# --- training pairs ----------------------------------------------------------

def test_build_training_pairs_sin_derivatives():
    n = 128
    z = (np.arange(n) + 0.5) * (TWO_PI / n)
    rows = np.array([np.sin(z), np.sin(z)])
    traj = Trajectory(rows, dt_sample=0.1, domain_length=TWO_PI,
                      boundary="periodic")
    ts = build_training_pairs(traj, orders=[1, 2], boundary="periodic",
                              stencil_width=9)
    assert ts.features.shape == (n, 3)
    assert np.max(np.abs(ts.features[:, 1] - np.cos(z))) < 1e-8
    assert np.max(np.abs(ts.features[:, 2] + np.sin(z))) < 1e-6
    assert np.max(np.abs(ts.targets)) < 1e-14  # static field


def test_build_training_pairs_constant_field():
    traj = Trajectory(np.full((3, 32), 2.0), dt_sample=0.5,
                      domain_length=1.0, boundary="periodic")
    ts = build_training_pairs(traj, orders=[1, 2], boundary="periodic",
                              stencil_width=3)
    assert np.max(np.abs(ts.features[:, 1:])) < 1e-10
    assert np.max(np.abs(ts.targets)) < 1e-14


def test_build_training_pairs_counts():
    """Eight 2-second trajectories at 0.001 sampling: (2000 - 1) pairs of
    profiles each before the paper's rounding."""
    n_grid = 16
    rows = np.zeros((2000, n_grid))
    traj = Trajectory(rows + 1.0, dt_sample=1e-3, domain_length=TWO_PI,
                      boundary="periodic")
    ts = build_training_pairs(traj, orders=[1], boundary="periodic",
                              stencil_width=3)
    assert ts.features.shape[0] == (2000 - 1) * n_grid
    total = 8 * ts.features.shape[0] / n_grid
    assert total == pytest.approx(8 * 1999)


def test_build_training_pairs_complex_channels():
    n = 32
    x = np.linspace(0, 1, n)
    rows = np.array([x + 1j * (2 * x), x + 1j * (2 * x)])
    traj = Trajectory(rows, dt_sample=0.1, domain_length=1.0,
                      boundary="zero_flux")
    ts = build_training_pairs(traj, orders=[1], boundary="zero_flux",
                              stencil_width=5)
    assert ts.features.shape == (n, 4)  # (re, im) x (u, du)
    assert np.allclose(ts.features[:, 0], x)
    assert np.allclose(ts.features[:, 1], 2 * x)
    assert ts.targets.shape == (n, 2)


def test_build_training_pairs_validation():
    traj = Trajectory(np.ones((1, 16)), dt_sample=0.1, domain_length=1.0,
                      boundary="periodic")
    with pytest.raises(ConfigError):
        build_training_pairs(traj, [1], "periodic", 3)  # too few snapshots
    traj = Trajectory(np.ones((3, 16)), dt_sample=0.1, domain_length=1.0,
                      boundary="periodic")
    with pytest.raises(ConfigError):
        build_training_pairs(traj, [1], "periodic", 4)  # even width


# --- rollout -----------------------------------------------------------------

def _heat_model(nu):
    """Hard-coded RHS = nu * u_xx using the third feature (u, u_x, u_xx)."""
    return MlpModel(
        layer_sizes=[3, 1],
        weights=[np.array([[0.0], [0.0], [nu]])],
        biases=[np.array([0.0])],
        activations=[],
        x_mean=np.zeros(3), x_scale=np.ones(3),
        y_mean=np.zeros(1), y_scale=np.ones(1),
    )


def test_rollout_zero_model_freezes_ic():
    model = _zeros_model(n_in=3, hidden=(), n_out=1, acts=())
    ic = ScalarField1D(np.sin(np.linspace(0, TWO_PI, 64, endpoint=False)),
                       TWO_PI, "periodic")
    traj = rollout(model, ic, "periodic", dt=1e-2, T=0.1, orders=[1, 2],
                   stencil_width=3)
    assert np.allclose(traj.values, traj.values[0], atol=1e-15)


def test_rollout_heat_equation_oracle():
    """nu u_xx on sin(z): amplitude follows exp(-nu t) within 1e-4 at t=1."""
    nu = 0.05
    n = 128
    z = (np.arange(n) + 0.5) * (TWO_PI / n)
    ic = ScalarField1D(np.sin(z), TWO_PI, "periodic")
    traj = rollout(_heat_model(nu), ic, "periodic", dt=1e-3, T=1.0,
                   orders=[1, 2], stencil_width=9, record_every=1000)
    expected = np.exp(-nu) * np.sin(z)
    assert np.max(np.abs(traj.values[-1] - expected)) < 1e-4


def test_rollout_mean_drift_small():
    """Conservative hard-coded RHS: discrete mean drifts < 1e-3 over [0,1]."""
    nu = 0.05
    n = 64
    z = (np.arange(n) + 0.5) * (TWO_PI / n)
    ic = ScalarField1D(1.0 + 0.3 * np.sin(z), TWO_PI, "periodic")
    traj = rollout(_heat_model(nu), ic, "periodic", dt=1e-3, T=1.0,
                   orders=[1, 2], stencil_width=9, record_every=100)
    means = traj.values.mean(axis=1)
    assert np.max(np.abs(means - means[0])) < 1e-3


def test_rollout_blowup_detected():
    grow = MlpModel(
        layer_sizes=[2, 1],
        weights=[np.array([[50.0], [0.0]])],
        biases=[np.array([0.0])],
        activations=[],
        x_mean=np.zeros(2), x_scale=np.ones(2),
        y_mean=np.zeros(1), y_scale=np.ones(1),
    )
    ic = ScalarField1D(np.full(32, 5.0), TWO_PI, "periodic")
    with pytest.raises(BlowUpError):
        rollout(grow, ic, "periodic", dt=0.1, T=50.0, orders=[1],
                stencil_width=3)


def test_rollout_corridor_pins_edges():
    model = _zeros_model(n_in=3, hidden=(), n_out=1, acts=())
    n = 32
    truth_vals = np.linspace(1.0, 2.0, 11)[:, None] * np.ones((1, n))
    truth = Trajectory(truth_vals, dt_sample=0.1, domain_length=1.0,
                       boundary="zero_flux")
    ic = ScalarField1D(truth_vals[0], 1.0, "zero_flux")
    traj = rollout(model, ic, "corridor", dt=0.05, T=1.0, orders=[1, 2],
                   stencil_width=9, truth=truth, corridor_width=4,
                   record_every=2)
    # corridor cells track the linearly interpolated truth, interior frozen
    assert np.allclose(traj.values[-1][:4], 2.0)
    assert np.allclose(traj.values[-1][4:-4], 1.0)
    assert np.allclose(traj.values[-1][-4:], 2.0)


def test_rollout_corridor_needs_coverage():
    model = _zeros_model(n_in=3, hidden=(), n_out=1, acts=())
    truth = Trajectory(np.ones((3, 16)), dt_sample=0.1, domain_length=1.0,
                       boundary="zero_flux")
    ic = ScalarField1D(np.ones(16), 1.0, "zero_flux")
    with pytest.raises(ConfigError):
        rollout(model, ic, "corridor", dt=0.05, T=5.0, orders=[1],
                stencil_width=5, truth=truth)


# --- rel_mse -----------------------------------------------------------------

def test_rel_mse_identical_zero():
    traj = Trajectory(np.random.default_rng(0).random((5, 16)), 0.1, 1.0,
                      "periodic")
    assert rel_mse(traj, traj) == 0.0


def test_rel_mse_doubling_is_one():
    vals = np.random.default_rng(1).random((5, 16)) + 0.5
    ref = Trajectory(vals, 0.1, 1.0, "periodic")
    traj = Trajectory(2 * vals, 0.1, 1.0, "periodic")
    assert rel_mse(traj, ref) == pytest.approx(1.0)


def test_rel_mse_complex_uses_modulus():
    vals = (np.random.default_rng(2).random((4, 8))
            + 1j * np.random.default_rng(3).random((4, 8)))
    ref = Trajectory(vals, 0.1, 1.0, "zero_flux")
    traj = Trajectory(vals + (0.1 + 0.2j), 0.1, 1.0, "zero_flux")
    expected = (0.1 ** 2 + 0.2 ** 2) / np.mean(np.abs(vals) ** 2)
    assert rel_mse(traj, ref) == pytest.approx(expected)


def test_rel_mse_spatial_relabeling_invariance():
    vals = np.random.default_rng(4).random((6, 12))
    ref_vals = np.random.default_rng(5).random((6, 12)) + 1.0
    perm = np.random.default_rng(6).permutation(12)
    a = rel_mse(Trajectory(vals, 0.1, 1.0, "periodic"),
                Trajectory(ref_vals, 0.1, 1.0, "periodic"))
    b = rel_mse(Trajectory(vals[:, perm], 0.1, 1.0, "periodic"),
                Trajectory(ref_vals[:, perm], 0.1, 1.0, "periodic"))
    assert a == pytest.approx(b)


def test_rel_mse_shape_mismatch():
    a = Trajectory(np.ones((3, 8)), 0.1, 1.0, "periodic")
    b = Trajectory(np.ones((4, 8)), 0.1, 1.0, "periodic")
    with pytest.raises(ConfigError):
        rel_mse(a, b)


# --- serialization -----------------------------------------------------------

def test_save_load_roundtrip(tmp_path):
    rng = _rng(8)
    model = init_mlp(3, [8, 8], 1, ["relu", "linear"], rng,
                     x_mean=rng.random(3), x_scale=1 + rng.random(3),
                     y_mean=rng.random(1), y_scale=1 + rng.random(1))
    save_mlp(tmp_path / "model", model)
    back = load_mlp(tmp_path / "model")
    assert back.layer_sizes == model.layer_sizes
    assert back.activations == model.activations
    for a, b in zip(back.weights, model.weights):
        assert np.array_equal(a, b)
    x = rng.random((5, 3))
    assert np.array_equal(mlp_forward(back, x), mlp_forward(model, x))
