"""Feedforward regression of PDE right-hand sides and learned-PDE rollout.

The model maps per-point derivative features (u, u_x, u_xx, ...) to the
time derivative u_t; complex fields are handled as two real channels.
Everything is plain numpy: exact reverse-mode gradients, Adam updates,
forward-Euler integration of the learned dynamics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datastore import (ComplexField1D, DatasetManifest, ScalarField1D,
                        Trajectory, read_dataset, write_dataset)
from .errors import BlowUpError, ConfigError, TrainingDivergedError
from .stencils import differentiate

ACTIVATIONS = ("relu", "tanh", "linear")
ROLLOUT_BLOWUP_LIMIT = 1e6

ARCH_PRESETS = {
    "burgers_32x3_relu": ([32, 32, 32], ["relu", "relu", "linear"]),
    "cgle_96x4_tanh": ([96, 96, 96, 96], ["tanh", "tanh", "tanh", "tanh"]),
}


@dataclass
class MlpModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray
    y_scale: np.ndarray

    def __post_init__(self):
        n_layers = len(self.layer_sizes) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ConfigError("weights/biases do not match layer_sizes")
        if len(self.activations) != n_layers - 1:
            raise ConfigError("need one activation per hidden layer")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {act!r}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_sizes[i], self.layer_sizes[i + 1]):
                raise ConfigError(f"weight {i} has shape {w.shape}")
            if b.shape != (self.layer_sizes[i + 1],):
                raise ConfigError(f"bias {i} has shape {b.shape}")
        if np.any(self.x_scale <= 0) or np.any(self.y_scale <= 0):
            raise ConfigError("normalization scales must be positive")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]


def init_mlp(n_in: int, hidden: list[int], n_out: int, activations: list[str],
             rng: np.random.Generator,
             x_mean=None, x_scale=None, y_mean=None, y_scale=None) -> MlpModel:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases."""
    sizes = [n_in, *hidden, n_out]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, fan_out))
    def _default(v, size, val):
        if v is None:
            return np.full(size, val, dtype=np.float64)
        return np.asarray(v, dtype=np.float64)
    return MlpModel(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        activations=list(activations),
        x_mean=_default(x_mean, n_in, 0.0),
        x_scale=_default(x_scale, n_in, 1.0),
        y_mean=_default(y_mean, n_out, 0.0),
        y_scale=_default(y_scale, n_out, 1.0),
    )


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activate_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def _forward_cached(model: MlpModel, x: np.ndarray):
    h = (x - model.x_mean) / model.x_scale
    pre, post = [], [h]
    n_layers = len(model.weights)
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        pre.append(z)
        h = _activate(z, model.activations[i]) if i < n_layers - 1 else z
        post.append(h)
    out = model.y_mean + model.y_scale * h
    return out, pre, post


def mlp_forward(model: MlpModel, features: np.ndarray) -> np.ndarray:
    """Affine-activation chain; inputs are standardized by the stored
    normalization, outputs de-standardized."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if x.shape[1] != model.n_inputs:
        raise ConfigError(
            f"feature dim {x.shape[1]} does not match input layer "
            f"{model.n_inputs}"
        )
    out, _, _ = _forward_cached(model, x)
    return out


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss: float


def mlp_gradient(model: MlpModel, features: np.ndarray,
                 targets: np.ndarray) -> Gradients:
    """Exact reverse-mode gradients of 0.5 * mean ||pred - target||^2."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if x.shape[0] == 0:
        raise ConfigError("batch must be nonempty")
    n_batch = x.shape[0]
    out, pre, post = _forward_cached(model, x)
    resid = out - y
    loss = 0.5 * float(np.mean(np.sum(resid * resid, axis=1)))
    delta = (resid / n_batch) * model.y_scale
    n_layers = len(model.weights)
    grads_w = [None] * n_layers
    grads_b = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        grads_w[i] = post[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ model.weights[i].T
            delta = delta * _activate_grad(pre[i - 1], post[i],
                                           model.activations[i - 1])
    return Gradients(weights=grads_w, biases=grads_b, loss=loss)


@dataclass
class AdamState:
    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    @classmethod
    def for_model(cls, model: MlpModel, lr: float = 1e-3, beta1: float = 0.9,
                  beta2: float = 0.999, eps_adam: float = 1e-8) -> "AdamState":
        return cls(
            m_weights=[np.zeros_like(w) for w in model.weights],
            v_weights=[np.zeros_like(w) for w in model.weights],
            m_biases=[np.zeros_like(b) for b in model.biases],
            v_biases=[np.zeros_like(b) for b in model.biases],
            lr=lr, beta1=beta1, beta2=beta2, eps_adam=eps_adam,
        )


def adam_step(model: MlpModel, grads: Gradients,
              state: AdamState) -> tuple[MlpModel, AdamState]:
    """Standard Adam update with bias correction; returns new model/state."""
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t

    def _update(params, grads_p, ms, vs):
        new_p, new_m, new_v = [], [], []
        for p, g, m, v in zip(params, grads_p, ms, vs):
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * (g * g)
            step = state.lr * (m / corr1) / (np.sqrt(v / corr2)
                                             + state.eps_adam)
            new_p.append(p - step)
            new_m.append(m)
            new_v.append(v)
        return new_p, new_m, new_v

    w, mw, vw = _update(model.weights, grads.weights,
                        state.m_weights, state.v_weights)
    b, mb, vb = _update(model.biases, grads.biases,
                        state.m_biases, state.v_biases)
    new_model = MlpModel(
        layer_sizes=model.layer_sizes, weights=w, biases=b,
        activations=model.activations,
        x_mean=model.x_mean, x_scale=model.x_scale,
        y_mean=model.y_mean, y_scale=model.y_scale,
    )
    new_state = AdamState(
        m_weights=mw, v_weights=vw, m_biases=mb, v_biases=vb, step=t,
        lr=state.lr, beta1=state.beta1, beta2=state.beta2,
        eps_adam=state.eps_adam,
    )
    return new_model, new_state


@dataclass
class TrainingSet:
    features: np.ndarray
    targets: np.ndarray
    feature_spec: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        t = np.asarray(self.targets, dtype=np.float64)
        if f.ndim != 2 or t.ndim != 2 or f.shape[0] != t.shape[0]:
            raise ConfigError("features/targets must be matching 2-D arrays")
        if f.shape[0] < 1:
            raise ConfigError("training set must have at least one sample")
        if not (np.isfinite(f).all() and np.isfinite(t).all()):
            raise ConfigError("training data contains non-finite values")
        self.features, self.targets = f, t

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]


def _to_channels(rows: np.ndarray) -> list[np.ndarray]:
    if np.iscomplexobj(rows):
        return [rows.real, rows.imag]
    return [rows]


def snapshot_features(rows: np.ndarray, orders: list[int], boundary: str,
                      stencil_width: int, dx: float) -> np.ndarray:
    """Per-point feature blocks [u, d^o1 u, ...] for rows of snapshots.

    ``rows`` is (n_snapshots, n_grid), real or complex; the result is
    (n_snapshots, n_grid, n_features) with complex fields contributing a
    (re, im) channel pair per derivative order.
    """
    blocks = []
    for order in [0, *orders]:
        if order == 0:
            d = rows
        else:
            d = differentiate(rows, order, stencil_width, boundary, dx)
        blocks.extend(_to_channels(d))
    return np.stack(blocks, axis=-1)


def build_training_pairs(traj: Trajectory, orders: list[int], boundary: str,
                         stencil_width: int) -> TrainingSet:
    """Derivative features and forward-difference time derivatives.

    The time derivative at t_n is (u(t_{n+1}) - u(t_n)) / dt_sample, so
    the last snapshot is dropped from the feature rows.
    """
    if traj.n_snapshots < 2:
        raise ConfigError("need at least two snapshots for time derivatives")
    if stencil_width % 2 != 1:
        raise ConfigError("stencil width must be odd")
    u = traj.values
    dx = traj.dx
    feats = snapshot_features(u[:-1], orders, boundary, stencil_width, dx)
    dudt = (u[1:] - u[:-1]) / traj.dt_sample
    targets = np.stack(_to_channels(dudt), axis=-1)
    n_feat = feats.shape[-1]
    n_targ = targets.shape[-1]
    return TrainingSet(
        features=feats.reshape(-1, n_feat),
        targets=targets.reshape(-1, n_targ),
        feature_spec={
            "orders": list(orders),
            "boundary": boundary,
            "stencil_width": stencil_width,
            "complex": bool(traj.is_complex),
            "dt_sample": traj.dt_sample,
            "dx": dx,
        },
    )


def train_pde_rhs(data: TrainingSet, arch, epochs: int, lr: float = 1e-3,
                  batch_size: int = 128, seed: int = 0,
                  log_every: int | None = None
                  ) -> tuple[MlpModel, np.ndarray]:
    """Shuffled mini-batch Adam training; deterministic per seed.

    ``arch`` is a preset name or a (hidden_sizes, activations) pair.
    Returns the trained model and the per-epoch mean training loss.
    """
    if isinstance(arch, str):
        try:
            hidden, acts = ARCH_PRESETS[arch]
        except KeyError as exc:
            raise ConfigError(f"unknown architecture preset {arch!r}") from exc
    else:
        hidden, acts = arch
    rng = np.random.Generator(np.random.Philox(seed))
    x, y = data.features, data.targets
    x_scale = x.std(axis=0)
    y_scale = y.std(axis=0)
    x_scale = np.where(x_scale > 1e-12, x_scale, 1.0)
    y_scale = np.where(y_scale > 1e-12, y_scale, 1.0)
    model = init_mlp(x.shape[1], list(hidden), y.shape[1], acts, rng,
                     x_mean=x.mean(axis=0), x_scale=x_scale,
                     y_mean=y.mean(axis=0), y_scale=y_scale)
    state = AdamState.for_model(model, lr=lr)
    n = data.n_samples
    history = np.empty(epochs)
    # In-place Adam on the owned model (same math as adam_step; rebuilding
    # the dataclasses every mini-batch dominates the cost for small nets).
    params = model.weights + model.biases
    ms = state.m_weights + state.m_biases
    vs = state.v_weights + state.v_biases
    b1, b2, eps_adam = state.beta1, state.beta2, state.eps_adam
    t = 0
    for epoch in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            grads = mlp_gradient(model, x[idx], y[idx])
            if not np.isfinite(grads.loss):
                raise TrainingDivergedError(epoch, start // batch_size)
            t += 1
            corr1 = 1.0 - b1 ** t
            corr2 = 1.0 - b2 ** t
            for p, g, m, v in zip(params, grads.weights + grads.biases,
                                  ms, vs):
                m *= b1
                m += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * (g * g)
                p -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps_adam)
            total += grads.loss * idx.size
        history[epoch] = total / n
        if log_every and (epoch + 1) % log_every == 0:
            print(f"epoch {epoch + 1}/{epochs}: loss {history[epoch]:.6g}",
                  flush=True)
    return model, history


def _interp_truth(truth: Trajectory, t: float) -> np.ndarray:
    """Linear interpolation of a truth trajectory at time t."""
    s = (t - truth.t0) / truth.dt_sample
    i0 = int(np.floor(s))
    i0 = min(max(i0, 0), truth.n_snapshots - 1)
    i1 = min(i0 + 1, truth.n_snapshots - 1)
    frac = min(max(s - i0, 0.0), 1.0)
    return (1.0 - frac) * truth.values[i0] + frac * truth.values[i1]


def rollout(model: MlpModel, ic, bc: str, dt: float, T: float,
            orders: list[int], stencil_width: int,
            truth: Trajectory | None = None,
            corridor_width: int | None = None,
            record_every: int = 1) -> Trajectory:
    """Forward-Euler integration of u_t = model(features(u)).

    ``bc`` is "periodic" (cyclic stencils) or "corridor": one-sided
    stencils plus, after every step, overwriting corridor_width points at
    each edge with the truth trajectory interpolated linearly in time.
    """
    if bc not in ("periodic", "corridor"):
        raise ConfigError(f"unknown rollout boundary mode {bc!r}")
    if bc == "corridor":
        if truth is None:
            raise ConfigError("corridor mode needs a truth trajectory")
        if corridor_width is None:
            corridor_width = (stencil_width - 1) // 2
        if truth.t0 > 0.0 or truth.t0 + truth.dt_sample * \
                (truth.n_snapshots - 1) < T - 1e-9:
            raise ConfigError("truth trajectory does not cover [0, T]")
    is_complex = isinstance(ic, ComplexField1D)
    if not isinstance(ic, (ScalarField1D, ComplexField1D)):
        raise ConfigError("rollout initial condition must be a field")
    stencil_boundary = "periodic" if bc == "periodic" else "zero_flux"
    u = ic.values.astype(np.complex128 if is_complex else np.float64).copy()
    n = u.size
    dx = ic.dx
    n_steps = int(round(T / dt))
    rows = [u.copy()]
    for step in range(1, n_steps + 1):
        feats = snapshot_features(u[None, :], orders, stencil_boundary,
                                  stencil_width, dx)[0]
        out = mlp_forward(model, feats)
        if is_complex:
            du = out[:, 0] + 1j * out[:, 1]
        else:
            du = out[:, 0]
        u = u + dt * du
        t = step * dt
        if bc == "corridor":
            ref = _interp_truth(truth, t)
            u[:corridor_width] = ref[:corridor_width]
            u[n - corridor_width:] = ref[n - corridor_width:]
        if not np.isfinite(u).all() or np.max(np.abs(u)) > ROLLOUT_BLOWUP_LIMIT:
            raise BlowUpError(t, "learned-PDE rollout")
        if step % record_every == 0:
            rows.append(u.copy())
    return Trajectory(
        values=np.array(rows),
        dt_sample=dt * record_every,
        domain_length=ic.domain_length,
        boundary=stencil_boundary,
        origin=ic.origin,
        grid_spacing=ic.grid_spacing,
    )


def rel_mse(traj: Trajectory, ref: Trajectory) -> float:
    """Mean squared deviation over (t, z), normalized by the reference
    mean square; complex fields use squared moduli."""
    if traj.values.shape != ref.values.shape:
        raise ConfigError("trajectories have mismatched shapes")
    if not np.isclose(traj.dt_sample, ref.dt_sample, rtol=1e-10):
        raise ConfigError("trajectories have mismatched sampling intervals")
    diff = traj.values - ref.values
    num = float(np.mean(np.abs(diff) ** 2))
    den = float(np.mean(np.abs(ref.values) ** 2))
    if den == 0.0:
        raise ConfigError("reference trajectory is identically zero")
    return num / den


def save_mlp(path_stem: str | Path, model: MlpModel,
             provenance: dict | None = None) -> None:
    """Architecture JSON plus one matrix dataset per layer."""
    stem = Path(path_stem)
    arch = {
        "layer_sizes": model.layer_sizes,
        "activations": model.activations,
        "x_mean": model.x_mean.tolist(),
        "x_scale": model.x_scale.tolist(),
        "y_mean": model.y_mean.tolist(),
        "y_scale": model.y_scale.tolist(),
        "n_layers": len(model.weights),
        "provenance": provenance or {},
    }
    stem.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{stem}.arch.json").write_text(json.dumps(arch, indent=2),
                                         encoding="utf-8")
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        write_dataset(f"{stem}.w{i}",
                      DatasetManifest(kind="matrix", shape=list(w.shape)), w)
        write_dataset(f"{stem}.b{i}",
                      DatasetManifest(kind="matrix", shape=list(b.shape)), b)


def load_mlp(path_stem: str | Path) -> MlpModel:
    stem = Path(path_stem)
    arch = json.loads(
        Path(f"{stem}.arch.json").read_text(encoding="utf-8"))
    weights, biases = [], []
    for i in range(arch["n_layers"]):
        weights.append(read_dataset(f"{stem}.w{i}")[1])
        biases.append(read_dataset(f"{stem}.b{i}")[1])
    return MlpModel(
        layer_sizes=arch["layer_sizes"],
        weights=weights,
        biases=biases,
        activations=arch["activations"],
        x_mean=np.array(arch["x_mean"]),
        x_scale=np.array(arch["x_scale"]),
        y_mean=np.array(arch["y_mean"]),
        y_scale=np.array(arch["y_scale"]),
    )
