"""Command-line pipeline orchestration.

One subcommand per stage; every option can come from a JSON config file
(--config) with precedence CLI > file > defaults. All outputs are
datastore datasets or JSON, each carrying a provenance block (config
hash, seed, package/numpy versions).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .datastore import (Trajectory, read_dataset, read_matrix,
                        read_trajectory, write_matrix, write_trajectory)
from .emergent import (build_emergent_chart, resample_on_phi, scramble,
                       verify_ordering)
from .errors import (BlowUpError, CflViolationError, ConfigError,
                     DataFormatError, DisconnectedKernelError,
                     TrainingDivergedError)
from .ics import (burgers_two_hump_ic, cgle_paper_ic, cgle_perturbed_ic,
                  constant_ic, random_sine_ic)
from .particles import TWO_PI, ParticleSimConfig, lift_density
from .pdenet import (build_training_pairs, load_mlp, rel_mse, rollout,
                     save_mlp, train_pde_rhs, TrainingSet)
from .pipelines import (MomentEmbedding, density_trajectory_to_phi,
                        load_moment_embedding, phi_trajectory,
                        save_moment_embedding, simulate_particles_with_moments,
                        train_moment_embedding)
from .solvers import BurgersConfig, CgleConfig, simulate_burgers_fv, \
    simulate_cgle

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

REQUIRED = object()  # sentinel for options with no usable default


def _provenance(args: dict, seed=None) -> dict:
    blob = json.dumps(args, sort_keys=True, default=str).encode()
    return {
        "command": args.get("command"),
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "seed": seed,
        "coarsepde_version": __version__,
        "numpy_version": np.__version__,
    }


def _merge_config(args: argparse.Namespace,
                  defaults: dict) -> dict:
    """Precedence: command line > config file > defaults."""
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise DataFormatError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = {}
    for key, default in defaults.items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            merged[key] = cli_val
        elif key in file_cfg:
            merged[key] = file_cfg[key]
        else:
            merged[key] = default
    missing = [k for k, v in merged.items() if v is REQUIRED]
    if missing:
        raise ConfigError(f"missing required option(s): {missing}")
    return merged


def _scalar_ic(spec: str, n: int, seed: int):
    if spec == "paper-fig1":
        return burgers_two_hump_ic(n)
    if spec.startswith("constant:"):
        return constant_ic(n, float(spec.split(":", 1)[1]))
    if spec == "random-eq14":
        return random_sine_ic(n, seed=seed)
    raise ConfigError(f"unknown initial condition {spec!r}")


def _cgle_ic(spec: str, n: int, length: float):
    if spec == "paper":
        return cgle_paper_ic(n, length)
    if spec.startswith("perturbed:"):
        return cgle_perturbed_ic(n, length, seed=int(spec.split(":", 1)[1]))
    raise ConfigError(f"unknown CGLE initial condition {spec!r}")


def cmd_simulate_burgers(args) -> int:
    cfg = _merge_config(args, {
        "command": "simulate-burgers", "nu": 0.05, "n_cells": 128,
        "dt": 1e-3, "T": 2.0, "sample_every": 1, "ic": "paper-fig1",
        "seed": 0, "out": REQUIRED,
    })
    ic = _scalar_ic(cfg["ic"], cfg["n_cells"], cfg["seed"])
    traj = simulate_burgers_fv(ic, BurgersConfig(
        nu=cfg["nu"], n_cells=cfg["n_cells"], dt=cfg["dt"], T=cfg["T"],
        sample_every=cfg["sample_every"]))
    write_trajectory(cfg["out"], traj, seed=cfg["seed"],
                     provenance=_provenance(cfg, cfg["seed"]))
    print(f"wrote {cfg['out']}.json/.bin ({traj.n_snapshots} snapshots)")
    return EXIT_OK


def cmd_simulate_particles(args) -> int:
    cfg = _merge_config(args, {
        "command": "simulate-particles", "nu": 0.05, "R": 4e4,
        "n_boxes": 128, "dt": 1e-3, "T": 2.0, "sample_every": 1,
        "ic": "paper-fig1", "seed": 0, "n_traj": 1, "record_moments": 0,
        "out": REQUIRED,
    })
    n_traj = int(cfg["n_traj"])
    for i in range(n_traj):
        seed = int(cfg["seed"]) + i
        stem = cfg["out"] if n_traj == 1 else f"{cfg['out']}-{i:03d}"
        ic_spec = cfg["ic"]
        ic = _scalar_ic(ic_spec, cfg["n_boxes"], seed)
        pcfg = ParticleSimConfig(
            nu=cfg["nu"], dt=cfg["dt"], R=cfg["R"], seed=seed, T=cfg["T"],
            n_boxes=int(cfg["n_boxes"]), sample_every=int(cfg["sample_every"]))
        prov = _provenance(cfg, seed)
        prov["ic"] = ic_spec
        if int(cfg["record_moments"]) > 0:
            traj, moments = simulate_particles_with_moments(
                ic, pcfg, k_moments=int(cfg["record_moments"]))
            write_matrix(f"{stem}.moments", moments, seed=seed,
                         provenance=prov)
        else:
            from .particles import simulate_particles
            traj, _ = simulate_particles(ic, pcfg)
        write_trajectory(stem, traj, seed=seed, provenance=prov)
        print(f"wrote {stem}.json/.bin ({traj.n_snapshots} snapshots)")
    return EXIT_OK


def cmd_simulate_cgle(args) -> int:
    cfg = _merge_config(args, {
        "command": "simulate-cgle", "preset": None, "c1": 1.0, "c2": 2.0,
        "L": 200.0, "N": 128, "dt": 0.01, "T": 20.0, "sample_every": 1,
        "ic": "paper", "seed": 0, "out": REQUIRED,
    })
    if cfg["preset"] not in (None, "none", "paper"):
        raise ConfigError(f"unknown preset {cfg['preset']!r}")
    if cfg["preset"] == "paper":
        cfg.update(c1=1.0, c2=2.0, L=200.0, N=128)
    ccfg = CgleConfig(c1=cfg["c1"], c2=cfg["c2"], L=cfg["L"], N=int(cfg["N"]),
                      dt=cfg["dt"], T=cfg["T"],
                      sample_every=int(cfg["sample_every"]))
    ic = _cgle_ic(cfg["ic"], ccfg.N, ccfg.L)
    traj = simulate_cgle(ic, ccfg)
    write_trajectory(cfg["out"], traj, seed=cfg["seed"],
                     provenance=_provenance(cfg, cfg["seed"]))
    print(f"wrote {cfg['out']}.json/.bin ({traj.n_snapshots} snapshots)")
    return EXIT_OK


def cmd_embed_distributions(args) -> int:
    cfg = _merge_config(args, {
        "command": "embed-distributions", "traj": REQUIRED, "moments": "",
        "k_moments": 6, "n_boxes": 128, "epsilon_rule": "median",
        "n_train": 512, "lift_seed": 12345, "out": REQUIRED,
    })
    traj = read_trajectory(cfg["traj"])
    n_boxes = int(cfg["n_boxes"])
    k = int(cfg["k_moments"])
    if cfg["moments"]:
        moments = read_matrix(cfg["moments"])
        if moments.shape[-1] != k + 1:
            raise ConfigError("moments dataset does not match k_moments")
    else:
        # Regenerate ensembles from the recorded densities via lifting.
        from .manifold import ensemble_box_moments
        rows = []
        for i in range(traj.n_snapshots):
            ens = lift_density(traj.snapshot(i), R=float(cfg.get("R", 4e4)),
                               seed=int(cfg["lift_seed"]) + i)
            rows.append(ensemble_box_moments(ens, n_boxes, k))
        moments = np.array(rows)
    rule = cfg["epsilon_rule"]
    if isinstance(rule, str) and rule not in ("median", "median_sq"):
        rule = float(rule)
    me = train_moment_embedding(
        moments.reshape(-1, k + 1), box_width=traj.domain_length / n_boxes,
        n_train=int(cfg["n_train"]), epsilon_rule=rule)
    phi = phi_trajectory(me, moments, traj.dt_sample, traj.domain_length)
    prov = _provenance(cfg)
    save_moment_embedding(cfg["out"], me, provenance=prov)
    write_trajectory(f"{cfg['out']}.phi", phi, provenance=prov)
    print(f"wrote {cfg['out']}.phi (phi_1 trajectory) and embedding data; "
          f"epsilon={me.embedding.epsilon:.6g}")
    return EXIT_OK


def cmd_embed_timeseries(args) -> int:
    cfg = _merge_config(args, {
        "command": "embed-timeseries", "traj": REQUIRED, "scramble_seed": 42,
        "subsample_every": 10, "n_grid": 128, "out": REQUIRED,
    })
    traj = read_trajectory(cfg["traj"])
    bundle = scramble(traj, seed=int(cfg["scramble_seed"]))
    chart = build_emergent_chart(
        bundle, subsample_every=int(cfg["subsample_every"]))
    resampled = resample_on_phi(bundle, chart, n_grid=int(cfg["n_grid"]))
    prov = _provenance(cfg, int(cfg["scramble_seed"]))
    write_matrix(f"{cfg['out']}.phi1", chart.phi1, provenance=prov)
    write_matrix(f"{cfg['out']}.rescaled", chart.rescaled_phi, provenance=prov)
    write_matrix(f"{cfg['out']}.order",
                 chart.agent_order.astype(np.float64), provenance=prov)
    write_trajectory(f"{cfg['out']}.resampled", resampled, provenance=prov)
    # verification against the retained ground-truth permutation
    x_grid = traj.origin + (np.arange(traj.n_grid) + 0.5) * traj.dx
    report = verify_ordering(chart, x_grid[bundle.permutation])
    report["provenance"] = prov
    Path(f"{cfg['out']}.report.json").write_text(
        json.dumps(report, indent=2), encoding="utf-8")
    print(f"wrote {cfg['out']}.resampled and chart; "
          f"|spearman|={abs(report['spearman']):.6f}")
    return EXIT_OK


def cmd_train_pde(args) -> int:
    cfg = _merge_config(args, {
        "command": "train-pde", "train": REQUIRED, "arch": "burgers_32x3_relu",
        "orders": "1,2", "stencil_width": 3, "boundary": "periodic",
        "epochs": 150, "lr": 1e-3, "batch_size": 512, "seed": 0, "out": REQUIRED,
    })
    stems = cfg["train"] if isinstance(cfg["train"], list) \
        else str(cfg["train"]).split(",")
    orders = [int(o) for o in str(cfg["orders"]).split(",")]
    feats, targs = [], []
    for stem in stems:
        traj = read_trajectory(stem)
        ts = build_training_pairs(traj, orders=orders,
                                  boundary=cfg["boundary"],
                                  stencil_width=int(cfg["stencil_width"]))
        feats.append(ts.features)
        targs.append(ts.targets)
    data = TrainingSet(np.vstack(feats), np.vstack(targs))
    model, history = train_pde_rhs(
        data, cfg["arch"], epochs=int(cfg["epochs"]), lr=float(cfg["lr"]),
        batch_size=int(cfg["batch_size"]), seed=int(cfg["seed"]))
    prov = _provenance(cfg, int(cfg["seed"]))
    prov["final_loss"] = float(history[-1])
    save_mlp(cfg["out"], model, provenance=prov)
    hist_path = Path(f"{cfg['out']}.history.csv")
    with open(hist_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        writer.writerows(enumerate(history))
    print(f"wrote model {cfg['out']} (final loss {history[-1]:.6g})")
    return EXIT_OK


def cmd_rollout(args) -> int:
    cfg = _merge_config(args, {
        "command": "rollout", "model": REQUIRED, "ic_traj": REQUIRED, "ic_index": 0,
        "bc": "periodic", "truth": "", "corridor_width": None,
        "dt": 1e-3, "T": 2.0, "orders": "1,2", "stencil_width": 3,
        "record_every": 1, "out": REQUIRED,
    })
    model = load_mlp(cfg["model"])
    ic_traj = read_trajectory(cfg["ic_traj"])
    ic = ic_traj.snapshot(int(cfg["ic_index"]))
    truth = read_trajectory(cfg["truth"]) if cfg["truth"] else None
    orders = [int(o) for o in str(cfg["orders"]).split(",")]
    cw = cfg["corridor_width"]
    traj = rollout(model, ic, cfg["bc"], dt=float(cfg["dt"]),
                   T=float(cfg["T"]), orders=orders,
                   stencil_width=int(cfg["stencil_width"]), truth=truth,
                   corridor_width=None if cw is None else int(cw),
                   record_every=int(cfg["record_every"]))
    write_trajectory(cfg["out"], traj, provenance=_provenance(cfg))
    print(f"wrote {cfg['out']} ({traj.n_snapshots} snapshots)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    t_start = time.perf_counter()
    cfg = _merge_config(args, {
        "command": "evaluate", "traj": REQUIRED, "ref": REQUIRED,
        "chart_phi": "", "true_positions": "", "out": REQUIRED,
    })
    traj = read_trajectory(cfg["traj"])
    ref = read_trajectory(cfg["ref"])
    n = min(traj.n_snapshots, ref.n_snapshots)
    traj = Trajectory(traj.values[:n], traj.dt_sample, traj.domain_length,
                      traj.boundary, traj.t0, traj.origin, traj.grid_spacing)
    ref = Trajectory(ref.values[:n], ref.dt_sample, ref.domain_length,
                     ref.boundary, ref.t0, ref.origin, ref.grid_spacing)
    metrics = {"rel_mse": rel_mse(traj, ref), "spearman": None,
               "kendall": None, "flipped": None}
    if cfg["chart_phi"] and cfg["true_positions"]:
        from scipy.stats import kendalltau, spearmanr
        phi1 = read_matrix(cfg["chart_phi"])
        x = read_matrix(cfg["true_positions"])
        rho = float(spearmanr(phi1, x).statistic)
        metrics["spearman"] = rho
        metrics["kendall"] = float(kendalltau(phi1, x).statistic)
        metrics["flipped"] = bool(rho < 0)
    metrics["runtime"] = time.perf_counter() - t_start
    metrics["provenance"] = _provenance(cfg)
    Path(cfg["out"]).write_text(json.dumps(metrics, indent=2),
                                encoding="utf-8")
    print(json.dumps({k: metrics[k] for k in
                      ("rel_mse", "spearman", "runtime")}))
    return EXIT_OK


def cmd_export_plot(args) -> int:
    cfg = _merge_config(args, {
        "command": "export-plot", "dataset": REQUIRED, "out": REQUIRED,
    })
    manifest, data = read_dataset(cfg["dataset"])
    out = Path(cfg["out"])
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        if manifest.kind in ("scalar_traj", "complex_traj"):
            dt = manifest.dt_sample
            length = manifest.domain_length
            origin = float(manifest.provenance.get("origin", 0.0))
            gs = manifest.provenance.get("grid_spacing")
            n = data.shape[1]
            if gs is not None:
                x = origin + np.arange(n) * float(gs)
            else:
                x = origin + (np.arange(n) + 0.5) * (length / n)
            if manifest.kind == "complex_traj":
                writer.writerow(["t", "x", "value_re", "value_im"])
                for i in range(data.shape[0]):
                    for j in range(n):
                        writer.writerow([i * dt, x[j], data[i, j].real,
                                         data[i, j].imag])
            else:
                writer.writerow(["t", "x", "value"])
                for i in range(data.shape[0]):
                    for j in range(n):
                        writer.writerow([i * dt, x[j], data[i, j]])
        else:
            writer.writerow(["index", "value"])
            for idx, val in np.ndenumerate(data):
                writer.writerow([" ".join(map(str, idx)), val])
    print(f"wrote {out}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (CLI overrides it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coarsepde",
        description="Coarse-grained PDE discovery pipelines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-burgers", help="finite-volume truth run")
    _add_common(p)
    p.add_argument("--nu", type=float)
    p.add_argument("--n-cells", dest="n_cells", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--T", dest="T", type=float)
    p.add_argument("--sample-every", dest="sample_every", type=int)
    p.add_argument("--ic")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate_burgers)

    p = sub.add_parser("simulate-particles", help="interacting-particle run")
    _add_common(p)
    p.add_argument("--nu", type=float)
    p.add_argument("--R", dest="R", type=float)
    p.add_argument("--n-boxes", dest="n_boxes", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--T", dest="T", type=float)
    p.add_argument("--sample-every", dest="sample_every", type=int)
    p.add_argument("--ic")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-traj", dest="n_traj", type=int)
    p.add_argument("--record-moments", dest="record_moments", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate_particles)

    p = sub.add_parser("simulate-cgle", help="pseudo-spectral CGLE run")
    _add_common(p)
    p.add_argument("--preset")
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--L", dest="L", type=float)
    p.add_argument("--N", dest="N", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--T", dest="T", type=float)
    p.add_argument("--sample-every", dest="sample_every", type=int)
    p.add_argument("--ic")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate_cgle)

    p = sub.add_parser("embed-distributions",
                       help="moment-space Diffusion Maps embedding")
    _add_common(p)
    p.add_argument("--traj", help="density trajectory stem")
    p.add_argument("--moments", help="recorded moments dataset stem")
    p.add_argument("--k-moments", dest="k_moments", type=int)
    p.add_argument("--n-boxes", dest="n_boxes", type=int)
    p.add_argument("--epsilon-rule", dest="epsilon_rule")
    p.add_argument("--n-train", dest="n_train", type=int)
    p.add_argument("--lift-seed", dest="lift_seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_embed_distributions)

    p = sub.add_parser("embed-timeseries",
                       help="emergent coordinate from scrambled agents")
    _add_common(p)
    p.add_argument("--traj", help="complex trajectory stem")
    p.add_argument("--scramble-seed", dest="scramble_seed", type=int)
    p.add_argument("--subsample-every", dest="subsample_every", type=int)
    p.add_argument("--n-grid", dest="n_grid", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_embed_timeseries)

    p = sub.add_parser("train-pde", help="regress the PDE right-hand side")
    _add_common(p)
    p.add_argument("--train", nargs="+", help="training trajectory stems")
    p.add_argument("--arch")
    p.add_argument("--orders")
    p.add_argument("--stencil-width", dest="stencil_width", type=int)
    p.add_argument("--boundary")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train_pde)

    p = sub.add_parser("rollout", help="integrate a learned PDE")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--ic-traj", dest="ic_traj")
    p.add_argument("--ic-index", dest="ic_index", type=int)
    p.add_argument("--bc")
    p.add_argument("--truth")
    p.add_argument("--corridor-width", dest="corridor_width", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--T", dest="T", type=float)
    p.add_argument("--orders")
    p.add_argument("--stencil-width", dest="stencil_width", type=int)
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("evaluate", help="score a trajectory against truth")
    _add_common(p)
    p.add_argument("--traj")
    p.add_argument("--ref")
    p.add_argument("--chart-phi", dest="chart_phi")
    p.add_argument("--true-positions", dest="true_positions")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-plot", help="dump a dataset as long-form CSV")
    _add_common(p)
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CflViolationError, BlowUpError, TrainingDivergedError,
            DisconnectedKernelError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataFormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
