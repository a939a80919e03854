"""Full-scale criterion-3 pipeline probe (dev script, not part of the package)."""
import time

import numpy as np

from coarsepde.datastore import ScalarField1D, Trajectory
from coarsepde.ics import random_sine_ic
from coarsepde.particles import ParticleSimConfig
from coarsepde.pdenet import (TrainingSet, build_training_pairs, rel_mse,
                              rollout, train_pde_rhs)
from coarsepde.pipelines import (density_trajectory_to_phi, phi_trajectory,
                                 simulate_particles_with_moments,
                                 train_moment_embedding)
from coarsepde.solvers import BurgersConfig, simulate_burgers_fv

t0 = time.time()
K = 6
N_BOXES = 128

moms_all, trajs = [], []
for seed in range(1, 9):
    ic = random_sine_ic(N_BOXES, seed=seed)
    cfg = ParticleSimConfig(nu=0.05, dt=1e-3, R=4e4, seed=seed, T=2.0,
                            n_boxes=N_BOXES, sample_every=1)
    traj, moms = simulate_particles_with_moments(ic, cfg, k_moments=K)
    trajs.append(traj)
    moms_all.append(moms)
    print(f"[{time.time()-t0:7.1f}s] sim {seed}: {traj.values.shape}", flush=True)

pool = np.concatenate([m.reshape(-1, K + 1) for m in moms_all])
me = train_moment_embedding(pool, box_width=2 * np.pi / N_BOXES, n_train=512)
print(f"[{time.time()-t0:7.1f}s] embedding eps={me.embedding.epsilon:.4g}", flush=True)

feats, targs = [], []
for traj, moms in zip(trajs, moms_all):
    phi = phi_trajectory(me, moms, traj.dt_sample, traj.domain_length)
    ts = build_training_pairs(phi, orders=[1, 2], boundary="periodic",
                              stencil_width=3)
    feats.append(ts.features)
    targs.append(ts.targets)
big = TrainingSet(np.vstack(feats), np.vstack(targs))
del feats, targs
print(f"[{time.time()-t0:7.1f}s] training set {big.features.shape}", flush=True)

model, hist = train_pde_rhs(big, "burgers_32x3_relu", epochs=150, lr=1e-3,
                            batch_size=512, seed=0, log_every=10)
print(f"[{time.time()-t0:7.1f}s] trained, last losses {hist[-3:]}", flush=True)

# test on an unseen IC
ic_test = random_sine_ic(N_BOXES, seed=777)
fv = simulate_burgers_fv(ic_test, BurgersConfig(nu=0.05, n_cells=N_BOXES,
                                                dt=1e-3, T=2.0))
phi_truth = density_trajectory_to_phi(me, fv, n_boxes=N_BOXES, k_moments=K)
ic_phi = phi_truth.snapshot(0)
ro = rollout(model, ic_phi, "periodic", dt=1e-3, T=2.0, orders=[1, 2],
             stencil_width=3, record_every=1)
err_phi = rel_mse(ro, phi_truth)
print(f"[{time.time()-t0:7.1f}s] phi-space rel_mse: {err_phi:.4f}", flush=True)

gh = me.phi_to_density_map(n_harmonics=40)
dens = np.apply_along_axis(gh, 1, ro.values)
dens_traj = Trajectory(dens, ro.dt_sample, fv.domain_length, "periodic")
err_rho = rel_mse(dens_traj, fv)
print(f"[{time.time()-t0:7.1f}s] density-space rel_mse vs FV: {err_rho:.4f}", flush=True)
