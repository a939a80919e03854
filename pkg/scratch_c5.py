"""Full-scale criterion-5 pipeline probe (dev script, not part of the package)."""
import time

import numpy as np

from coarsepde.datastore import Trajectory
from coarsepde.emergent import build_emergent_chart, resample_on_phi, scramble
from coarsepde.ics import cgle_paper_ic, cgle_perturbed_ic
from coarsepde.pdenet import build_training_pairs, rel_mse, rollout, train_pde_rhs
from coarsepde.solvers import CgleConfig, simulate_cgle, paper_config

SCRAMBLE_SEED = 42
t_start = time.time()

ref = simulate_cgle(cgle_paper_ic(), paper_config(T=20.0, sample_every=1))
chart = build_emergent_chart(scramble(ref, SCRAMBLE_SEED), subsample_every=10)
print(f"[{time.time()-t_start:7.1f}s] chart done", flush=True)

feats, targs = [], []
for seed in (101, 102, 103, 104, 105):
    ic = cgle_perturbed_ic(128, 200.0, seed=seed)
    cfg = CgleConfig(c1=1.0, c2=2.0, L=200.0, N=128, dt=1e-3, T=20.0, sample_every=1)
    traj = simulate_cgle(ic, cfg)
    res = resample_on_phi(scramble(traj, SCRAMBLE_SEED), chart, n_grid=128)
    ts = build_training_pairs(res, orders=[1, 2, 3], boundary="zero_flux",
                              stencil_width=9)
    feats.append(ts.features)
    targs.append(ts.targets)
    print(f"[{time.time()-t_start:7.1f}s] transient {seed}: {ts.features.shape}", flush=True)

from coarsepde.pdenet import TrainingSet
big = TrainingSet(np.vstack(feats), np.vstack(targs),
                  feature_spec={"orders": [1, 2, 3], "boundary": "zero_flux",
                                "stencil_width": 9})
del feats, targs
print(f"[{time.time()-t_start:7.1f}s] training set {big.features.shape}", flush=True)

model, hist = train_pde_rhs(big, "cgle_96x4_tanh", epochs=20, lr=1e-3,
                            batch_size=2048, seed=0, log_every=1)
print(f"[{time.time()-t_start:7.1f}s] trained; hist={np.array2string(hist, precision=5)}", flush=True)

test_ic = cgle_perturbed_ic(128, 200.0, seed=999)
cfg = CgleConfig(c1=1.0, c2=2.0, L=200.0, N=128, dt=1e-3, T=10.0, sample_every=1)
truth = simulate_cgle(test_ic, cfg)
truth_res = resample_on_phi(scramble(truth, SCRAMBLE_SEED), chart, n_grid=128)

ro = rollout(model, truth_res.snapshot(0), "corridor", dt=1e-3, T=10.0,
             orders=[1, 2, 3], stencil_width=9, truth=truth_res,
             corridor_width=4, record_every=1)
err = rel_mse(ro, truth_res)
print(f"[{time.time()-t_start:7.1f}s] criterion-5 rel_mse over [0,10]: {err:.4f}", flush=True)

from coarsepde.pdenet import save_mlp
save_mlp("/tmp/c5_model", model, provenance={"rel_mse": err})
