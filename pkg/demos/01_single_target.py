"""One target seen through trajectory measurements over a time window.

Walks through a single window by hand and then runs the filter for a while,
checking that it collapses to a Kalman filter when nothing is uncertain.
"""

# %%
import numpy as np

from tmpmbm import (BirthModel, ClutterModel, FilterConfig, Gaussian, LocalHypothesis,
                    MeasurementModel, MotionModel, PmbmState, make_measurement, predict, step, update)

rng = np.random.default_rng(1)

# %% Models for a window of 5 fine steps of 0.2 s
motion = MotionModel.ncv(fine_interval=0.2, fine_steps=5, q=0.01)
meas = MeasurementModel.position(sigma2=0.1, detect_prob=0.9, full_given_detect=0.9)
clutter = ClutterModel.from_total(10.0, [[0, 100], [0, 100]])
cfg = FilterConfig(motion, meas, BirthModel(), clutter)
print("window survival", motion.survive_prob)
print("kind probabilities", {k.name: round(v, 3) for k, v in meas.kind_probs.items()})

# %% One detected target, predicted over the window
prior = Gaussian([50.0, 1.0, 50.0, -1.0], np.diag([4.0, 1.0, 4.0, 1.0]))
state = PmbmState((), [[LocalHypothesis(0.0, 1.0, prior)]])
pred = predict(state, cfg)
h = pred.targets[0][0]
print("beta (died, alive):", np.round(h.beta, 4))
print("stacked mean:", np.round(h.density.mean, 2))

# %% A full trajectory measurement plus some clutter
x_end = motion.F @ prior.mean
Z = make_measurement("full", meas.H @ prior.mean + 0.2, meas.H @ x_end - 0.1)
Zs = [Z, make_measurement("last", z_last=[10.0, 80.0])]
upd = update(pred, Zs, cfg)
best = upd.assignments[upd.best_global()]
print("global hypotheses:", len(upd.weights), "best weight", upd.weights.max().round(4))
print("target 0 after update: r =", upd.targets[0][best[0]].r)

# %% Certain detection and no clutter: the filter is a Kalman filter
cfg_kf = FilterConfig(motion, MeasurementModel.position(0.1, 1.0, 1.0), BirthModel(),
                      ClutterModel(0.0, 0.0, [[0, 100], [0, 100]]))
state = PmbmState((), [[LocalHypothesis(0.0, 1.0, prior)]])
x = prior.mean.copy()
for k in range(20):
    x2 = motion.F @ x + rng.multivariate_normal(np.zeros(4), motion.Q)
    Z = make_measurement("full", meas.H @ x + rng.normal(0, 0.1**0.5, 2),
                         meas.H @ x2 + rng.normal(0, 0.1**0.5, 2))
    state, est, diag = step(state, [Z], cfg_kf)
    x = x2
print("truth  ", np.round(x, 2))
print("estimate", np.round(est[0], 2), "hypotheses", (diag.n_local, diag.n_global))
