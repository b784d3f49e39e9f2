"""Scenario 1: four targets that meet in the middle, one of them dies there.

Runs every filter on one shared measurement sequence and prints the GOSPA
error and hypothesis counts, then the mean over a few Monte Carlo runs.
"""

# %%
import numpy as np

from tmpmbm.sim import Cell, Experiment, load_fixture, run_monte_carlo, scenario1, simulate_run

truth = load_fixture("scenario1.json")
print("tracks:", [(t.birth, t.end) for t in truth.tracks])
print("positions at step 124:\n", np.round(truth.states_at(124)[:, [0, 2]], 1))

# %% One run, window length 7, full-measurement probability 0.7, clutter 10
exp = Experiment(scenario1(), n_runs=1, seed=7)
cell = Cell(n_w=7, p_full=0.7, clutter_rate=10.0)
records = simulate_run(exp, cell, run=0)
for name in exp.filters:
    rs = [r for r in records if r.filter == name]
    err = np.sqrt(np.mean([r.gospa.total**2 for r in rs]))
    print(f"{name:8s} rms gospa {err:5.2f}  mean local {np.mean([r.n_local for r in rs]):5.1f}"
          f"  mean global {np.mean([r.n_global for r in rs]):5.1f}")

# %% A handful of runs (the acceptance suite uses 30)
exp = Experiment(scenario1(), n_runs=3, seed=7)
records = run_monte_carlo(exp, cell)
for name in exp.filters:
    rs = [r for r in records if r.filter == name]
    print(f"{name:8s} rms gospa over {exp.n_runs} runs {np.sqrt(np.mean([r.gospa.total**2 for r in rs])):5.2f}")
