"""The pieces underneath the filter: ranked assignments, gating and GOSPA."""

# %%
import numpy as np

from tmpmbm import gate, gospa, murty_kbest

# %% The k best assignments of a small cost matrix (inf = not allowed)
cost = np.array([[1.0, 4.0, np.inf],
                 [2.0, 0.5, 3.0]])
for cols, total in murty_kbest(cost, 4):
    print("rows -> columns", cols, "cost", total)

# %% Gating on the squared Mahalanobis distance
S = np.eye(2)
print(gate([0, 0], S, [3, 0], 9.0), gate([0, 0], S, [4, 0], 9.0))

# %% GOSPA with its decomposition (c = 10, p = 2)
X = np.array([[0.0, 0.0], [10.0, 10.0]])
Y = np.array([[0.5, 0.0], [40.0, 40.0], [41.0, 41.0]])
res = gospa(X, Y)
print(f"total {res.total:.3f} = loc {res.localisation:.3f}, missed {res.missed:.3f}, false {res.false_:.3f}")
