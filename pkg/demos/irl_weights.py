"""From behaviour traces to buyer utility coefficients.

Part one rescales a reference set of raw IRL outputs and derives the l, o, u
coefficients the market uses. Part two plants a known reward, samples traces
from the matching soft-optimal policy and checks the fit recovers its order.
"""

import numpy as np
from scipy.stats import spearmanr

from repmarket.irl import ACTIONS, IrlModel, derive_lou, irl_fit, normalize_weights, sample_traces

raw = (-0.8687, -0.4816, 0.7844, -0.2121, -0.1169, 0.1932, 0.7016)
norm = normalize_weights(raw)
for name, value in zip(ACTIONS, norm):
    print(f"{name:16s} {value:.4f}")
l, o, u = derive_lou(norm)
print(f"l = {l:.4f}  o = {o:.4f}  u = {u:.4f}")

model = IrlModel()
rng = np.random.default_rng(11)
teacher = np.concatenate([rng.normal(size=model.n_actions), np.zeros(model.n_buckets)])
traces = sample_traces(model, teacher, 500, 50, rng)
fit = irl_fit(list(traces), IrlModel())
print(f"\nfit converged={fit.converged} after {fit.iterations} iterations")
print("teacher :", np.round(teacher[:model.n_actions], 2))
print("recovered:", np.round(fit.theta[:model.n_actions], 2))
print("rank correlation:", round(float(spearmanr(fit.theta[:7], teacher[:7]).statistic), 3))
