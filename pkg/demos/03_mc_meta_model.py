"""Monte Carlo influence estimation and the kNN meta-model shortcut.

The prospective EVSI of a unit is a nested expectation: simulate how the
unit's data could have come out, re-fit the posterior for each completion,
and average the squared movement of the Bayes action.  The naive estimator
does exactly that and costs (outer x inner) posterior samples.  The kNN
meta-model replaces the inner re-fit with a nearest-neighbor regression of
target draws on simulated data blocks, collapsing the cost to a single
posterior sample.

This demo runs both on the normal linear model, where the exact answer is
known, so the error of each estimator is visible.

Run:  python3 demos/03_mc_meta_model.py
"""

import time

import numpy as np

from voinfluence import linreg
from voinfluence.datasets import longley
from voinfluence.mc import (MetaModelConfig, prospective_evsi_knn,
                            prospective_evsi_naive, retrospective_evsi_mc)
from voinfluence.samplers import LinearModelSampler

data = longley()
fitted = linreg.fit(data)
sampler = LinearModelSampler(data)
loss = linreg.prediction_loss(data)

unit = "1951"
i = data.row_labels.index(unit)
exact_retro = linreg.retrospective_evsi_exact(data, i, fitted)
exact_pro = linreg.prospective_evsi_exact(data, i, fitted)

print(f"unit under scrutiny: {unit}")
print(f"exact retrospective EVSI: {exact_retro:.4f}")
print(f"exact prospective EVSI:   {exact_pro:.4f}\n")

# --- retrospective: two posterior samples are enough ------------------------
est, mcse = retrospective_evsi_mc(sampler, unit, loss, seed=1, n=40000)
print(f"retrospective MC: {est:.4f} (MCSE {mcse:.4f}, "
      f"z = {(est - exact_retro) / mcse:+.2f})\n")

# --- prospective: naive nested MC vs the kNN meta-model ---------------------
cfg = MetaModelConfig(n_outer=2000, n_inner=500)
t0 = time.perf_counter()
naive, naive_mcse = prospective_evsi_naive(sampler, unit, loss, cfg, seed=2)
t_naive = time.perf_counter() - t0
print(f"naive nested MC ({cfg.n_outer} x {cfg.n_inner} draws): "
      f"{naive:.4f} (MCSE {naive_mcse:.4f}) in {t_naive:.2f}s")

t0 = time.perf_counter()
knn, knn_mcse = prospective_evsi_knn(sampler, unit, loss, cfg, seed=2)
t_knn = time.perf_counter() - t0
print(f"kNN meta-model (k = {cfg.resolved_k}):        "
      f"{knn:.4f} (MCSE {knn_mcse:.4f}) in {t_knn:.2f}s")
print(f"relative error vs exact: naive {abs(naive - exact_pro) / exact_pro:.1%}, "
      f"kNN {abs(knn - exact_pro) / exact_pro:.1%}\n")

# --- the neighborhood size trades noise against smoothing bias --------------
print("k sensitivity (same seed, 5 replicates each):")
for k in (10, 45, 150, 500):
    cfg_k = MetaModelConfig(n_outer=2000, k_neighbors=k, n_replicates=5)
    est, mcse = prospective_evsi_knn(sampler, unit, loss, cfg_k, seed=3)
    print(f"  k = {k:>3}: {est:.4f} "
          f"(rel err {abs(est - exact_pro) / exact_pro:+.1%})")
print("\nSmall k lets posterior noise leak into the estimate (upward "
      "bias); very\nlarge k over-smooths toward zero.  The sqrt(N) default "
      "is a reasonable\nmiddle ground, and the replicate MCSE makes the "
      "residual noise visible.")
