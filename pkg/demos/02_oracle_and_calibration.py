"""The conjugate oracle and the distribution theory behind EVOIR.

A normal mean with a normal prior and two data blocks is the one model
where every quantity in the library has a pencil-and-paper answer.  This
demo uses it to show the two distributional facts that make EVOIR
interpretable:

1. mean-one: averaged over data generated from the model, the ratio of
   observed to expected influence is exactly 1, so EVOIR reads as
   "multiples of the influence you should have expected";
2. chi-square: in the Gaussian case p * EVOIR ~ chi^2_p, which turns an
   observed ratio into a calibration p-value.

Run:  python3 demos/02_oracle_and_calibration.py
"""

import numpy as np
from scipy import stats

from voinfluence.calibrate import run_calibration
from voinfluence.loss import evoir_calibration_p
from voinfluence.oracle import (ConjugateModel, oracle_posterior_mean,
                                oracle_prospective_evsi,
                                simulate_replications)

model = ConjugateModel(prior_mean=0.0, prior_var=1.0, obs_var=1.0,
                       n1=2, n2=1)

# --- exact answers for one concrete dataset --------------------------------
ybar1, ybar2 = 0.8, 2.5
a1 = oracle_posterior_mean(model, ybar1)
a12 = oracle_posterior_mean(model, ybar1, ybar2)
retro = (a12 - a1) ** 2
pro = oracle_prospective_evsi(model)
print(f"Bayes action without the second block: {a1:.4f}")
print(f"Bayes action with it:                  {a12:.4f}")
print(f"retrospective EVSI = {retro:.4f}")
print(f"prospective EVSI   = {pro:.4f}")
print(f"EVOIR = {retro / pro:.2f}  "
      f"(calibration p = {evoir_calibration_p(retro / pro, 1):.4f})")
print("The second block sits 2.5 posterior-SDs out, so it moved the "
      "action about\nfour times as much as expected.\n")

# --- fact 1: the ratio has mean one ----------------------------------------
retro_r, pro_r, ratio = simulate_replications(model, seed=1, n_reps=20000)
se = ratio.std(ddof=1) / np.sqrt(len(ratio))
print(f"mean EVOIR over 20000 replications: {ratio.mean():.4f} "
      f"(SE {se:.4f})")

# --- fact 2: p * EVOIR is chi-square(p) ------------------------------------
ks = stats.kstest(ratio, "chi2", args=(1,))
print(f"KS test of EVOIR vs chi-square(1): statistic {ks.statistic:.4f}, "
      f"p-value {ks.pvalue:.3f}")
q = np.quantile(ratio, [0.5, 0.9, 0.99])
t = stats.chi2(1).ppf([0.5, 0.9, 0.99])
print("quantiles (simulated vs chi-square):",
      ", ".join(f"{a:.2f}/{b:.2f}" for a, b in zip(q, t)))

# --- the same checks, packaged as a report ---------------------------------
print()
print(run_calibration(model, n_reps=5000, seed=2, p_dim=2).as_text())
