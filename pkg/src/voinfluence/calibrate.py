"""Simulation checks of the distributional claims behind EVOIR.

Two facts are verified by simulation in the conjugate oracle: the ratio
has mean one (law of total expectation), and in the Gaussian case
``p * EVOIR`` is chi-square with ``p`` degrees of freedom.  Dimensions
above one are built from independent scalar oracles with equal expected
influence, which keeps the chi-square law exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .oracle import ConjugateModel, simulate_replications

__all__ = ["CalibrationReport", "run_calibration"]


@dataclass(frozen=True)
class CalibrationReport:
    n_reps: int
    p_dim: int
    mean_evoir: float
    se_mean: float
    mean_ok: bool
    ks_statistic: float
    ks_pvalue: float
    ks_ok: bool
    ks_level: float

    def as_text(self) -> str:
        lines = [
            "EVOIR calibration report",
            f"replications: {self.n_reps}",
            f"target dimension: {self.p_dim}",
            f"mean EVOIR: {self.mean_evoir:.6f} (SE {self.se_mean:.6f})",
            f"mean-one check (|mean - 1| <= 3 SE): "
            f"{'PASS' if self.mean_ok else 'FAIL'}",
            f"KS statistic, p*EVOIR vs chi-square({self.p_dim}): "
            f"{self.ks_statistic:.6f}",
            f"KS p-value: {self.ks_pvalue:.6f}",
            f"KS check at level {self.ks_level}: "
            f"{'PASS' if self.ks_ok else 'FAIL'}",
        ]
        return "\n".join(lines) + "\n"


def run_calibration(model: ConjugateModel, n_reps: int, seed: int,
                    p_dim: int = 1, ks_level: float = 0.01
                    ) -> CalibrationReport:
    """Simulate EVOIR replications and test both distributional claims.

    Each replication draws the parameter and both data blocks afresh; for
    ``p_dim`` > 1 the losses of ``p_dim`` independent copies are summed.
    """
    if n_reps < 2:
        raise ValueError("need at least 2 replications")
    if p_dim < 1:
        raise ValueError("p_dim must be at least 1")
    seeds = np.random.SeedSequence(seed).spawn(p_dim)
    retro = np.zeros(n_reps)
    pro = np.zeros(n_reps)
    for comp_seed in seeds:
        r, p, _ = simulate_replications(
            model, int(comp_seed.generate_state(1)[0]), n_reps)
        retro += r
        pro += p
    ratio = retro / pro

    mean = float(ratio.mean())
    se = float(ratio.std(ddof=1) / np.sqrt(n_reps))
    ks_stat, ks_p = stats.kstest(p_dim * ratio, "chi2", args=(p_dim,))
    return CalibrationReport(
        n_reps=n_reps, p_dim=p_dim, mean_evoir=mean, se_mean=se,
        mean_ok=abs(mean - 1.0) <= 3 * se,
        ks_statistic=float(ks_stat), ks_pvalue=float(ks_p),
        ks_ok=ks_p > ks_level, ks_level=ks_level)
