"""Quadratic-loss decision machinery and the three influence measures.

The influence of a block of data on a decision is measured by three
quantities: the retrospective expected value of sample information (how far
the Bayes action actually moved when the block was included), the
prospective expected value of sample information (how far it was expected
to move), and their ratio, the expected value of information ratio (EVOIR),
which has mean one and flags blocks that moved the estimate more than
expected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "LossSpec",
    "InfluenceRecord",
    "identity_loss",
    "quadratic_loss",
    "bayes_action",
    "retrospective_evsi",
    "prospective_evsi_mc",
    "evoir",
    "evoir_calibration_p",
]


@dataclass(frozen=True)
class LossSpec:
    """Quadratic loss ``(a - t)^T Q (a - t)`` specified through a factor A.

    ``Q = A^T A`` must be positive definite.  Working with the factor keeps
    every loss evaluation a plain squared Euclidean norm of ``A (a - t)``.
    """

    factor: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.factor, dtype=float)
        if a.ndim != 2:
            raise ValueError("loss factor must be a 2-D matrix")
        if not np.all(np.isfinite(a)):
            raise ValueError("loss factor contains non-finite entries")
        object.__setattr__(self, "factor", a)
        # positive definiteness of Q = A^T A, checked once at construction
        try:
            np.linalg.cholesky(self.q)
        except np.linalg.LinAlgError as exc:
            raise ValueError("Q = A^T A is not positive definite") from exc

    @property
    def dim(self) -> int:
        return self.factor.shape[1]

    @property
    def q(self) -> np.ndarray:
        return self.factor.T @ self.factor


def identity_loss(dim: int) -> LossSpec:
    """Plain squared-error loss in ``dim`` dimensions (Q = I)."""
    return LossSpec(np.eye(dim))


@dataclass(frozen=True)
class InfluenceRecord:
    """Per-unit influence summary.

    ``evoir`` is ``None`` when the prospective value is degenerate (zero),
    in which case ``degenerate`` is set instead of reporting an infinity.
    """

    unit_id: str
    retrospective: float
    prospective: float
    evoir: float | None
    calib_p: float | None = None
    retro_mcse: float | None = None
    pro_mcse: float | None = None
    degenerate: bool = False

    def __post_init__(self):
        if self.retrospective < 0:
            raise ValueError("retrospective EVSI must be non-negative")
        if self.prospective < 0:
            raise ValueError("prospective EVSI must be non-negative")
        if not self.degenerate:
            if self.evoir is None or self.evoir < 0:
                raise ValueError("evoir must be a non-negative real")
            resid = abs(self.retrospective - self.prospective * self.evoir)
            if resid > 1e-12 * max(1.0, self.retrospective):
                raise ValueError(
                    "retrospective != prospective * evoir "
                    f"(residual {resid:.3e}) for unit {self.unit_id!r}"
                )


def _check_vector(v, dim: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != dim:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def quadratic_loss(a, theta, loss: LossSpec) -> float:
    """Squared distance ``(a - theta)^T Q (a - theta)`` in the Q metric."""
    a = _check_vector(a, loss.dim, "action")
    theta = _check_vector(theta, loss.dim, "theta")
    z = loss.factor @ (a - theta)
    return float(z @ z)


def bayes_action(draws) -> np.ndarray:
    """Optimal action under quadratic loss: the posterior mean.

    ``draws`` is an (n_draws, p) matrix of posterior samples of the decision
    target.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if draws.shape[0] < 1:
        raise ValueError("need at least one posterior draw")
    if not np.all(np.isfinite(draws)):
        raise ValueError("posterior draws contain non-finite entries")
    return draws.mean(axis=0)


def retrospective_evsi(a_without, a_with, loss: LossSpec) -> float:
    """Observed influence: squared Q-distance between the Bayes actions
    computed without and with the data block under scrutiny."""
    return quadratic_loss(a_without, a_with, loss)


def prospective_evsi_mc(conditional_action_draws, loss: LossSpec,
                        n_batches: int = 20) -> tuple[float, float]:
    """Expected influence from simulated completions of the data.

    Each row of ``conditional_action_draws`` is the Bayes action recomputed
    under one simulated completion.  Returns the trace of the sample
    covariance (unbiased, N-1 divisor) of the A-transformed draws, together
    with a batch-means Monte Carlo standard error.
    """
    draws = np.atleast_2d(np.asarray(conditional_action_draws, dtype=float))
    n = draws.shape[0]
    if n < 2:
        raise ValueError("need at least two conditional action draws")
    if draws.shape[1] != loss.dim:
        raise ValueError(
            f"draws have dimension {draws.shape[1]}, expected {loss.dim}")
    if not np.all(np.isfinite(draws)):
        raise ValueError("conditional action draws contain non-finite entries")

    z = draws @ loss.factor.T
    sq = np.sum((z - z.mean(axis=0)) ** 2, axis=1)  # per-draw squared distance
    scale = n / (n - 1)
    estimate = float(sq.mean() * scale)

    b = min(n_batches, n // 2)
    if b < 2:
        return estimate, float("nan")
    batch_means = np.array([chunk.mean() for chunk in np.array_split(sq, b)])
    mcse = float(batch_means.std(ddof=1) / np.sqrt(b) * scale)
    return estimate, mcse


def evoir(retro: float, pro: float) -> float:
    """Ratio of observed to expected influence; values above one flag data
    that moved the estimate more than expected."""
    if not np.isfinite(pro) or pro <= 0:
        raise ValueError("prospective EVSI must be positive and finite")
    if not np.isfinite(retro) or retro < 0:
        raise ValueError("retrospective EVSI must be non-negative and finite")
    return retro / pro


def evoir_calibration_p(evoir_value: float, p_dim: int) -> float:
    """Upper-tail probability of influence this extreme under the Gaussian
    calibration model, where ``p_dim * EVOIR`` is chi-square with ``p_dim``
    degrees of freedom."""
    if p_dim < 1 or int(p_dim) != p_dim:
        raise ValueError("p_dim must be a positive integer")
    if evoir_value < 0:
        raise ValueError("evoir must be non-negative")
    return float(stats.chi2.sf(p_dim * evoir_value, df=p_dim))
