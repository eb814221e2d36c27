"""Exact influence analysis for the noninformative-prior normal linear model.

All three influence measures have closed forms here: the retrospective
value is an unscaled Cook's distance, the prospective value is a leverage
curve scaled by the leave-one-out variance estimate, and their ratio is a
squared externally studentized residual up to a degrees-of-freedom factor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .loss import InfluenceRecord, LossSpec, evoir_calibration_p

__all__ = [
    "RegressionData",
    "RegressionFit",
    "RankDeficientError",
    "IllConditionedWarning",
    "fit",
    "loo_leverage_identity",
    "leave_one_out_fit",
    "retrospective_evsi_exact",
    "cooks_distance",
    "prospective_evsi_exact",
    "evoir_exact",
    "external_studentized_residual",
    "influence_table",
]

COND_WARN_THRESHOLD = 1e10


class RankDeficientError(ValueError):
    """Design matrix is (numerically) rank deficient."""


class IllConditionedWarning(UserWarning):
    """Gram matrix condition number exceeds the reliability threshold."""


@dataclass(frozen=True)
class RegressionData:
    """Design matrix, response, and row labels.

    The design must have full column rank and at least p + 4 rows so the
    one-step-ahead predictive variance is finite.
    """

    x: np.ndarray
    y: np.ndarray
    row_labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.shape[0] != y.shape[0]:
            raise ValueError("X and Y have different numbers of rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("design or response contains non-finite values")
        n, p = x.shape
        if n <= p + 3:
            raise ValueError(
                f"need n > p + 3 rows for finite predictive variance "
                f"(got n={n}, p={p})")
        labels = list(self.row_labels) if self.row_labels else [
            str(i) for i in range(n)]
        if len(labels) != n:
            raise ValueError("row_labels length does not match data")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "row_labels", labels)
        _check_rank(x)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


def _check_rank(x: np.ndarray) -> None:
    # pivoted QR exposes which column breaks linear independence
    _, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(x.shape) * np.finfo(float).eps
    bad = np.nonzero(diag <= tol)[0]
    if bad.size:
        raise RankDeficientError(
            f"design matrix is rank deficient: column {piv[bad[0]]} is "
            "linearly dependent on earlier columns")


@dataclass(frozen=True)
class RegressionFit:
    """Least-squares / posterior-mean summaries of a regression dataset."""

    beta_hat: np.ndarray
    s2: float
    gram_inv: np.ndarray
    hat_diag: np.ndarray
    n: int
    p: int
    residuals: np.ndarray


def fit(data: RegressionData) -> RegressionFit:
    """Fit by economy QR; residual variance uses the n - p divisor."""
    x, y = data.x, data.y
    n, p = x.shape
    q, r = np.linalg.qr(x)
    cond_gram = (np.linalg.cond(r)) ** 2
    if cond_gram > COND_WARN_THRESHOLD:
        warnings.warn(
            f"Gram matrix condition number {cond_gram:.2e} exceeds "
            f"{COND_WARN_THRESHOLD:.0e}; results may lose precision",
            IllConditionedWarning, stacklevel=2)
    beta = scipy.linalg.solve_triangular(r, q.T @ y)
    resid = y - x @ beta
    s2 = float(resid @ resid / (n - p))
    r_inv = scipy.linalg.solve_triangular(r, np.eye(p))
    gram_inv = r_inv @ r_inv.T
    hat_diag = np.sum(q ** 2, axis=1)
    return RegressionFit(beta_hat=beta, s2=s2, gram_inv=gram_inv,
                         hat_diag=hat_diag, n=n, p=p, residuals=resid)


def loo_leverage_identity(fitted: RegressionFit, i: int) -> float:
    """Leverage of row i measured against the leave-i-out Gram matrix,
    h_ii / (1 - h_ii) by the rank-one downdate identity."""
    h = fitted.hat_diag[i]
    if h >= 1.0 - 1e-12:
        raise ValueError(f"row {i} is an exact-fit point (h_ii = {h:.6f})")
    return float(h / (1.0 - h))


def leave_one_out_fit(data: RegressionData, i: int,
                      fitted: RegressionFit | None = None
                      ) -> tuple[np.ndarray, float]:
    """Coefficients and residual variance with row i deleted.

    Uses the rank-one downdate of the full fit; falls back to a brute-force
    refit when 1 - h_ii is too small for the downdate to be trustworthy.
    """
    if fitted is None:
        fitted = fit(data)
    h = fitted.hat_diag[i]
    n, p = fitted.n, fitted.p
    if n - 1 <= p:
        raise ValueError("deleting a row would leave fewer rows than columns")
    if 1.0 - h < 1e-8:
        keep = np.arange(n) != i
        sub = RegressionData.__new__(RegressionData)
        object.__setattr__(sub, "x", data.x[keep])
        object.__setattr__(sub, "y", data.y[keep])
        object.__setattr__(sub, "row_labels",
                           [data.row_labels[j] for j in range(n) if keep[j]])
        _check_rank(sub.x)
        subfit = fit(sub)
        return subfit.beta_hat, subfit.s2
    e = fitted.residuals[i]
    beta_loo = fitted.beta_hat - fitted.gram_inv @ data.x[i] * (e / (1.0 - h))
    rss_loo = (n - p) * fitted.s2 - e * e / (1.0 - h)
    s2_loo = max(rss_loo, 0.0) / (n - 1 - p)
    return beta_loo, float(s2_loo)


def retrospective_evsi_exact(data: RegressionData, i: int,
                             fitted: RegressionFit | None = None) -> float:
    """Observed influence of row i under the prediction loss Q = X^T X:
    h_ii e_i^2 / (1 - h_ii)^2."""
    if fitted is None:
        fitted = fit(data)
    h = fitted.hat_diag[i]
    if h >= 1.0 - 1e-12:
        raise ValueError(f"row {i} is an exact-fit point")
    e = fitted.residuals[i]
    return float(h * e * e / (1.0 - h) ** 2)


def cooks_distance(data: RegressionData, i: int,
                   fitted: RegressionFit | None = None) -> float:
    """Classical Cook's distance: the retrospective value rescaled by p S^2."""
    if fitted is None:
        fitted = fit(data)
    return retrospective_evsi_exact(data, i, fitted) / (fitted.p * fitted.s2)


def prospective_evsi_exact(data: RegressionData, i: int,
                           fitted: RegressionFit | None = None) -> float:
    """Expected influence of row i before observing its response:
    (n-p-1)/(n-p-3) * S^2_{-i} * h_ii / (1 - h_ii)."""
    if fitted is None:
        fitted = fit(data)
    n, p = fitted.n, fitted.p
    h = fitted.hat_diag[i]
    if h >= 1.0 - 1e-12:
        raise ValueError(f"row {i} is an exact-fit point")
    _, s2_loo = leave_one_out_fit(data, i, fitted)
    return float((n - p - 1) / (n - p - 3) * s2_loo * h / (1.0 - h))


def external_studentized_residual(data: RegressionData, i: int,
                                  fitted: RegressionFit | None = None) -> float:
    """Residual of row i scaled by the leave-i-out error estimate."""
    if fitted is None:
        fitted = fit(data)
    h = fitted.hat_diag[i]
    if h >= 1.0 - 1e-12:
        raise ValueError(f"row {i} is an exact-fit point")
    _, s2_loo = leave_one_out_fit(data, i, fitted)
    if s2_loo <= 0:
        raise ValueError(f"leave-one-out variance is degenerate for row {i}")
    return float(fitted.residuals[i] / np.sqrt(s2_loo * (1.0 - h)))


def evoir_exact(data: RegressionData, i: int,
                fitted: RegressionFit | None = None) -> float:
    """Ratio of observed to expected influence for row i."""
    if fitted is None:
        fitted = fit(data)
    pro = prospective_evsi_exact(data, i, fitted)
    if pro <= 0:
        raise ValueError(f"prospective EVSI is zero for row {i}")
    return retrospective_evsi_exact(data, i, fitted) / pro


def prediction_loss(data: RegressionData) -> LossSpec:
    """The loss used throughout this module: squared error of the fitted
    values, i.e. Q = X^T X with factor A = X."""
    return LossSpec(data.x)


def influence_table(data: RegressionData) -> list[InfluenceRecord]:
    """Per-row influence records with chi-square calibration p-values."""
    fitted = fit(data)
    records = []
    for i in range(data.n):
        retro = retrospective_evsi_exact(data, i, fitted)
        pro = prospective_evsi_exact(data, i, fitted)
        if pro <= 0:
            records.append(InfluenceRecord(
                unit_id=data.row_labels[i], retrospective=retro,
                prospective=pro, evoir=None, degenerate=True))
            continue
        ratio = retro / pro
        records.append(InfluenceRecord(
            unit_id=data.row_labels[i], retrospective=retro, prospective=pro,
            evoir=ratio, calib_p=evoir_calibration_p(ratio, fitted.p)))
    return records
