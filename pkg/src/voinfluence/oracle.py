"""Analytic normal-normal oracle with known observation variance.

A scalar conjugate model in which both influence measures have closed
forms, used to validate every Monte Carlo estimator in the package.  The
data are split into an already-observed block of ``n1`` observations and a
candidate block of ``n2`` observations whose influence is being assessed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConjugateModel",
    "oracle_posterior_mean",
    "oracle_posterior_var",
    "oracle_prospective_evsi",
    "oracle_simulate_replication",
    "simulate_replications",
]


@dataclass(frozen=True)
class ConjugateModel:
    """Normal prior, normal likelihood, known observation variance.

    Infinite-variance limits are expressed through explicit flags rather
    than sentinel values: ``flat_prior`` sends the prior variance to
    infinity (requires ``n1 >= 1`` for a proper interim posterior) and
    ``worthless_data`` sends the observation variance to infinity, making
    the candidate block carry no information.
    """

    prior_mean: float = 0.0
    prior_var: float = 1.0
    obs_var: float = 1.0
    n1: int = 1
    n2: int = 1
    flat_prior: bool = False
    worthless_data: bool = False

    def __post_init__(self):
        if self.prior_var <= 0:
            raise ValueError("prior_var must be positive")
        if self.obs_var <= 0:
            raise ValueError("obs_var must be positive")
        if self.n1 < 0 or self.n2 < 1:
            raise ValueError("need n1 >= 0 and n2 >= 1")
        if self.flat_prior and self.n1 < 1:
            raise ValueError("flat prior requires at least one observation in Y1")

    @property
    def prior_precision(self) -> float:
        return 0.0 if self.flat_prior else 1.0 / self.prior_var

    @property
    def obs_precision(self) -> float:
        return 0.0 if self.worthless_data else 1.0 / self.obs_var


def _interim_precision(model: ConjugateModel) -> float:
    return model.prior_precision + model.n1 * model.obs_precision


def oracle_posterior_mean(model: ConjugateModel, ybar1: float,
                          ybar2: float | None = None) -> float:
    """Precision-weighted posterior mean; with ``ybar2`` absent this is the
    Bayes action based on the first block alone."""
    if model.n1 > 0 and not np.isfinite(ybar1):
        raise ValueError("ybar1 must be finite")
    num = model.prior_precision * model.prior_mean
    den = model.prior_precision
    if model.n1 > 0:
        num += model.n1 * model.obs_precision * ybar1
        den += model.n1 * model.obs_precision
    if ybar2 is not None:
        if not np.isfinite(ybar2):
            raise ValueError("ybar2 must be finite")
        num += model.n2 * model.obs_precision * ybar2
        den += model.n2 * model.obs_precision
    if den <= 0:
        raise ValueError("posterior is improper for this configuration")
    return num / den


def oracle_posterior_var(model: ConjugateModel, with_second: bool = False) -> float:
    """Posterior variance of the mean parameter given the first block,
    optionally also the second."""
    den = _interim_precision(model)
    if with_second:
        den += model.n2 * model.obs_precision
    if den <= 0:
        raise ValueError("posterior is improper for this configuration")
    return 1.0 / den


def oracle_prospective_evsi(model: ConjugateModel) -> float:
    """Closed-form expected influence of the candidate block.

    The joint posterior mean puts weight ``w`` on the candidate block's
    sample mean, whose predictive variance given the first block is
    ``obs_var / n2 + var(theta | Y1)``; the Bayes action therefore has
    conditional variance ``w^2 * (obs_var / n2 + v1)``.
    """
    if model.worthless_data:
        return 0.0
    prec1 = _interim_precision(model)
    if prec1 <= 0:
        raise ValueError("interim posterior is improper")
    prec2 = model.n2 * model.obs_precision
    w = prec2 / (prec1 + prec2)
    v1 = 1.0 / prec1
    return w * w * (model.obs_var / model.n2 + v1)


def oracle_simulate_replication(model: ConjugateModel, seed: int
                                ) -> tuple[float, float, float]:
    """One simulated replication of the influence triple.

    Draws the mean parameter from the prior and both data blocks from the
    model, then returns the exact (retrospective, prospective, evoir)
    triple for that realization.  Deterministic given the seed.
    """
    retro, pro, ratio = simulate_replications(model, seed, 1)
    return float(retro[0]), float(pro[0]), float(ratio[0])


def simulate_replications(model: ConjugateModel, seed: int, n_reps: int
                          ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized batch of replications; replication ``i`` of a loop from
    ``seed`` matches element ``i`` here only when generated in one batch,
    so parallel runs should split seeds as ``base + i``."""
    if model.flat_prior:
        raise ValueError("cannot simulate from an improper prior")
    if n_reps < 1:
        raise ValueError("need at least one replication")
    rng = np.random.default_rng(seed)
    theta = rng.normal(model.prior_mean, np.sqrt(model.prior_var), size=n_reps)
    if model.n1 > 0:
        ybar1 = rng.normal(theta, np.sqrt(model.obs_var / model.n1))
    else:
        ybar1 = np.full(n_reps, np.nan)
    ybar2 = rng.normal(theta, np.sqrt(model.obs_var / model.n2))

    prec1 = _interim_precision(model)
    prec2 = model.n2 * model.obs_precision
    num1 = model.prior_precision * model.prior_mean
    if model.n1 > 0:
        num1 = num1 + model.n1 * model.obs_precision * ybar1
    a1 = num1 / prec1 if prec1 > 0 else np.full(n_reps, np.nan)
    a12 = (num1 + prec2 * ybar2) / (prec1 + prec2)

    retro = (a1 - a12) ** 2
    pro = np.full(n_reps, oracle_prospective_evsi(model))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pro > 0, retro / pro, np.nan)
    return retro, pro, ratio
