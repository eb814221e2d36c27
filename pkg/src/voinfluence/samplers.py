"""Sampler-contract adapters for the analytically tractable models.

These wrap the conjugate oracle and the noninformative normal linear model
in the ``InfluenceSampler`` contract so the Monte Carlo estimators can be
checked against exact answers.
"""

from __future__ import annotations

import numpy as np

from .linreg import RegressionData, fit
from .oracle import (ConjugateModel, oracle_posterior_mean,
                     oracle_posterior_var)

__all__ = ["ConjugateSampler", "LinearModelSampler"]


class ConjugateSampler:
    """Oracle model wrapped in the sampler contract.

    The unit under scrutiny is the second data block, identified as
    ``"y2"``.  The decision target is the scalar mean parameter.
    """

    UNIT = "y2"

    def __init__(self, model: ConjugateModel, ybar1: float, ybar2: float):
        self.model = model
        self.ybar1 = float(ybar1)
        self.ybar2 = float(ybar2)

    def _check_unit(self, unit):
        if unit != self.UNIT:
            raise KeyError(f"unknown unit {unit!r}; this model has one "
                           f"deletable block, {self.UNIT!r}")

    def posterior_draws(self, exclude_unit, seed, n):
        rng = np.random.default_rng(seed)
        if exclude_unit is None:
            mean = oracle_posterior_mean(self.model, self.ybar1, self.ybar2)
            var = oracle_posterior_var(self.model, with_second=True)
        else:
            self._check_unit(exclude_unit)
            mean = oracle_posterior_mean(self.model, self.ybar1)
            var = oracle_posterior_var(self.model, with_second=False)
        return rng.normal(mean, np.sqrt(var), size=(n, 1))

    def predictive_draws(self, unit, seed, n):
        self._check_unit(unit)
        rng = np.random.default_rng(seed)
        mean1 = oracle_posterior_mean(self.model, self.ybar1)
        var1 = oracle_posterior_var(self.model, with_second=False)
        theta = rng.normal(mean1, np.sqrt(var1), size=n)
        if self.model.worthless_data:
            # infinite observation variance: simulated means carry no signal
            ybar2 = np.zeros(n)
        else:
            ybar2 = rng.normal(theta, np.sqrt(self.model.obs_var / self.model.n2))
        return ybar2[:, None], theta[:, None]

    def completed_posterior_draws(self, unit, block, seed, n):
        self._check_unit(unit)
        rng = np.random.default_rng(seed)
        ybar2 = float(np.asarray(block).reshape(-1)[0])
        mean = oracle_posterior_mean(self.model, self.ybar1, ybar2)
        var = oracle_posterior_var(self.model, with_second=True)
        return rng.normal(mean, np.sqrt(var), size=(n, 1))


class LinearModelSampler:
    """Conjugate posterior sampler for the noninformative normal linear model.

    Units are row labels; the decision target is the coefficient vector.
    The posterior is normal-inverse-chi-square: the error variance is drawn
    as (n - p) S^2 / chi2_{n-p} and the coefficients as a Gaussian around
    the least-squares solution.  Completions replace the excluded row's
    response, so the design (and the Gram factorization) never changes.
    """

    def __init__(self, data: RegressionData):
        self.data = data
        self._fit = fit(data)
        self._gram_chol = np.linalg.cholesky(self._fit.gram_inv)
        self._index = {lbl: i for i, lbl in enumerate(data.row_labels)}

    def _row(self, unit: str) -> int:
        try:
            return self._index[unit]
        except KeyError:
            raise KeyError(f"unknown row label {unit!r}") from None

    def _posterior_summary(self, y: np.ndarray, exclude: int | None):
        x = self.data.x
        n, p = x.shape
        if exclude is None:
            xty = x.T @ y
            yty = float(y @ y)
            df = n - p
        else:
            keep = np.arange(n) != exclude
            xs, ys = x[keep], y[keep]
            xty = xs.T @ ys
            yty = float(ys @ ys)
            # leave-one-out Gram inverse by rank-one update
            g = self._fit.gram_inv
            xi = x[exclude]
            gxi = g @ xi
            h = float(xi @ gxi)
            gram_inv = g + np.outer(gxi, gxi) / (1.0 - h)
            df = n - 1 - p
            beta = gram_inv @ xty
            rss = yty - float(beta @ xty)
            return beta, max(rss, 0.0) / df, np.linalg.cholesky(gram_inv), df
        beta = self._fit.gram_inv @ xty
        rss = yty - float(beta @ xty)
        return beta, max(rss, 0.0) / df, self._gram_chol, df

    def _draw(self, rng, beta, s2, chol, df, n):
        sigma2 = df * s2 / rng.chisquare(df, size=n)
        z = rng.standard_normal((n, len(beta)))
        return beta + np.sqrt(sigma2)[:, None] * (z @ chol.T)

    def posterior_draws(self, exclude_unit, seed, n):
        rng = np.random.default_rng(seed)
        exclude = None if exclude_unit is None else self._row(exclude_unit)
        beta, s2, chol, df = self._posterior_summary(self.data.y, exclude)
        return self._draw(rng, beta, s2, chol, df, n)

    def predictive_draws(self, unit, seed, n):
        rng = np.random.default_rng(seed)
        i = self._row(unit)
        beta, s2, chol, df = self._posterior_summary(self.data.y, i)
        # joint draw: (sigma2, beta) from the without-row posterior, then the
        # row's response from the same parameter draw
        sigma2 = df * s2 / rng.chisquare(df, size=n)
        z = rng.standard_normal((n, len(beta)))
        draws = beta + np.sqrt(sigma2)[:, None] * (z @ chol.T)
        y_new = draws @ self.data.x[i] + rng.standard_normal(n) * np.sqrt(sigma2)
        return y_new[:, None], draws

    def completed_posterior_draws(self, unit, block, seed, n):
        rng = np.random.default_rng(seed)
        i = self._row(unit)
        y = self.data.y.copy()
        y[i] = float(np.asarray(block).reshape(-1)[0])
        beta, s2, chol, df = self._posterior_summary(y, None)
        return self._draw(rng, beta, s2, chol, df, n)
