"""Model-agnostic Monte Carlo estimation of the influence measures.

Any model exposing the ``InfluenceSampler`` contract can be analyzed: the
retrospective value needs posterior samples with and without the unit, the
prospective value needs simulated completions of the unit's data.  The
naive prospective estimator reruns the posterior for every completion; the
kNN path replaces that inner loop with a nearest-neighbor regression of
the target draws on the simulated data blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .loss import LossSpec, bayes_action, quadratic_loss

__all__ = [
    "InfluenceSampler",
    "MetaModelConfig",
    "SamplerError",
    "retrospective_from_draws",
    "retrospective_evsi_mc",
    "prospective_evsi_naive",
    "prospective_evsi_knn",
    "knn_regress",
]


class SamplerError(RuntimeError):
    """A sampler failed while estimating influence for a unit."""


@runtime_checkable
class InfluenceSampler(Protocol):
    """Behavioral contract a model must satisfy.

    All methods must be deterministic given the seed and return targets of
    a fixed dimension.
    """

    def posterior_draws(self, exclude_unit: str | None, seed: int,
                        n: int) -> np.ndarray:
        """(n, p) draws of the decision target given the data, optionally
        with one unit's data removed."""
        ...

    def predictive_draws(self, unit: str, seed: int, n: int
                         ) -> tuple[np.ndarray, np.ndarray]:
        """n joint draws of (simulated data block for the unit, target),
        conditional on the data without that unit.  Returns (blocks, targets)
        with shapes (n, d) and (n, p); each row comes from one joint draw."""
        ...

    def completed_posterior_draws(self, unit: str, block: np.ndarray,
                                  seed: int, n: int) -> np.ndarray:
        """(n, p) draws of the target given the data without the unit plus
        one simulated completion ``block`` for it.  Needed by the naive
        nested estimator only."""
        ...


@dataclass(frozen=True)
class MetaModelConfig:
    """Tuning for the prospective estimators.

    ``n_outer`` is the number of simulated completions, ``n_inner`` the
    posterior sample size per completion on the naive path.  ``k_neighbors``
    defaults to ceil(sqrt(n_outer)) when left unset.
    """

    n_outer: int = 2000
    n_inner: int = 500
    k_neighbors: int | None = None
    standardize: bool = True
    n_replicates: int = 10
    failure_budget: float = 0.05

    def __post_init__(self):
        if self.n_outer < 2 or self.n_inner < 2:
            raise ValueError("n_outer and n_inner must both be at least 2")
        k = self.resolved_k
        if k < 1 or k > self.n_outer:
            raise ValueError("need 1 <= k_neighbors <= n_outer")
        if self.n_replicates < 2:
            raise ValueError("need at least 2 replicates for an MCSE")

    @property
    def resolved_k(self) -> int:
        if self.k_neighbors is not None:
            return self.k_neighbors
        return int(np.ceil(np.sqrt(self.n_outer)))


def _seed_stream(base_seed: int, n: int) -> list[int]:
    # stable per-task seeds derived from the base; wide spacing avoids
    # accidental stream overlap for samplers that use legacy generators
    ss = np.random.SeedSequence(base_seed)
    return [int(s.generate_state(1)[0]) for s in ss.spawn(n)]


def retrospective_from_draws(with_draws, without_draws, loss: LossSpec,
                             n_groups: int = 10) -> tuple[float, float]:
    """Observed influence from two pre-computed posterior samples.

    The point estimate uses the full pooled means; the MCSE replicates the
    estimate over ``n_groups`` disjoint, equally sized groups of draws.
    """
    with_draws = np.atleast_2d(np.asarray(with_draws, dtype=float))
    without_draws = np.atleast_2d(np.asarray(without_draws, dtype=float))
    if n_groups < 2:
        raise ValueError("need at least 2 groups")
    estimate = quadratic_loss(bayes_action(without_draws),
                              bayes_action(with_draws), loss)
    per_group = np.array([
        quadratic_loss(bayes_action(wo), bayes_action(wi), loss)
        for wi, wo in zip(np.array_split(with_draws, n_groups),
                          np.array_split(without_draws, n_groups))])
    mcse = float(per_group.std(ddof=1) / np.sqrt(n_groups))
    return float(estimate), mcse


def retrospective_evsi_mc(sampler: InfluenceSampler, unit: str,
                          loss: LossSpec, seed: int, n: int,
                          n_groups: int = 10) -> tuple[float, float]:
    """Observed influence of ``unit`` from posterior samples.

    The estimate is the quadratic loss between the Bayes actions computed
    from pooled draws with and without the unit; the MCSE comes from
    replicating the whole estimate over ``n_groups`` disjoint seed groups.
    """
    if n < 2:
        raise ValueError("need at least 2 posterior draws per group")
    if n_groups < 2:
        raise ValueError("need at least 2 seed groups")
    seeds = _seed_stream(seed, 2 * n_groups)
    with_groups, without_groups = [], []
    for g in range(n_groups):
        try:
            with_groups.append(sampler.posterior_draws(None, seeds[2 * g], n))
            without_groups.append(
                sampler.posterior_draws(unit, seeds[2 * g + 1], n))
        except Exception as exc:
            raise SamplerError(f"sampler failed for unit {unit!r}") from exc
    a_with = bayes_action(np.vstack(with_groups))
    a_without = bayes_action(np.vstack(without_groups))
    estimate = quadratic_loss(a_without, a_with, loss)

    per_group = np.array([
        quadratic_loss(bayes_action(wo), bayes_action(wi), loss)
        for wi, wo in zip(with_groups, without_groups)])
    mcse = float(per_group.std(ddof=1) / np.sqrt(n_groups))
    return float(estimate), mcse


def prospective_evsi_naive(sampler: InfluenceSampler, unit: str,
                           loss: LossSpec, config: MetaModelConfig,
                           seed: int) -> tuple[float, float]:
    """Nested Monte Carlo estimate of the expected influence of ``unit``.

    For each simulated completion of the unit's data the posterior is
    re-sampled and the squared distance between the completed-data Bayes
    action and the without-unit Bayes action is averaged.  The MCSE uses
    20 batch means over the outer completions.
    """
    n_outer, n_inner = config.n_outer, config.n_inner
    seeds = _seed_stream(seed, n_outer + 1)
    try:
        blocks, targets = sampler.predictive_draws(unit, seeds[0], n_outer)
    except Exception as exc:
        raise SamplerError(f"sampler failed for unit {unit!r}") from exc
    a_without = bayes_action(targets)

    sq = np.full(n_outer, np.nan)
    failures = 0
    budget = int(np.floor(config.failure_budget * n_outer))
    for k in range(n_outer):
        try:
            inner = sampler.completed_posterior_draws(
                unit, blocks[k], seeds[k + 1], n_inner)
            sq[k] = quadratic_loss(a_without, bayes_action(inner), loss)
        except Exception:
            failures += 1
            if failures > budget:
                raise SamplerError(
                    f"more than {config.failure_budget:.0%} of inner runs "
                    f"failed for unit {unit!r} ({failures}/{k + 1})")
    good = sq[np.isfinite(sq)]
    estimate = float(good.mean())
    b = min(20, good.size // 2)
    batch_means = np.array([c.mean() for c in np.array_split(good, b)])
    mcse = float(batch_means.std(ddof=1) / np.sqrt(b))
    return estimate, mcse


def prospective_evsi_knn(sampler: InfluenceSampler, unit: str,
                         loss: LossSpec, config: MetaModelConfig,
                         seed: int) -> tuple[float, float]:
    """kNN meta-model estimate of the expected influence of ``unit``.

    The inner posterior loop of the naive estimator is replaced by a
    k-nearest-neighbor regression of the target draws on the simulated
    data blocks; the fitted values stand in for the completed-data Bayes
    actions.  MCSE comes from replicating the whole estimate over disjoint
    seed groups.
    """
    reps = config.n_replicates
    seeds = _seed_stream(seed, reps)
    estimates = np.empty(reps)
    for r in range(reps):
        estimates[r] = _knn_estimate_once(sampler, unit, loss, config,
                                          seeds[r])
    return float(estimates.mean()), float(estimates.std(ddof=1) / np.sqrt(reps))


def _knn_estimate_once(sampler, unit, loss, config, seed) -> float:
    n_outer = config.n_outer
    try:
        blocks, targets = sampler.predictive_draws(unit, seed, n_outer)
    except Exception as exc:
        raise SamplerError(f"sampler failed for unit {unit!r}") from exc
    blocks = np.atleast_2d(np.asarray(blocks, dtype=float))
    if np.allclose(blocks, blocks[0]):
        raise ValueError(
            f"all simulated data blocks for unit {unit!r} are identical; "
            "the meta-model predictor space is degenerate")
    a_without = bayes_action(targets)
    fitted = knn_regress(blocks, targets, blocks, config.resolved_k,
                         standardize=config.standardize)
    diffs = (fitted - a_without) @ loss.factor.T
    return float(np.mean(np.sum(diffs ** 2, axis=1)))


def knn_regress(inputs, targets, queries, k: int,
                standardize: bool = True) -> np.ndarray:
    """Unweighted k-nearest-neighbor regression under Euclidean distance.

    Distances are computed on optionally z-scored inputs; ties are broken
    by input index order.  ``queries`` may be a single vector or a matrix
    of query rows.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    single = np.asarray(queries).ndim == 1
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    n = inputs.shape[0]
    if targets.shape[0] != n:
        raise ValueError("inputs and targets have different lengths")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got k={k}")

    if standardize:
        mean = inputs.mean(axis=0)
        sd = inputs.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        inputs = (inputs - mean) / sd
        queries = (queries - mean) / sd

    # squared distances, chunked over queries to bound memory
    out = np.empty((queries.shape[0], targets.shape[1]))
    chunk = max(1, 2_000_000 // max(n, 1))
    for lo in range(0, queries.shape[0], chunk):
        q = queries[lo:lo + chunk]
        d2 = (np.sum(q ** 2, axis=1)[:, None]
              - 2.0 * q @ inputs.T + np.sum(inputs ** 2, axis=1)[None, :])
        # stable sort keeps equidistant neighbors in input index order
        idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out[lo:lo + chunk] = targets[idx].mean(axis=1)
    return out[0] if single else out
