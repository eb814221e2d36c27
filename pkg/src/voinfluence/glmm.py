"""Hierarchical binomial-logit model for multi-site prevalence surveys.

Sites report binomial test counts per survey year.  The logit prevalence
decomposes into an intercept, fixed region effects (first region pinned at
zero for identifiability), a cubic spline time trend, and Gaussian site
random effects.  The decision target is the region-by-year prevalence grid
evaluated at the center of the site-effect distribution.

Posterior sampling uses an adaptive random-walk Metropolis-within-Gibbs
scheme with a conjugate inverse-gamma update for the site-effect variance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.special import expit, gammaln

from .loss import InfluenceRecord, LossSpec, identity_loss
from .mc import MetaModelConfig, prospective_evsi_knn, prospective_evsi_naive, \
    retrospective_from_draws, _seed_stream

__all__ = [
    "ClinicObservation",
    "GlmmParams",
    "SplineBasis",
    "McmcResult",
    "McmcSettings",
    "GlmmInfluenceSampler",
    "spline_design",
    "log_posterior",
    "mcmc_sample",
    "predictive_site_draws",
    "site_influence",
]

PRIOR_IG_SHAPE = 0.1
PRIOR_IG_RATE = 0.1


@dataclass(frozen=True)
class ClinicObservation:
    """One site-year of testing data: ``positive`` out of ``tested``."""

    region: int
    site: str
    year: int
    tested: int
    positive: int

    def __post_init__(self):
        if self.tested < 0:
            raise ValueError("tested count must be non-negative")
        if not 0 <= self.positive <= self.tested:
            raise ValueError(
                f"need 0 <= positive <= tested at {self.site}/{self.year}")
        if self.region < 1:
            raise ValueError("regions are numbered from 1")


@dataclass(frozen=True)
class SplineBasis:
    """Cubic spline evaluations per survey year.

    ``matrix`` holds the retained columns (first basis function dropped);
    ``full`` keeps all four for diagnostics.  Rows are keyed by ``years``.
    """

    years: tuple[int, ...]
    matrix: np.ndarray
    full: np.ndarray

    def row(self, year: int) -> np.ndarray:
        return self.matrix[self.years.index(year)]


def spline_design(years) -> SplineBasis:
    """Cubic B-spline basis over the normalized year range.

    Zero interior knots give four basis functions on [0, 1]; the first is
    dropped so the basis does not confound the model intercept, leaving a
    3-column design.
    """
    years = sorted(set(int(y) for y in years))
    if len(years) < 2:
        raise ValueError("need at least 2 distinct years")
    lo, hi = years[0], years[-1]
    x = (np.asarray(years, dtype=float) - lo) / (hi - lo)
    knots = np.array([0.0] * 4 + [1.0] * 4)
    full = BSpline.design_matrix(x, knots, 3).toarray()
    return SplineBasis(years=tuple(years), matrix=full[:, 1:], full=full)


@dataclass(frozen=True)
class GlmmParams:
    """One parameter state; ``alpha[0]`` is pinned at zero."""

    mu: float
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    tau2: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float))
        if self.alpha[0] != 0.0:
            raise ValueError("alpha[0] must be zero (identifiability)")
        if self.tau2 <= 0:
            raise ValueError("tau2 must be positive")


class _ModelFrame:
    """Index arrays and groupings derived from the observation list."""

    def __init__(self, data: list[ClinicObservation], basis: SplineBasis):
        if not data:
            raise ValueError("no observations")
        site_region: dict[str, int] = {}
        for o in data:
            if site_region.setdefault(o.site, o.region) != o.region:
                raise ValueError(f"site {o.site!r} appears in two regions")
        self.sites = sorted(site_region)
        self.site_region = site_region
        self.regions = sorted({o.region for o in data})
        if self.regions != list(range(1, len(self.regions) + 1)):
            raise ValueError("regions must be numbered 1..R without gaps")
        self.n_regions = len(self.regions)
        self.n_sites = len(self.sites)
        self.years = list(basis.years)
        self.basis = basis

        site_idx = {s: i for i, s in enumerate(self.sites)}
        year_idx = {y: i for i, y in enumerate(self.years)}
        rows = [o for o in data if o.tested > 0]  # empty site-years drop out
        rows.sort(key=lambda o: (site_idx[o.site], o.year))
        for o in rows:
            if o.year not in year_idx:
                raise ValueError(f"year {o.year} is outside the spline basis")
        self.y = np.array([o.positive for o in rows], dtype=float)
        self.ntest = np.array([o.tested for o in rows], dtype=float)
        self.obs_site = np.array([site_idx[o.site] for o in rows], dtype=int)
        self.obs_region = np.array([site_region[o.site] - 1 for o in rows],
                                   dtype=int)
        self.obs_year = np.array([year_idx[o.year] for o in rows], dtype=int)
        # reduceat boundaries: rows are sorted by site; sites with no rows
        # get empty segments handled separately
        self.site_starts = np.searchsorted(self.obs_site,
                                           np.arange(self.n_sites))
        # sites grouped by region, for the recentering moves
        self.region_sites = [
            np.array([i for i, s in enumerate(self.sites)
                      if site_region[s] == r]) for r in self.regions]

    def site_rows(self, site: str) -> list[tuple[int, int]]:
        """(year, tested) pairs for one site's non-empty rows, year order."""
        i = self.sites.index(site)
        mask = self.obs_site == i
        return [(self.years[t], int(n))
                for t, n in zip(self.obs_year[mask], self.ntest[mask])]

    def eta(self, mu, alpha, beta, gamma) -> np.ndarray:
        xb = self.basis.matrix @ beta
        return (mu + alpha[self.obs_region] + xb[self.obs_year]
                + gamma[self.obs_site])

    def loglik_terms(self, eta: np.ndarray) -> np.ndarray:
        # y * log(pi) + (n - y) * log(1 - pi), stable via log1p(exp())
        return (self.y * -np.logaddexp(0.0, -eta)
                + (self.ntest - self.y) * -np.logaddexp(0.0, eta))

    def site_sums(self, terms: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_sites)
        if terms.size:
            # clip indices so reduceat accepts sites with no rows, then
            # zero those segments out
            starts = np.minimum(self.site_starts, terms.size - 1)
            sums = np.add.reduceat(terms, starts)
            counts = np.diff(np.append(self.site_starts, terms.size))
            out = np.where(counts > 0, sums, 0.0)
        return out

    def pi_grid(self, mu, alpha, beta) -> np.ndarray:
        """Region-by-year prevalence at the site-effect center, flattened
        row-major (region varies slowest)."""
        xb = self.basis.matrix @ beta
        eta = mu + alpha[:, None] + xb[None, :]
        return expit(eta).reshape(-1)


def _normal_logpdf(x, var) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(-0.5 * (np.log(2 * np.pi * var) + x * x / var)))


def log_posterior(params: GlmmParams, data: list[ClinicObservation],
                  basis: SplineBasis, prior_var: float = 100.0) -> float:
    """Log posterior density (up to the model evidence) at one state.

    Includes the binomial coefficients, so the likelihood part is the
    genuine log probability of the observed counts.
    """
    frame = _ModelFrame(data, basis)
    if len(params.alpha) != frame.n_regions:
        raise ValueError("alpha length does not match the number of regions")
    if len(params.gamma) != frame.n_sites:
        raise ValueError("gamma length does not match the number of sites")
    eta = frame.eta(params.mu, params.alpha, params.beta, params.gamma)
    ll = float(np.sum(frame.loglik_terms(eta)))
    ll += float(np.sum(gammaln(frame.ntest + 1) - gammaln(frame.y + 1)
                       - gammaln(frame.ntest - frame.y + 1)))
    lp = _normal_logpdf(params.mu, prior_var)
    lp += _normal_logpdf(params.alpha[1:], prior_var)
    lp += _normal_logpdf(params.beta, prior_var)
    lp += _normal_logpdf(params.gamma, params.tau2)
    lp += (PRIOR_IG_SHAPE * np.log(PRIOR_IG_RATE) - gammaln(PRIOR_IG_SHAPE)
           - (PRIOR_IG_SHAPE + 1) * np.log(params.tau2)
           - PRIOR_IG_RATE / params.tau2)
    return ll + lp


@dataclass(frozen=True)
class McmcSettings:
    """Run lengths and priors for the posterior sampler."""

    n_iter: int = 30000
    n_burn: int = 10000
    thin: int = 5
    n_chains: int = 4
    prior_var: float = 100.0

    def __post_init__(self):
        if self.n_iter <= self.n_burn:
            raise ValueError("n_iter must exceed n_burn")
        if self.thin < 1 or self.n_chains < 1:
            raise ValueError("thin and n_chains must be positive")


@dataclass
class McmcResult:
    """Thinned post-burn-in draws and sampling diagnostics."""

    pi: np.ndarray            # (n_draws, R*T) prevalence target draws
    mu: np.ndarray
    alpha: np.ndarray         # (n_draws, R)
    beta: np.ndarray          # (n_draws, 3)
    gamma: np.ndarray         # (n_draws, S)
    tau2: np.ndarray
    acceptance: dict[str, float]
    rhat: dict[str, float]
    sites: list[str] = field(default_factory=list)
    regions: list[int] = field(default_factory=list)
    years: list[int] = field(default_factory=list)

    @property
    def n_draws(self) -> int:
        return self.pi.shape[0]


def _run_chain(frame: _ModelFrame, settings: McmcSettings, seed: int):
    rng = np.random.default_rng(seed)
    r, s = frame.n_regions, frame.n_sites
    prior_var = settings.prior_var

    # moderate data-informed start keeps the initial log posterior finite
    total_y, total_n = frame.y.sum(), frame.ntest.sum()
    p0 = (total_y + 0.5) / (total_n + 1.0) if total_n > 0 else 0.5
    mu = float(np.log(p0 / (1 - p0)))
    alpha = np.zeros(r)
    beta = np.zeros(3)
    gamma = np.zeros(s)
    tau2 = 0.1

    eta = frame.eta(mu, alpha, beta, gamma)
    ll = float(np.sum(frame.loglik_terms(eta)))

    # adaptive step sizes (log scale); frozen once burn-in ends
    ls_mu, ls_alpha, ls_beta = np.log(0.1), np.log(0.1), np.log(0.05)
    ls_gamma = np.full(s, np.log(0.2))
    ls_swap0 = np.log(0.1)
    ls_swap = np.full(r, np.log(0.1))
    t_uni, t_vec = 0.44, 0.234

    keep = (settings.n_iter - settings.n_burn) // settings.thin
    out_pi = np.empty((keep, r * len(frame.years)))
    out_mu = np.empty(keep)
    out_alpha = np.empty((keep, r))
    out_beta = np.empty((keep, 3))
    out_gamma = np.empty((keep, s))
    out_tau2 = np.empty(keep)
    acc_counts = {"mu": 0, "alpha": 0, "beta": 0, "gamma": 0}
    n_post = 0
    kept = 0

    for it in range(settings.n_iter):
        adapting = it < settings.n_burn
        rate = (it + 1) ** -0.6

        # intercept
        prop = mu + np.exp(ls_mu) * rng.standard_normal()
        eta_p = eta + (prop - mu)
        ll_p = float(np.sum(frame.loglik_terms(eta_p)))
        logr = ll_p - ll + (mu * mu - prop * prop) / (2 * prior_var)
        acc = min(1.0, np.exp(min(logr, 0.0)))
        if rng.random() < acc:
            mu, eta, ll = prop, eta_p, ll_p
            if not adapting:
                acc_counts["mu"] += 1
        if adapting:
            ls_mu += rate * (acc - t_uni)

        # region effects (vector block, first component pinned)
        if r > 1:
            d_alpha = np.zeros(r)
            d_alpha[1:] = np.exp(ls_alpha) * rng.standard_normal(r - 1)
            alpha_p = alpha + d_alpha
            eta_p = eta + d_alpha[frame.obs_region]
            ll_p = float(np.sum(frame.loglik_terms(eta_p)))
            logr = ll_p - ll + float(
                np.sum(alpha[1:] ** 2 - alpha_p[1:] ** 2)) / (2 * prior_var)
            acc = min(1.0, np.exp(min(logr, 0.0)))
            if rng.random() < acc:
                alpha, eta, ll = alpha_p, eta_p, ll_p
                if not adapting:
                    acc_counts["alpha"] += 1
            if adapting:
                ls_alpha += rate * (acc - t_vec)

        # spline coefficients (vector block)
        beta_p = beta + np.exp(ls_beta) * rng.standard_normal(3)
        dxb = frame.basis.matrix @ (beta_p - beta)
        eta_p = eta + dxb[frame.obs_year]
        ll_p = float(np.sum(frame.loglik_terms(eta_p)))
        logr = ll_p - ll + float(
            np.sum(beta ** 2 - beta_p ** 2)) / (2 * prior_var)
        acc = min(1.0, np.exp(min(logr, 0.0)))
        if rng.random() < acc:
            beta, eta, ll = beta_p, eta_p, ll_p
            if not adapting:
                acc_counts["beta"] += 1
        if adapting:
            ls_beta += rate * (acc - t_vec)

        # site effects: independent proposals, per-site accept (sites are
        # conditionally independent given the shared parameters)
        d_gam = np.exp(ls_gamma) * rng.standard_normal(s)
        gamma_p = gamma + d_gam
        terms_cur = frame.loglik_terms(eta)
        eta_p = eta + d_gam[frame.obs_site]
        terms_p = frame.loglik_terms(eta_p)
        d_ll = frame.site_sums(terms_p - terms_cur)
        logr = d_ll + (gamma ** 2 - gamma_p ** 2) / (2 * tau2)
        accp = np.minimum(1.0, np.exp(np.minimum(logr, 0.0)))
        accept = rng.random(s) < accp
        if np.any(accept):
            gamma = np.where(accept, gamma_p, gamma)
            eta = eta + np.where(accept, d_gam, 0.0)[frame.obs_site]
            ll = float(np.sum(frame.loglik_terms(eta)))
        if not adapting:
            acc_counts["gamma"] += int(accept.sum())
            n_post += 1
        if adapting:
            ls_gamma += rate * (accp - t_uni)

        # recentering moves along likelihood-flat directions: shifting the
        # intercept (or a region effect) while shifting the corresponding
        # site effects the opposite way leaves eta unchanged, so only the
        # prior ratio enters
        d = np.exp(ls_swap0) * rng.standard_normal()
        logr = ((mu * mu - (mu + d) ** 2) / (2 * prior_var)
                + float(np.sum(gamma ** 2 - (gamma - d) ** 2)) / (2 * tau2))
        acc = min(1.0, np.exp(min(logr, 0.0)))
        if rng.random() < acc:
            mu += d
            gamma = gamma - d
        if adapting:
            ls_swap0 += rate * (acc - t_uni)
        for k in range(1, r):
            idx_k = frame.region_sites[k]
            d = np.exp(ls_swap[k]) * rng.standard_normal()
            gk = gamma[idx_k]
            logr = ((alpha[k] ** 2 - (alpha[k] + d) ** 2) / (2 * prior_var)
                    + float(np.sum(gk ** 2 - (gk - d) ** 2)) / (2 * tau2))
            acc = min(1.0, np.exp(min(logr, 0.0)))
            if rng.random() < acc:
                alpha = alpha.copy()
                alpha[k] += d
                gamma = gamma.copy()
                gamma[idx_k] -= d
            if adapting:
                ls_swap[k] += rate * (acc - t_uni)

        # site-effect variance: conjugate inverse-gamma draw
        shape = PRIOR_IG_SHAPE + s / 2.0
        rate_ig = PRIOR_IG_RATE + 0.5 * float(gamma @ gamma)
        tau2 = 1.0 / rng.gamma(shape, 1.0 / rate_ig)

        if not adapting and (it - settings.n_burn) % settings.thin == 0 \
                and kept < keep:
            out_pi[kept] = frame.pi_grid(mu, alpha, beta)
            out_mu[kept] = mu
            out_alpha[kept] = alpha
            out_beta[kept] = beta
            out_gamma[kept] = gamma
            out_tau2[kept] = tau2
            kept += 1

    n_kept_iters = settings.n_iter - settings.n_burn
    acc_rates = {k: v / n_kept_iters for k, v in acc_counts.items()
                 if k != "gamma"}
    acc_rates["gamma"] = acc_counts["gamma"] / (n_kept_iters * s)
    return (out_pi[:kept], out_mu[:kept], out_alpha[:kept], out_beta[:kept],
            out_gamma[:kept], out_tau2[:kept], acc_rates)


def _split_rhat(chains: list[np.ndarray]) -> float:
    """Potential scale reduction on split chains for a scalar series."""
    halves = []
    for c in chains:
        half = len(c) // 2
        if half >= 2:
            halves.extend([c[:half], c[half:2 * half]])
    if len(halves) < 2:
        return float("nan")
    m = len(halves)
    n = min(len(h) for h in halves)
    arr = np.array([h[:n] for h in halves])
    w = arr.var(axis=1, ddof=1).mean()
    b = n * arr.mean(axis=1).var(ddof=1)
    if w <= 0:
        return 1.0
    return float(np.sqrt((n - 1) / n + b / (n * w)))


def mcmc_sample(data: list[ClinicObservation], basis: SplineBasis,
                seed: int, settings: McmcSettings = McmcSettings()
                ) -> McmcResult:
    """Posterior sample of the prevalence target and raw parameters.

    Runs ``settings.n_chains`` independent adaptive chains (seeded by
    splitting ``seed``), discards burn-in, thins, and pools.  Emits a
    warning, not an error, if the split-chain diagnostic looks bad.
    """
    frame = _ModelFrame(data, basis)
    seeds = _seed_stream(seed, settings.n_chains)
    chains = [_run_chain(frame, settings, s) for s in seeds]

    pi = np.vstack([c[0] for c in chains])
    mu = np.concatenate([c[1] for c in chains])
    alpha = np.vstack([c[2] for c in chains])
    beta = np.vstack([c[3] for c in chains])
    gamma = np.vstack([c[4] for c in chains])
    tau2 = np.concatenate([c[5] for c in chains])
    acc = {k: float(np.mean([c[6][k] for c in chains]))
           for k in chains[0][6]}
    rhat = {
        "mu": _split_rhat([c[1] for c in chains]),
        "tau2": _split_rhat([np.log(c[5]) for c in chains]),
        "pi_mean": _split_rhat([c[0].mean(axis=1) for c in chains]),
    }
    bad = {k: v for k, v in rhat.items() if np.isfinite(v) and v > 1.1}
    if bad:
        warnings.warn(f"split-chain diagnostic above 1.1: {bad}",
                      stacklevel=2)
    return McmcResult(pi=pi, mu=mu, alpha=alpha, beta=beta, gamma=gamma,
                      tau2=tau2, acceptance=acc, rhat=rhat,
                      sites=frame.sites, regions=frame.regions,
                      years=frame.years)


def predictive_site_draws(result: McmcResult, basis: SplineBasis,
                          region: int, years_tested: list[tuple[int, int]],
                          seed: int, n: int
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Joint draws of (simulated site data, prevalence target).

    ``result`` must be a posterior sample computed *without* the site.  For
    each selected draw the site effect is drawn fresh from N(0, tau2) (no
    data informs it), prevalence follows, and counts are binomial with the
    site's observed sample sizes, which are treated as fixed.
    """
    if not years_tested:
        raise ValueError("the excluded site has no observed sample sizes")
    rng = np.random.default_rng(seed)
    total = result.n_draws
    replace = n > total
    idx = rng.choice(total, size=n, replace=replace)
    if not replace:
        idx.sort()

    xb_rows = np.array([basis.row(y) for y, _ in years_tested])
    ntest = np.array([m for _, m in years_tested], dtype=float)

    mu = result.mu[idx]
    alpha_r = result.alpha[idx, region - 1]
    tau2 = result.tau2[idx]
    gamma_new = rng.normal(0.0, np.sqrt(tau2))
    eta = (mu + alpha_r + gamma_new)[:, None] + result.beta[idx] @ xb_rows.T
    pi_site = expit(eta)
    blocks = rng.binomial(ntest.astype(int)[None, :].repeat(n, axis=0),
                          pi_site).astype(float)
    return blocks, result.pi[idx]


class GlmmInfluenceSampler:
    """Sampler-contract adapter for the survey model.

    One posterior run is cached per excluded site, with its chain seed
    derived deterministically from ``base_seed`` and the site name; the
    per-call ``seed`` only steers subsampling and predictive randomness.
    The naive nested path (``completed_posterior_draws``) re-runs MCMC per
    completion and is only desk-scale for toy datasets.
    """

    def __init__(self, data: list[ClinicObservation], basis: SplineBasis,
                 settings: McmcSettings = McmcSettings(),
                 base_seed: int = 0):
        self.data = list(data)
        self.basis = basis
        self.settings = settings
        self.base_seed = base_seed
        self.frame = _ModelFrame(data, basis)
        self._cache: dict[str | None, McmcResult] = {}

    def _run_seed(self, exclude_unit: str | None) -> int:
        tag = b"" if exclude_unit is None else exclude_unit.encode()
        ss = np.random.SeedSequence([self.base_seed,
                                     int.from_bytes(tag, "big")])
        return int(ss.generate_state(1)[0])

    def run(self, exclude_unit: str | None) -> McmcResult:
        if exclude_unit not in self._cache:
            if exclude_unit is None:
                subset = self.data
            else:
                if exclude_unit not in self.frame.sites:
                    raise KeyError(f"unknown site {exclude_unit!r}")
                subset = [o for o in self.data if o.site != exclude_unit]
            self._cache[exclude_unit] = mcmc_sample(
                subset, self.basis, self._run_seed(exclude_unit),
                self.settings)
        return self._cache[exclude_unit]

    def posterior_draws(self, exclude_unit, seed, n):
        result = self.run(exclude_unit)
        rng = np.random.default_rng(seed)
        idx = rng.choice(result.n_draws, size=n, replace=n > result.n_draws)
        return result.pi[idx]

    def predictive_draws(self, unit, seed, n):
        result = self.run(unit)
        return predictive_site_draws(
            result, self.basis, self.frame.site_region[unit],
            self.frame.site_rows(unit), seed, n)

    def completed_posterior_draws(self, unit, block, seed, n):
        rows = self.frame.site_rows(unit)
        block = np.asarray(block, dtype=float).reshape(-1)
        if len(block) != len(rows):
            raise ValueError("completion length does not match site rows")
        region = self.frame.site_region[unit]
        completed = [o for o in self.data if o.site != unit]
        completed += [ClinicObservation(region=region, site=unit, year=y,
                                        tested=m, positive=int(round(v)))
                      for (y, m), v in zip(rows, block)]
        result = mcmc_sample(completed, self.basis, seed, self.settings)
        rng = np.random.default_rng(seed + 1)
        idx = rng.choice(result.n_draws, size=n, replace=n > result.n_draws)
        return result.pi[idx]


def site_influence(data: list[ClinicObservation], basis: SplineBasis,
                   seed: int, loss: LossSpec | None = None,
                   config: MetaModelConfig = MetaModelConfig(),
                   settings: McmcSettings = McmcSettings(),
                   estimator: str = "knn",
                   ) -> tuple[list[InfluenceRecord], dict]:
    """Leave-one-site-out influence analysis.

    Per site: the retrospective value compares pooled posterior means with
    and without the site (MCSE over ten disjoint draw groups), the
    prospective value uses the kNN meta-model (or the naive nested path
    when ``estimator="naive"``).  Returns the records plus a diagnostics
    dict keyed by run.
    """
    frame = _ModelFrame(data, basis)
    if frame.n_sites < 2:
        raise ValueError("need at least 2 sites for leave-one-site-out")
    if estimator not in ("knn", "naive"):
        raise ValueError(f"unknown estimator {estimator!r}")
    if loss is None:
        loss = identity_loss(frame.n_regions * len(frame.years))

    sampler = GlmmInfluenceSampler(data, basis, settings, base_seed=seed)
    seeds = _seed_stream(seed, frame.n_sites + 1)
    full = sampler.run(None)
    diagnostics = {"full": {"acceptance": full.acceptance,
                            "rhat": full.rhat}}

    records = []
    for j, site in enumerate(frame.sites):
        site_seed = seeds[j + 1]
        without = sampler.run(site)
        retro, retro_mcse = retrospective_from_draws(full.pi, without.pi,
                                                     loss)
        if estimator == "knn":
            pro, pro_mcse = prospective_evsi_knn(sampler, site, loss, config,
                                                 site_seed)
        else:
            pro, pro_mcse = prospective_evsi_naive(sampler, site, loss,
                                                   config, site_seed)
        diagnostics[site] = {"acceptance": without.acceptance,
                             "rhat": without.rhat}
        if pro <= 0:
            records.append(InfluenceRecord(
                unit_id=site, retrospective=retro, prospective=max(pro, 0.0),
                evoir=None, retro_mcse=retro_mcse, pro_mcse=pro_mcse,
                degenerate=True))
        else:
            records.append(InfluenceRecord(
                unit_id=site, retrospective=retro, prospective=pro,
                evoir=retro / pro, retro_mcse=retro_mcse,
                pro_mcse=pro_mcse))
    return records, diagnostics
