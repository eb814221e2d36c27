"""Bundled datasets and synthetic fixtures.

The Longley employment data (16 annual observations, 1947-1962) is the
classic ill-conditioned regression benchmark; the response is total
employment and the six predictors are macroeconomic series.  Public domain.
"""

from __future__ import annotations

import numpy as np

from .linreg import RegressionData

__all__ = ["longley", "longley_csv_path", "LONGLEY_COLUMNS",
           "synthetic_clinics", "clinics_csv_text"]

LONGLEY_COLUMNS = (
    "gnp_deflator", "gnp", "unemployed", "armed_forces", "population", "year",
)

# year label, then gnp_deflator, gnp, unemployed, armed_forces, population,
# year, employed
_LONGLEY = np.array([
    [83.0, 234.289, 235.6, 159.0, 107.608, 1947, 60.323],
    [88.5, 259.426, 232.5, 145.6, 108.632, 1948, 61.122],
    [88.2, 258.054, 368.2, 161.6, 109.773, 1949, 60.171],
    [89.5, 284.599, 335.1, 165.0, 110.929, 1950, 61.187],
    [96.2, 328.975, 209.9, 309.9, 112.075, 1951, 63.221],
    [98.1, 346.999, 193.2, 359.4, 113.270, 1952, 63.639],
    [99.0, 365.385, 187.0, 354.7, 115.094, 1953, 64.989],
    [100.0, 363.112, 357.8, 335.0, 116.219, 1954, 63.761],
    [101.2, 397.469, 290.4, 304.8, 117.388, 1955, 66.019],
    [104.6, 419.180, 282.2, 285.7, 118.734, 1956, 67.857],
    [108.4, 442.769, 293.6, 279.8, 120.445, 1957, 68.169],
    [110.8, 444.546, 468.1, 263.7, 121.950, 1958, 66.513],
    [112.6, 482.704, 381.3, 255.2, 123.366, 1959, 68.655],
    [114.2, 502.601, 393.1, 251.4, 125.368, 1960, 69.564],
    [115.7, 518.173, 480.6, 257.2, 127.852, 1961, 69.331],
    [116.9, 554.894, 400.7, 282.7, 130.081, 1962, 70.551],
])


def longley() -> RegressionData:
    """Longley data with an intercept column prepended (16 x 7 design)."""
    predictors = _LONGLEY[:, :6]
    y = _LONGLEY[:, 6]
    x = np.column_stack([np.ones(len(y)), predictors])
    labels = [str(int(v)) for v in _LONGLEY[:, 5]]
    return RegressionData(x, y, row_labels=labels)


def longley_csv_path() -> str:
    """Path of the bundled Longley CSV (label column + 6 predictors +
    response; intercept added at load time)."""
    from importlib.resources import files
    return str(files("voinfluence").joinpath("data/longley.csv"))


def clinics_csv_text(observations) -> str:
    """Serialize clinic observations to the long-format CSV the CLI reads."""
    lines = ["region,site,year,tested,positive"]
    for o in observations:
        lines.append(f"{o.region},{o.site},{o.year},{o.tested},{o.positive}")
    return "\n".join(lines) + "\n"


def synthetic_clinics(seed: int = 0, shift_site: str | None = None,
                      shift: float = 0.0):
    """Synthetic 4-region / 17-site clinic testing dataset.

    Mirrors the survey layout of the real application: five sites in region
    1, four in each of the others, five biennial survey years, binomial
    counts at each site-year.  Optionally shifts one site's prevalence by
    ``shift`` (on the probability scale, clipped to (0.01, 0.99)) to plant
    a known influential site.

    Returns a list of ``glmm.ClinicObservation``.
    """
    from .glmm import ClinicObservation

    rng = np.random.default_rng(seed)
    years = [2002, 2004, 2006, 2008, 2010]
    sites_per_region = [5, 4, 4, 4]

    mu = -1.1
    alpha = np.array([0.0, 0.25, -0.2, 0.1])
    trend = {2002: 0.0, 2004: 0.15, 2006: 0.25, 2008: 0.2, 2010: 0.1}
    tau = 0.12

    obs = []
    site_idx = 0
    for r, n_sites in enumerate(sites_per_region, start=1):
        for _ in range(n_sites):
            site_idx += 1
            name = f"site{site_idx:02d}"
            gamma = rng.normal(0.0, tau)
            for t in years:
                eta = mu + alpha[r - 1] + trend[t] + gamma
                pi = 1.0 / (1.0 + np.exp(-eta))
                if shift_site == name:
                    pi = float(np.clip(pi + shift, 0.01, 0.99))
                n_tested = int(rng.integers(300, 700))
                y = int(rng.binomial(n_tested, pi))
                obs.append(ClinicObservation(
                    region=r, site=name, year=t, tested=n_tested, positive=y))
    return obs
