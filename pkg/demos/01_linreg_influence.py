"""Influence analysis of the Longley regression, entirely in closed form.

The Longley employment data is a classic ill-conditioned 16-row benchmark.
Under the prediction loss Q = X'X, all three influence measures have exact
expressions, so this demo needs no simulation at all:

* retrospective EVSI  - how far deleting a row actually moves the fit
  (an unscaled Cook's distance),
* prospective EVSI    - how far the rest of the data expected that row to
  move the fit (a leverage curve),
* EVOIR               - their ratio; values far above 1 flag rows that are
  more influential than their position in the design warranted.

Run:  python3 demos/01_linreg_influence.py
"""

import numpy as np

from voinfluence import linreg
from voinfluence.datasets import longley
from voinfluence.report import linreg_table_text

data = longley()
fitted = linreg.fit(data)

print(f"n = {fitted.n} rows, p = {fitted.p} coefficients "
      f"(intercept + 6 predictors)")
print(f"residual variance S^2 = {fitted.s2:.5f}\n")

records = linreg.influence_table(data)
cooks = [linreg.cooks_distance(data, i, fitted) for i in range(data.n)]
print(linreg_table_text(records, cooks))

# The two most influential years tell different stories.  1951 moves the
# fit the most AND far more than expected (high EVOIR): it sits away from
# the pattern of the other rows.  1962 also moves the fit a lot, but its
# EVOIR is near 1 - it is influential mostly because it was always going to
# be (a high-leverage endpoint), not because it is surprising.
by_year = {r.unit_id: r for r in records}
for year in ("1951", "1962"):
    r = by_year[year]
    t = linreg.external_studentized_residual(
        data, data.row_labels.index(year), fitted)
    print(f"{year}: retrospective {r.retrospective:.3f}, "
          f"EVOIR {r.evoir:.2f}, studentized residual {t:+.2f}, "
          f"calibration p = {r.calib_p:.4f}")

# EVOIR is (up to a degrees-of-freedom constant) the squared externally
# studentized residual, so the calibration p-value gives a familiar
# outlier-test reading of the same number.
ratio = by_year["1951"].evoir
n, p = fitted.n, fitted.p
t2 = ratio * (n - p - 1) / (n - p - 3)
print(f"\ncheck: EVOIR(1951) * (n-p-1)/(n-p-3) = {t2:.3f} "
      f"= t^2 = {linreg.external_studentized_residual(data, 4, fitted)**2:.3f}")
assert np.isclose(t2,
                  linreg.external_studentized_residual(data, 4, fitted) ** 2)
