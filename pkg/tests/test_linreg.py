import numpy as np
import pytest

from voinfluence import linreg
from voinfluence.datasets import longley
from voinfluence.linreg import (RankDeficientError, RegressionData,
                                cooks_distance, evoir_exact,
                                external_studentized_residual, fit,
                                influence_table, leave_one_out_fit,
                                loo_leverage_identity,
                                prospective_evsi_exact,
                                retrospective_evsi_exact)

# Year, Cook's D, retrospective, prospective, EVOIR -- published reference
# values for the Longley regression (intercept + 6 predictors).
LONGLEY_TABLE = [
    ("1947", 0.141, 0.092, 0.088, 1.05),
    ("1948", 0.041, 0.026, 0.177, 0.15),
    ("1949", 0.003, 0.002, 0.079, 0.02),
    ("1950", 0.244, 0.159, 0.056, 2.83),
    ("1951", 0.614, 0.399, 0.157, 2.55),
    ("1952", 0.089, 0.058, 0.072, 0.80),
    ("1953", 0.079, 0.051, 0.126, 0.41),
    ("1954", 0.001, 0.000, 0.142, 0.00),
    ("1955", 0.000, 0.000, 0.117, 0.00),
    ("1956", 0.235, 0.153, 0.043, 3.53),
    ("1957", 0.000, 0.000, 0.078, 0.00),
    ("1958", 0.004, 0.002, 0.130, 0.02),
    ("1959", 0.036, 0.023, 0.080, 0.29),
    ("1960", 0.004, 0.003, 0.041, 0.07),
    ("1961", 0.170, 0.111, 0.064, 1.72),
    ("1962", 0.467, 0.304, 0.258, 1.18),
]


def random_data(seed, n=8, p=3):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, p))
    y = rng.normal(size=n)
    return RegressionData(x, y)


class TestFit:
    def test_mean_only_model(self):
        data = RegressionData(np.ones((5, 1)), [1.0, 2.0, 3.0, 2.0, 2.0])
        fitted = fit(data)
        assert fitted.beta_hat[0] == pytest.approx(2.0)
        assert fitted.s2 == pytest.approx(0.5)
        assert np.allclose(fitted.hat_diag, 0.2)

    def test_matches_lstsq(self):
        data = random_data(0)
        fitted = fit(data)
        expect, *_ = np.linalg.lstsq(data.x, data.y, rcond=None)
        assert np.allclose(fitted.beta_hat, expect)

    def test_gram_inverse(self):
        data = random_data(1)
        fitted = fit(data)
        assert np.allclose(fitted.gram_inv @ (data.x.T @ data.x), np.eye(3),
                           atol=1e-10)

    def test_leverages_sum_to_p(self):
        fitted = fit(longley())
        assert fitted.hat_diag.sum() == pytest.approx(7.0, abs=1e-10)
        assert np.all(fitted.hat_diag > 0)
        assert np.all(fitted.hat_diag < 1)

    def test_hat_matrix_idempotence(self):
        data = random_data(2, n=10, p=4)
        fitted = fit(data)
        hat = data.x @ fitted.gram_inv @ data.x.T
        # sum_k h_ik^2 = h_ii for a projection matrix
        assert np.allclose(np.sum(hat ** 2, axis=1), fitted.hat_diag,
                           atol=1e-10)

    def test_ill_conditioned_warning(self):
        with pytest.warns(linreg.IllConditionedWarning):
            fit(longley())


class TestValidation:
    def test_rank_deficiency_names_column(self):
        x = np.ones((6, 2))
        with pytest.raises(RankDeficientError, match="column"):
            RegressionData(x, np.arange(6.0))

    def test_too_few_rows(self):
        with pytest.raises(ValueError, match="n > p \\+ 3"):
            RegressionData(np.eye(4), np.ones(4))

    def test_nonfinite_rejected(self):
        x = np.ones((6, 1))
        with pytest.raises(ValueError):
            RegressionData(x, [1, 2, np.nan, 4, 5, 6])

    def test_label_length_checked(self):
        with pytest.raises(ValueError, match="row_labels"):
            RegressionData(np.ones((6, 1)), np.arange(6.0),
                           row_labels=["a", "b"])


class TestLeaveOneOut:
    @pytest.mark.parametrize("seed", range(5))
    def test_downdate_matches_refit(self, seed):
        data = random_data(seed)
        fitted = fit(data)
        for i in range(data.n):
            beta_loo, s2_loo = leave_one_out_fit(data, i, fitted)
            keep = np.arange(data.n) != i
            sub = RegressionData(data.x[keep], data.y[keep])
            subfit = fit(sub)
            assert np.allclose(beta_loo, subfit.beta_hat, atol=1e-10)
            assert s2_loo == pytest.approx(subfit.s2, abs=1e-10)

    def test_loo_leverage_identity(self):
        data = random_data(3)
        fitted = fit(data)
        for i in range(data.n):
            keep = np.arange(data.n) != i
            gram_loo = data.x[keep].T @ data.x[keep]
            direct = float(data.x[i] @ np.linalg.solve(gram_loo, data.x[i]))
            assert loo_leverage_identity(fitted, i) == \
                pytest.approx(direct, abs=1e-10)

    def test_exact_fit_point_rejected(self):
        # a row that dwarfs the rest of a one-column design has leverage
        # numerically equal to 1
        x = np.array([[1e9], [1.0], [1.0], [1.0], [1.0]])
        data = RegressionData(x, [5.0, 1.1, 0.9, 1.0, 1.2])
        fitted = fit(data)
        assert fitted.hat_diag[0] == pytest.approx(1.0)
        with pytest.raises(ValueError, match="exact-fit"):
            retrospective_evsi_exact(data, 0, fitted)
        # the downdate falls back to a brute-force refit and still works
        beta_loo, _ = leave_one_out_fit(data, 0, fitted)
        assert beta_loo[0] == pytest.approx(1.05)

    def test_indicator_deletion_is_rank_deficient(self):
        # removing the only row that activates an indicator column must
        # surface as a rank error, not a silent downdate
        x = np.column_stack([np.ones(6), [1, 0, 0, 0, 0, 0]])
        data = RegressionData(x, [5.0, 1.1, 0.9, 1.0, 1.2, 0.8])
        with pytest.raises(RankDeficientError):
            leave_one_out_fit(data, 0)


class TestInfluenceMeasures:
    def test_longley_reference_table(self):
        data = longley()
        fitted = fit(data)
        for i, (year, cook, retro, pro, ratio) in enumerate(LONGLEY_TABLE):
            assert data.row_labels[i] == year
            assert cooks_distance(data, i, fitted) == \
                pytest.approx(cook, abs=1e-3)
            assert retrospective_evsi_exact(data, i, fitted) == \
                pytest.approx(retro, abs=1e-3)
            assert prospective_evsi_exact(data, i, fitted) == \
                pytest.approx(pro, abs=1e-3)
            assert evoir_exact(data, i, fitted) == \
                pytest.approx(ratio, abs=2e-2)

    def test_cook_rescaling_identity(self):
        data = random_data(4)
        fitted = fit(data)
        for i in range(data.n):
            assert retrospective_evsi_exact(data, i, fitted) == \
                pytest.approx(cooks_distance(data, i, fitted)
                              * fitted.p * fitted.s2, abs=1e-10)

    def test_studentized_residual_two_ways(self):
        data = random_data(5, n=12, p=3)
        fitted = fit(data)
        for i in range(data.n):
            t = external_studentized_residual(data, i, fitted)
            # direct route: predict row i from the fit without it
            beta_loo, s2_loo = leave_one_out_fit(data, i, fitted)
            pred_err = data.y[i] - data.x[i] @ beta_loo
            keep = np.arange(data.n) != i
            gram_loo = data.x[keep].T @ data.x[keep]
            lev = float(data.x[i] @ np.linalg.solve(gram_loo, data.x[i]))
            direct = pred_err / np.sqrt(s2_loo * (1.0 + lev))
            assert t == pytest.approx(direct, abs=1e-10)

    def test_evoir_is_scaled_squared_residual(self):
        data = random_data(6, n=10, p=2)
        fitted = fit(data)
        n, p = fitted.n, fitted.p
        for i in range(data.n):
            t = external_studentized_residual(data, i, fitted)
            assert evoir_exact(data, i, fitted) == \
                pytest.approx((n - p - 3) / (n - p - 1) * t * t, rel=1e-10)

    def test_longley_1956_residual(self):
        # EVOIR 3.53 with n=16, p=7 implies t^2 = 3.53 * 8/6 = 4.71
        data = longley()
        t = external_studentized_residual(data, 9)
        assert t * t == pytest.approx(4.71, abs=0.01)
        assert abs(t) == pytest.approx(2.17, abs=0.005)

    def test_duplicate_rows_get_identical_values(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(9, 2))
        x[4] = x[8]
        y = rng.normal(size=9)
        y[4] = y[8]
        data = RegressionData(x, y)
        fitted = fit(data)
        assert retrospective_evsi_exact(data, 4, fitted) == \
            pytest.approx(retrospective_evsi_exact(data, 8, fitted),
                          rel=1e-10)
        assert prospective_evsi_exact(data, 4, fitted) == \
            pytest.approx(prospective_evsi_exact(data, 8, fitted), rel=1e-10)


class TestInfluenceTable:
    def test_record_fields(self):
        data = longley()
        records = influence_table(data)
        assert len(records) == 16
        fitted = fit(data)
        for i, rec in enumerate(records):
            assert rec.unit_id == data.row_labels[i]
            assert rec.evoir == pytest.approx(evoir_exact(data, i, fitted))
            assert not rec.degenerate
            assert 0.0 <= rec.calib_p <= 1.0

    def test_product_identity(self):
        for rec in influence_table(random_data(8, n=15, p=4)):
            assert abs(rec.retrospective - rec.prospective * rec.evoir) \
                <= 1e-12 * max(1.0, rec.retrospective)
