import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from voinfluence.loss import (InfluenceRecord, LossSpec, bayes_action, evoir,
                              evoir_calibration_p, identity_loss,
                              prospective_evsi_mc, quadratic_loss,
                              retrospective_evsi)
from voinfluence.oracle import (ConjugateModel, oracle_posterior_mean,
                                oracle_posterior_var,
                                oracle_prospective_evsi)


class TestLossSpec:
    def test_identity(self):
        ls = identity_loss(3)
        assert ls.dim == 3
        assert np.allclose(ls.q, np.eye(3))

    def test_rejects_rank_deficient_factor(self):
        with pytest.raises(ValueError, match="positive definite"):
            LossSpec(np.array([[1.0, 1.0], [2.0, 2.0]]))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            LossSpec(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    @given(arrays(np.float64, (3, 3),
                  elements=st.floats(-5, 5, allow_nan=False)))
    @settings(max_examples=50)
    def test_factor_and_quadratic_form_agree(self, a):
        try:
            ls = LossSpec(a)
        except ValueError:
            return
        d = np.array([1.3, -0.7, 2.1])
        direct = float(d @ ls.q @ d)
        via_factor = quadratic_loss(d, np.zeros(3), ls)
        assert via_factor == pytest.approx(direct, rel=1e-12, abs=1e-12)


class TestQuadraticLoss:
    def test_zero_distance(self):
        ls = identity_loss(2)
        assert quadratic_loss([1.0, 2.0], [1.0, 2.0], ls) == 0.0

    def test_identity_q(self):
        assert quadratic_loss([1.0, 2.0], [0.0, 0.0],
                              identity_loss(2)) == pytest.approx(5.0)

    def test_nontrivial_factor(self):
        # A = [[1,0],[1,1]] maps (1,1) to (1,2); hand-expanding A^T A gives
        # Q = [[2,1],[1,1]] and the same value 5 either way
        ls = LossSpec(np.array([[1.0, 0.0], [1.0, 1.0]]))
        diff = np.array([1.0, 1.0])
        assert quadratic_loss(diff, np.zeros(2), ls) == pytest.approx(5.0)
        assert float(diff @ np.array([[2.0, 1.0], [1.0, 1.0]]) @ diff) == \
            pytest.approx(5.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            quadratic_loss([1.0], [1.0, 2.0], identity_loss(2))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            quadratic_loss([np.inf, 0.0], [0.0, 0.0], identity_loss(2))

    @given(arrays(np.float64, 3, elements=st.floats(-10, 10)),
           arrays(np.float64, 3, elements=st.floats(-10, 10)))
    @settings(max_examples=100)
    def test_symmetry_and_nonnegativity(self, a, b):
        ls = LossSpec(np.array([[2.0, 0.0, 0.0],
                                [1.0, 1.0, 0.0],
                                [0.0, 0.5, 3.0]]))
        lab = quadratic_loss(a, b, ls)
        lba = quadratic_loss(b, a, ls)
        assert lab == pytest.approx(lba, rel=1e-10, abs=1e-10)
        assert lab >= 0.0
        if not np.allclose(a, b):
            assert quadratic_loss(a, b, ls) > 0.0


class TestBayesAction:
    def test_single_draw(self):
        assert np.allclose(bayes_action([[3.0, -1.0]]), [3.0, -1.0])

    def test_two_draws(self):
        assert np.allclose(bayes_action([[0.0, 0.0], [2.0, 4.0]]),
                           [1.0, 2.0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            bayes_action(np.empty((0, 2)))

    def test_matches_conjugate_posterior_mean(self):
        model = ConjugateModel(prior_mean=0.5, prior_var=2.0, obs_var=1.0,
                               n1=4, n2=1)
        ybar1 = 1.2
        exact = oracle_posterior_mean(model, ybar1)
        var = oracle_posterior_var(model)
        rng = np.random.default_rng(7)
        n = 40000
        draws = rng.normal(exact, np.sqrt(var), size=(n, 1))
        mcse = np.sqrt(var / n)
        assert abs(bayes_action(draws)[0] - exact) < 3 * mcse


class TestRetrospective:
    def test_no_movement(self):
        ls = identity_loss(2)
        assert retrospective_evsi([1.0, 1.0], [1.0, 1.0], ls) == 0.0

    def test_scalar(self):
        ls = LossSpec(np.array([[np.sqrt(2.0)]]))
        assert retrospective_evsi([1.0], [3.0], ls) == pytest.approx(8.0)


class TestProspectiveMc:
    def test_identical_draws(self):
        draws = np.ones((50, 2))
        est, _ = prospective_evsi_mc(draws, identity_loss(2))
        assert est == 0.0

    def test_scalar_sample_variance(self):
        rng = np.random.default_rng(3)
        draws = rng.normal(size=(200, 1))
        est, mcse = prospective_evsi_mc(draws, identity_loss(1))
        assert est == pytest.approx(float(np.var(draws, ddof=1)), rel=1e-12)
        assert mcse > 0

    def test_needs_two_draws(self):
        with pytest.raises(ValueError):
            prospective_evsi_mc(np.ones((1, 1)), identity_loss(1))

    def test_matches_conjugate_closed_form(self):
        model = ConjugateModel(prior_mean=0.0, prior_var=1.0, obs_var=1.0,
                               n1=1, n2=1)
        exact = oracle_prospective_evsi(model)
        # simulate conditional Bayes actions directly from their law
        rng = np.random.default_rng(11)
        a1 = oracle_posterior_mean(model, 2.0)
        draws = rng.normal(a1, np.sqrt(exact), size=(20000, 1))
        est, mcse = prospective_evsi_mc(draws, identity_loss(1))
        assert abs(est - exact) < 3 * max(mcse, 1e-12)


class TestEvoir:
    def test_unit_ratio(self):
        assert evoir(0.5, 0.5) == 1.0

    def test_rejects_zero_prospective(self):
        with pytest.raises(ValueError):
            evoir(1.0, 0.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            evoir(np.inf, 1.0)


class TestCalibrationP:
    def test_zero_evoir(self):
        assert evoir_calibration_p(0.0, 3) == 1.0

    def test_p1(self):
        # chi-square CDF oracle: P(chi2_1 > 1) = 0.31731...
        assert evoir_calibration_p(1.0, 1) == pytest.approx(0.3173, abs=5e-5)

    def test_p7(self):
        # P(chi2_7 > 7) = 0.42888...
        assert evoir_calibration_p(1.0, 7) == pytest.approx(0.4289, abs=5e-5)

    def test_invalid_dim(self):
        with pytest.raises(ValueError):
            evoir_calibration_p(1.0, 0)


class TestInfluenceRecord:
    def test_product_identity_enforced(self):
        InfluenceRecord("u", retrospective=0.6, prospective=0.2, evoir=3.0)
        with pytest.raises(ValueError, match="prospective"):
            InfluenceRecord("u", retrospective=0.6, prospective=0.2,
                            evoir=2.0)

    def test_degenerate_allows_absent_ratio(self):
        rec = InfluenceRecord("u", retrospective=0.1, prospective=0.0,
                              evoir=None, degenerate=True)
        assert rec.evoir is None

    def test_negative_values_rejected(self):
        with pytest.raises(ValueError):
            InfluenceRecord("u", retrospective=-0.1, prospective=0.2,
                            evoir=1.0)
