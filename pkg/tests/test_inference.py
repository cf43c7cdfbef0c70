import numpy as np
import pytest
from scipy import optimize

from crsim.inference import (INTENSITIES, ConstrainedFit,
                             constrained_fit, fit_pair, log_likelihood, mle_censoring_rate,
                             mle_intensities)
from crsim.model import (Administrative, Exponential, ModelParams, intensity_distance,
                         sup_distance)
from crsim.simulate import Cohort, RngStream, draw_cohort

from conftest import MARGIN, cohort_from_stats

ADM = Administrative(90.0)


def random_cohort(gen, seed, censoring=ADM, n=None):
    a = gen.uniform(5e-4, 5e-3, 3)
    n = n or int(gen.integers(100, 501))
    return draw_cohort(ModelParams(a), censoring, n, RngStream(seed))


class TestClosedForm:
    def test_examples(self):
        c = Cohort([1.0, 3.0], [1, 2], k=2)
        np.testing.assert_array_equal(mle_intensities(c).intensities, [0.25, 0.25])
        c = Cohort([2.0, 2.0, 2.0], [0, 0, 0], k=2)
        np.testing.assert_array_equal(mle_intensities(c).intensities, [0.0, 0.0])
        assert mle_censoring_rate(Cohort([2.0, 2.0], [0, 1], k=1)) == 0.25
        assert mle_censoring_rate(Cohort([2.0, 2.0], [1, 1], k=1)) == 0.0

    def test_consistency(self):
        c = draw_cohort(MARGIN[0], ADM, 100_000, RngStream(12))
        np.testing.assert_allclose(mle_intensities(c).intensities, MARGIN[0].intensities, rtol=0.1)
        c = draw_cohort(MARGIN[0], Exponential(0.005), 100_000, RngStream(13))
        assert mle_censoring_rate(c) == pytest.approx(0.005, rel=0.1)

    def test_single_observation_likelihood(self):
        c = Cohort([1.0], [1], k=1)
        for a in (0.5, 1.0, 2.0):
            assert log_likelihood(c, ModelParams([a]), ADM) == pytest.approx(-a + np.log(a))
        res = optimize.minimize_scalar(lambda a: -log_likelihood(c, ModelParams([a]), ADM),
                                       bounds=(1e-3, 10), method="bounded", options={"xatol": 1e-10})
        assert res.x == pytest.approx(1.0, rel=1e-6)

    def test_censored_observation_only_enters_survival(self):
        base = Cohort([5.0, 7.0], [1, 2], k=2)
        more = Cohort([5.0, 7.0, 90.0], [1, 2, 0], k=2)
        p = ModelParams([0.01, 0.02])
        diff = log_likelihood(more, p, ADM) - log_likelihood(base, p, ADM)
        assert diff == pytest.approx(-0.03 * 90.0)

    def test_exponential_likelihood_terms(self):
        c = Cohort([2.0, 2.0], [0, 1], k=1)
        p = ModelParams([0.3])
        ll = log_likelihood(c, p, Exponential(0.2))
        assert ll == pytest.approx(-0.5 * 4 + np.log(0.3) + np.log(0.2))
        assert log_likelihood(c, p, Exponential(), psi=0.2) == ll

    def test_zero_rate_with_events_is_an_error(self):
        with pytest.raises(ValueError):
            log_likelihood(Cohort([1.0], [1], k=2), ModelParams([0.0, 1.0]), ADM)

    def test_fit_pair_psi_presence(self):
        c1 = draw_cohort(MARGIN[0], Exponential(0.01), 200, RngStream(1, 0, 1))
        c2 = draw_cohort(MARGIN[1], Exponential(0.01), 200, RngStream(1, 0, 2))
        f = fit_pair(c1, c2, Exponential(), Exponential())
        assert f.psi1 is not None and f.psi2 is not None
        f = fit_pair(c1, c2, ADM, ADM)
        assert f.psi1 is None and f.psi2 is None and f.censor_rates == (0.0, 0.0)

    def test_numerical_maximization_oracle(self):
        """Closed-form MLE vs a Newton trust-region maximization in log-rates."""
        gen = np.random.default_rng(3)
        for i in range(100):
            cens = ADM if i % 2 else Exponential(0.005)
            c = random_cohort(gen, 1000 + i, cens, n=int(gen.integers(2000, 5000)))
            counts = c.counts
            if np.any(counts == 0):
                continue
            S = c.total_time
            exp = isinstance(cens, Exponential)
            N = counts if exp else counts[1:]

            def f(th):
                return -(N @ th - S * np.exp(th).sum()) / S

            def g(th):
                return -(N - S * np.exp(th)) / S

            def h(th):
                return np.diag(np.exp(th))

            res = optimize.minimize(f, np.full(N.size, np.log(1e-3)), jac=g, hess=h,
                                    method="trust-exact")
            # function values resolve the argmax only to ~sqrt(machine eps);
            # finish on the score equations
            res = optimize.root(g, res.x, jac=h, tol=1e-13)
            assert res.success
            numeric = np.exp(res.x)
            closed = mle_intensities(c).intensities
            if exp:
                closed = np.r_[mle_censoring_rate(c), closed]
            np.testing.assert_allclose(closed, numeric, rtol=1e-8)

    def test_mle_beats_perturbations(self):
        gen = np.random.default_rng(4)
        for i in range(100):
            c = random_cohort(gen, 2000 + i)
            a_hat = mle_intensities(c)
            best = log_likelihood(c, a_hat, ADM)
            a = np.where(a_hat.intensities > 0, a_hat.intensities, 1e-6)
            pert = a * np.exp(gen.normal(0, 0.2, (100, 3)))
            for p in pert:
                assert log_likelihood(c, ModelParams(p), ADM) <= best + 1e-9


def margin_cohorts(n, seed, cens=ADM):
    return (draw_cohort(MARGIN[0], cens, n, RngStream(seed, 0, 1)),
            draw_cohort(MARGIN[1], cens, n, RngStream(seed, 0, 2)))


def check_fit(fit: ConstrainedFit, eps, cens, tau=90.0):
    f = fit.fitted
    d = sup_distance(f.group1, f.group2, *f.censor_rates, tau=tau).value
    assert fit.converged
    assert abs(d - eps) <= 1e-6
    assert fit.constraint_residual <= 1e-6
    if fit.initial_loglik is not None:
        assert f.loglik >= fit.initial_loglik - 1e-9


class TestConstrainedProbabilities:
    def test_margin_cohorts_push(self):
        c1, c2 = margin_cohorts(500, 3)
        free = fit_pair(c1, c2, ADM, ADM)
        d_hat = sup_distance(free.group1, free.group2, tau=90).value
        eps = d_hat + 0.03
        fit = constrained_fit(c1, c2, ADM, ADM, eps, 90.0)
        check_fit(fit, eps, ADM)
        assert fit.fitted.loglik <= free.loglik
        assert fit.method == "decompose" and fit.active is not None

    def test_pull_when_estimate_exceeds_threshold(self):
        c1, c2 = margin_cohorts(300, 8)
        free = fit_pair(c1, c2, ADM, ADM)
        eps = sup_distance(free.group1, free.group2, tau=90).value - 0.04
        fit = constrained_fit(c1, c2, ADM, ADM, eps, 90.0)
        check_fit(fit, eps, ADM)
        assert fit.fitted.loglik <= free.loglik

    def test_constraint_already_met(self):
        c1, c2 = margin_cohorts(200, 5)
        free = fit_pair(c1, c2, ADM, ADM)
        eps = sup_distance(free.group1, free.group2, tau=90).value
        fit = constrained_fit(c1, c2, ADM, ADM, eps, 90.0)
        assert fit.method == "unconstrained"
        assert fit.fitted.group1 == free.group1 and fit.fitted.group2 == free.group2

    def test_exponential_censoring_with_free_rates(self):
        cens = Exponential(0.005)
        c1, c2 = margin_cohorts(300, 6, cens)
        est = Exponential()
        free = fit_pair(c1, c2, est, est)
        d_hat = sup_distance(free.group1, free.group2, *free.censor_rates, tau=90).value
        fit = constrained_fit(c1, c2, est, est, d_hat + 0.05, 90.0)
        check_fit(fit, d_hat + 0.05, est)
        assert fit.fitted.psi1 > 0 and fit.fitted.psi2 > 0
        assert fit.fitted.loglik <= free.loglik

    def test_fixed_zero_psi_matches_administrative(self):
        c1, c2 = margin_cohorts(300, 9)
        eps = 0.2
        adm = constrained_fit(c1, c2, ADM, ADM, eps, 90.0)
        zero = constrained_fit(c1, c2, Exponential(0.0), Exponential(0.0), eps, 90.0,
                               estimate_psi=False)
        np.testing.assert_allclose(zero.fitted.group1.intensities, adm.fitted.group1.intensities,
                                   atol=1e-6)
        np.testing.assert_allclose(zero.fitted.group2.intensities, adm.fitted.group2.intensities,
                                   atol=1e-6)

    def test_decomposition_not_worse_than_penalty(self):
        gen = np.random.default_rng(21)
        for i in range(6):
            c1 = random_cohort(gen, 50 + i)
            c2 = random_cohort(gen, 80 + i)
            eps = float(gen.uniform(0.02, 0.3))
            dec = constrained_fit(c1, c2, ADM, ADM, eps, 90.0, method="decompose")
            pen = constrained_fit(c1, c2, ADM, ADM, eps, 90.0, method="penalty")
            check_fit(dec, eps, ADM)
            if pen.converged:
                assert dec.fitted.loglik >= pen.fitted.loglik - 1e-6

    def test_zero_event_cause(self):
        c1 = cohort_from_stats([10, 0, 4], 186, 200 * 80.0)
        c2 = cohort_from_stats([6, 9, 0], 185, 200 * 82.0, label=2)
        fit = constrained_fit(c1, c2, ADM, ADM, 0.15, 90.0)
        check_fit(fit, 0.15, ADM)
        assert np.all(fit.fitted.group1.intensities >= 0)

    def test_deterministic(self):
        c1, c2 = margin_cohorts(200, 10)
        a = constrained_fit(c1, c2, ADM, ADM, 0.25, 90.0, seed=4)
        b = constrained_fit(c1, c2, ADM, ADM, 0.25, 90.0, seed=4)
        assert a.to_dict() == b.to_dict()

    def test_bad_arguments(self):
        c1, c2 = margin_cohorts(50, 1)
        with pytest.raises(ValueError):
            constrained_fit(c1, c2, ADM, ADM, 1.5, 90.0)
        with pytest.raises(ValueError):
            constrained_fit(c1, c2, ADM, ADM, 0.1, 90.0, method="newton")
        with pytest.raises(ValueError):
            constrained_fit(c1, c2, ADM, ADM, 0.1, 90.0, measure="hazard")


class TestConstrainedIntensities:
    @staticmethod
    def oracle(s1, s2, eps):
        """Best of SLSQP runs over the 2k choices of (cause, sign) with |a1-a2| <= eps elsewhere."""
        (n1, t1), (n2, t2) = s1, s2
        k = n1.size
        best = -np.inf

        def ll(x):
            a, b = x[:k], x[k:]
            return (n1 @ np.log(a) - t1 * a.sum() + n2 @ np.log(b) - t2 * b.sum())

        for j in range(k):
            for sign in (1, -1):
                cons = [{"type": "eq", "fun": lambda x, j=j, s=sign: (x[j] - x[k + j]) - s * eps}]
                cons += [{"type": "ineq", "fun": lambda x, i=i: eps - abs(x[i] - x[k + i])}
                         for i in range(k) if i != j]
                x0 = np.r_[n1 / t1, n2 / t2]
                res = optimize.minimize(lambda x: -ll(x) / (t1 + t2), x0, method="SLSQP",
                                        bounds=[(1e-9, 1)] * (2 * k), constraints=cons,
                                        options={"ftol": 1e-15, "maxiter": 500})
                if res.success and abs(abs(res.x[j] - res.x[k + j]) - eps) < 1e-9:
                    best = max(best, ll(res.x))
        return best

    @pytest.mark.filterwarnings("ignore:Values in x were outside bounds")
    def test_closed_form_matches_numerical(self):
        gen = np.random.default_rng(8)
        for i in range(15):
            c1 = random_cohort(gen, 300 + i)
            c2 = random_cohort(gen, 400 + i)
            if np.any(c1.counts[1:] == 0) or np.any(c2.counts[1:] == 0):
                continue
            free = fit_pair(c1, c2, ADM, ADM)
            eps = intensity_distance(free.group1, free.group2) * gen.uniform(1.2, 3.0)
            fit = constrained_fit(c1, c2, ADM, ADM, eps, 90.0, measure=INTENSITIES)
            assert fit.converged
            assert intensity_distance(fit.fitted.group1, fit.fitted.group2) == pytest.approx(eps, abs=1e-12)
            ref = self.oracle((c1.counts[1:].astype(float), c1.total_time),
                              (c2.counts[1:].astype(float), c2.total_time), eps)
            assert fit.fitted.loglik >= ref - 1e-7

    def test_pull_case(self):
        c1, c2 = margin_cohorts(400, 12)
        free = fit_pair(c1, c2, ADM, ADM)
        eps = 0.5 * intensity_distance(free.group1, free.group2)
        fit = constrained_fit(c1, c2, ADM, ADM, eps, 90.0, measure=INTENSITIES)
        assert fit.converged
        assert intensity_distance(fit.fitted.group1, fit.fitted.group2) == pytest.approx(eps, abs=1e-12)
        assert fit.fitted.loglik <= free.loglik

    def test_censoring_rate_kept_at_mle(self):
        cens = Exponential(0.005)
        c1, c2 = margin_cohorts(300, 13, cens)
        fit = constrained_fit(c1, c2, Exponential(), Exponential(), 0.004, 90.0,
                              measure=INTENSITIES)
        assert fit.fitted.psi1 == mle_censoring_rate(c1)
        assert fit.fitted.psi2 == mle_censoring_rate(c2)
