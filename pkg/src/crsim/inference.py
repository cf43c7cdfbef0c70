"""Maximum likelihood estimation, unconstrained and under a similarity constraint.

Both censoring schemes lead to a likelihood that depends on a group's data
only through the per-state counts and the total observed time, so all
optimization here works on those sufficient statistics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from .model import (Administrative, CensoringSpec, Exponential, ModelParams,
                    sup_distance_arrays)
from .simulate import MULTISTART, Cohort, RngStream

__all__ = [
    "FittedPair",
    "ConstrainedFit",
    "ConstrainedFitError",
    "GroupStats",
    "mle_intensities",
    "mle_censoring_rate",
    "log_likelihood",
    "fit_pair",
    "constrained_fit",
    "PROBABILITIES",
    "INTENSITIES",
]

log = logging.getLogger(__name__)

PROBABILITIES = "prob"
INTENSITIES = "int"

RATE_FLOOR = 1e-12
REPORT_ZERO = 1e-10
CONSTRAINT_TOL = 1e-6
_LOG_FLOOR = np.log(RATE_FLOOR)


class ConstrainedFitError(RuntimeError):
    """The constrained maximum likelihood problem could not be solved."""


@dataclass(frozen=True)
class GroupStats:
    """Sufficient statistics of one group."""

    events: np.ndarray  # counts per cause 1..k
    censored: int
    total_time: float

    @classmethod
    def of(cls, cohort: Cohort) -> "GroupStats":
        counts = cohort.counts
        return cls(counts[1:].astype(float), int(counts[0]), cohort.total_time)

    @property
    def n(self) -> int:
        return int(self.events.sum()) + self.censored


@dataclass(frozen=True)
class FittedPair:
    group1: ModelParams
    group2: ModelParams
    psi1: Optional[float]
    psi2: Optional[float]
    loglik: float

    @property
    def censor_rates(self) -> Tuple[float, float]:
        """Rates entering the transition probabilities (0 when absent)."""
        return (self.psi1 or 0.0, self.psi2 or 0.0)

    def to_dict(self) -> dict:
        return {
            "group1": self.group1.intensities.tolist(),
            "group2": self.group2.intensities.tolist(),
            "psi1": self.psi1,
            "psi2": self.psi2,
            "loglik": self.loglik,
        }


@dataclass(frozen=True)
class ConstrainedFit:
    fitted: FittedPair
    epsilon: float
    constraint_residual: float
    converged: bool
    initial_loglik: Optional[float] = None
    method: str = ""
    active: Optional[Tuple[int, int]] = None  # (cause, sign) attaining the constraint

    def to_dict(self) -> dict:
        return {
            "fitted": self.fitted.to_dict(),
            "epsilon": self.epsilon,
            "constraint_residual": self.constraint_residual,
            "converged": self.converged,
            "initial_loglik": self.initial_loglik,
            "method": self.method,
            "active": list(self.active) if self.active else None,
        }


def mle_intensities(cohort: Cohort) -> ModelParams:
    """Events of each cause divided by the total observed time."""
    total = cohort.total_time
    if not total > 0:
        raise ValueError("total observed time must be positive")
    return ModelParams.estimate(cohort.counts[1:] / total)


def mle_censoring_rate(cohort: Cohort) -> float:
    """Censored observations divided by the total observed time (exponential censoring)."""
    total = cohort.total_time
    if not total > 0:
        raise ValueError("total observed time must be positive")
    return float(cohort.counts[0] / total)


def _xlogy(count, rate, what):
    count = np.asarray(count, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any((count > 0) & (rate <= 0)):
        raise ValueError(f"log of zero {what} where an event of that type was observed")
    with np.errstate(divide="ignore"):
        return float(np.sum(np.where(count > 0, count * np.log(np.where(rate > 0, rate, 1.0)), 0.0)))


def _loglik_stats(stats: GroupStats, a, psi: Optional[float]) -> float:
    a = np.asarray(a, dtype=float)
    ll = -a.sum() * stats.total_time + _xlogy(stats.events, a, "intensity")
    if psi is not None:
        ll += -psi * stats.total_time + _xlogy(stats.censored, psi, "censoring rate")
    return ll


def log_likelihood(cohort: Cohort, params: ModelParams, censoring: CensoringSpec,
                   psi: Optional[float] = None) -> float:
    """Log-likelihood of one group, additive constants dropped.

    Under administrative censoring this is ``sum log S(T_i) + sum_j N_j log a_j``.
    Under exponential censoring the censoring density/survivor terms add
    ``N_0 log psi - psi sum T_i``; ``psi`` defaults to ``censoring.rate``.
    """
    if params.k != cohort.k:
        raise ValueError("params and cohort disagree on k")
    if isinstance(censoring, Exponential):
        if psi is None:
            psi = censoring.probability_rate()
        return _loglik_stats(GroupStats.of(cohort), params.intensities, float(psi))
    if isinstance(censoring, Administrative):
        return _loglik_stats(GroupStats.of(cohort), params.intensities, None)
    raise TypeError(f"unsupported censoring {censoring!r}")


def fit_pair(c1: Cohort, c2: Cohort, censoring1: CensoringSpec,
             censoring2: CensoringSpec) -> FittedPair:
    """Closed-form unconstrained MLEs for both groups."""
    if c1.k != c2.k:
        raise ValueError("cohorts disagree on k")
    a1, a2 = mle_intensities(c1), mle_intensities(c2)
    psi1 = mle_censoring_rate(c1) if isinstance(censoring1, Exponential) else None
    psi2 = mle_censoring_rate(c2) if isinstance(censoring2, Exponential) else None
    s1, s2 = GroupStats.of(c1), GroupStats.of(c2)
    ll = _loglik_stats(s1, a1.intensities, psi1) + _loglik_stats(s2, a2.intensities, psi2)
    return FittedPair(a1, a2, psi1, psi2, ll)


# --------------------------------------------------------------------------
# transition-probability constraint
# --------------------------------------------------------------------------

def _scale_and_slope(rate, t):
    """F(R, t) = (1 - e^{-Rt}) / R and dF/dR, stable for small Rt."""
    x = rate * t
    if x < 1e-5:
        f = t * (1 - x / 2 + x * x / 6)
        df = t * t * (-0.5 + x / 3 - x * x / 8)
        return f, df
    e = np.exp(-x)
    f = -np.expm1(-x) / rate
    df = (t * e - f) / rate
    return f, df


class _ProbProblem:
    """Joint log-likelihood of both groups in log-parameter space.

    Layout of the parameter vector: ``log a1 (k), log a2 (k)`` followed by
    ``log psi`` for each group whose censoring rate is free.
    """

    def __init__(self, s1: GroupStats, s2: GroupStats, psi_free, psi_fixed, tau, epsilon,
                 psi_in_lik=(False, False)):
        self.s1, self.s2 = s1, s2
        # whether the reported likelihood carries the censoring terms
        self.psi_in_lik = tuple(psi_in_lik)
        self.k = s1.events.size
        self.psi_free = tuple(psi_free)
        self.psi_fixed = tuple(psi_fixed)
        self.tau = float(tau)
        self.eps = float(epsilon)
        self.scale = 1.0 / max(s1.n + s2.n, 1)
        self.dim = 2 * self.k + sum(self.psi_free)

    def pack(self, a1, a2, p1, p2):
        parts = [np.log(np.maximum(a1, RATE_FLOOR)), np.log(np.maximum(a2, RATE_FLOOR))]
        for free, p in zip(self.psi_free, (p1, p2)):
            if free:
                parts.append([np.log(max(p, RATE_FLOOR))])
        return np.concatenate(parts)

    def unpack(self, theta):
        k = self.k
        a1 = np.exp(theta[:k])
        a2 = np.exp(theta[k:2 * k])
        pos = 2 * k
        psis = []
        for free, fixed in zip(self.psi_free, self.psi_fixed):
            if free:
                psis.append(float(np.exp(theta[pos])))
                pos += 1
            else:
                psis.append(fixed)
        return a1, a2, psis[0], psis[1]

    def loglik(self, a1, a2, p1, p2):
        ll = -a1.sum() * self.s1.total_time + float(np.dot(self.s1.events, np.log(a1)))
        ll += -a2.sum() * self.s2.total_time + float(np.dot(self.s2.events, np.log(a2)))
        for free, p, s in zip(self.psi_free, (p1, p2), (self.s1, self.s2)):
            if free:
                ll += -p * s.total_time + s.censored * np.log(p)
        return ll

    def objective(self, theta):
        a1, a2, p1, p2 = self.unpack(theta)
        val = -self.loglik(a1, a2, p1, p2) * self.scale
        g = [-(self.s1.events - a1 * self.s1.total_time), -(self.s2.events - a2 * self.s2.total_time)]
        for free, p, s in zip(self.psi_free, (p1, p2), (self.s1, self.s2)):
            if free:
                g.append([-(s.censored - p * s.total_time)])
        return val, np.concatenate(g) * self.scale

    def distance(self, a1, a2, p1, p2) -> float:
        return float(sup_distance_arrays(a1, a2, a1.sum() + p1, a2.sum() + p2, self.tau))

    def cause_sup(self, theta, j, sign):
        """max over {tau, t*} of sign * (P1_j - P2_j) and its gradient in theta."""
        a1, a2, p1, p2 = self.unpack(theta)
        r1, r2 = a1.sum() + p1, a2.sum() + p2
        ts = [self.tau]
        if a1[j] > 0 and a2[j] > 0 and r1 != r2:
            t_star = np.log(a1[j] / a2[j]) / (r1 - r2)
            if 0 < t_star < self.tau:
                ts.append(t_star)
        best = None
        for t in ts:
            f1, df1 = _scale_and_slope(r1, t)
            f2, df2 = _scale_and_slope(r2, t)
            val = sign * (a1[j] * f1 - a2[j] * f2)
            if best is None or val > best[0]:
                best = (val, f1, df1, f2, df2)
        val, f1, df1, f2, df2 = best
        k = self.k
        ga1 = np.full(k, a1[j] * df1)
        ga1[j] += f1
        ga2 = -np.full(k, a2[j] * df2)
        ga2[j] -= f2
        grad = [ga1 * a1, ga2 * a2]
        if self.psi_free[0]:
            grad.append([a1[j] * df1 * p1])
        if self.psi_free[1]:
            grad.append([-a2[j] * df2 * p2])
        return val, sign * np.concatenate(grad)

    def bounds(self, theta0):
        hi = max(np.max(theta0), 0.0) + 20.0
        return [(_LOG_FLOOR, hi)] * self.dim


def _report(a):
    a = np.array(a, dtype=float)
    a[a < REPORT_ZERO] = 0.0
    return a


def _bisect_path(dist, eps, d0, s_max=np.inf):
    """Find ``s`` in ``[0, s_max]`` where ``dist`` crosses ``eps``.

    ``dist(0) == d0`` lies on one side of ``eps``; the bracket is located on a
    geometric grid and refined with Brent's method.
    """
    side = d0 < eps
    grid = np.geomspace(1e-3, 1e6, 46)
    if np.isfinite(s_max):
        grid = np.append(grid[grid < s_max], s_max)
    s_lo = 0.0
    for s in grid:
        if (dist(s) < eps) != side:
            return optimize.brentq(lambda u: dist(u) - eps, s_lo, s, xtol=1e-14, rtol=1e-15,
                                   maxiter=200)
        s_lo = s
    return None


def _initializer(prob: _ProbProblem, a1, a2, p1, p2, d_hat):
    """Feasible start on ``d == eps`` reached by a one-parameter path.

    Below the threshold the fitted models are pushed apart, first along the
    ray ``a2 + s (a2 - a1)``, then by rescaling either group.  Above it group 2
    is pulled towards group 1.  Returns ``(path, a1, a2, psi1, psi2)`` or None.
    """
    eps = prob.eps
    direction = a2 - a1
    paths = []
    if d_hat < eps:
        if np.any(direction != 0):
            neg = direction < 0
            s_max = float(np.min(a2[neg] / -direction[neg])) if np.any(neg) else np.inf
            paths.append(("ray", lambda s: (a1, np.maximum(a2 + s * direction, 0.0), p1, p2), s_max))
        paths.append(("scale2_up", lambda s: (a1, a2 * (1 + s), p1, p2), np.inf))
        paths.append(("scale1_up", lambda s: (a1 * (1 + s), a2, p1, p2), np.inf))
        paths.append(("scale2_down", lambda s: (a1, a2 * (1 - s), p1, p2), 1.0))
        paths.append(("scale1_down", lambda s: (a1 * (1 - s), a2, p1, p2), 1.0))
    else:
        # pull group 2 onto group 1, censoring rate included where it is free
        q_end = p1 if prob.psi_free[1] else p2
        paths.append(("pull", lambda s: (a1, a2 - s * direction, p1, p2 + s * (q_end - p2)), 1.0))
        if prob.psi_free[0] and not prob.psi_free[1]:
            paths.append(("pull_psi1", lambda s: (a1 + s * direction, a2, p1 + s * (p2 - p1), p2), 1.0))

    for name, path, s_max in paths:
        def dist(s, path=path):
            return prob.distance(*path(s))
        s = _bisect_path(dist, eps, d_hat, s_max)
        if s is not None:
            x = path(s)
            if abs(prob.distance(*x) - eps) <= 1e-9:
                return (name,) + tuple(x)
    return None


def _evaluate(prob: _ProbProblem, a1, a2, p1, p2):
    """Reported parameters, their log-likelihood and constraint residual."""
    a1, a2 = _report(a1), _report(a2)
    # keep a rate alive where events were observed
    a1 = np.where((a1 == 0) & (prob.s1.events > 0), REPORT_ZERO, a1)
    a2 = np.where((a2 == 0) & (prob.s2.events > 0), REPORT_ZERO, a2)
    ll = (_loglik_stats(prob.s1, a1, p1 if prob.psi_in_lik[0] else None)
          + _loglik_stats(prob.s2, a2, p2 if prob.psi_in_lik[1] else None))
    resid = abs(prob.distance(a1, a2, p1, p2) - prob.eps)
    return a1, a2, ll, resid


_SLSQP_OPTIONS = {"ftol": 1e-13, "maxiter": 300}


def _slsqp_push(prob: _ProbProblem, theta0, j, sign):
    """Max likelihood with ``sign * (P1_j - P2_j)`` reaching ``eps`` somewhere on ``[0, tau]``."""
    cons = {
        "type": "eq",
        "fun": lambda th: prob.cause_sup(th, j, sign)[0] - prob.eps,
        "jac": lambda th: prob.cause_sup(th, j, sign)[1],
    }
    return optimize.minimize(prob.objective, theta0, jac=True, method="SLSQP",
                             constraints=[cons], bounds=prob.bounds(theta0),
                             options=_SLSQP_OPTIONS)


def _slsqp_pull(prob: _ProbProblem, theta0):
    """Max likelihood with every per-cause sup difference at most ``eps``."""
    cons = []
    for j in range(prob.k):
        for sign in (1, -1):
            cons.append({
                "type": "ineq",
                "fun": lambda th, j=j, sign=sign: prob.eps - prob.cause_sup(th, j, sign)[0],
                "jac": lambda th, j=j, sign=sign: -prob.cause_sup(th, j, sign)[1],
            })
    return optimize.minimize(prob.objective, theta0, jac=True, method="SLSQP",
                             constraints=cons, bounds=prob.bounds(theta0),
                             options=_SLSQP_OPTIONS)


def _penalty(prob: _ProbProblem, theta0):
    """Quadratic-penalty homotopy on the full (nonsmooth) distance."""
    theta = np.array(theta0, dtype=float)
    bounds = prob.bounds(theta0)

    def active(th):
        best = None
        for j in range(prob.k):
            for sign in (1, -1):
                v, g = prob.cause_sup(th, j, sign)
                if best is None or v > best[0]:
                    best = (v, g)
        return best

    for lam in 10.0 ** np.arange(2, 9):
        def fun(th, lam=lam):
            f, g = prob.objective(th)
            d, dg = active(th)
            r = d - prob.eps
            return f + lam * r * r, g + 2 * lam * r * dg
        res = optimize.minimize(fun, theta, jac=True, method="L-BFGS-B", bounds=bounds,
                                options={"maxiter": 500, "ftol": 1e-15, "gtol": 1e-10})
        theta = res.x
    # Newton steps along the constraint gradient remove the leftover penalty residual
    for _ in range(20):
        d, dg = active(theta)
        r = d - prob.eps
        if abs(r) < 1e-12 or not np.any(dg):
            break
        theta = np.clip(theta - r * dg / np.dot(dg, dg), _LOG_FLOOR, None)
    return theta


def constrained_fit(c1: Cohort, c2: Cohort, censoring1: CensoringSpec,
                    censoring2: CensoringSpec, epsilon: float, tau: float,
                    measure: str = PROBABILITIES, method: str = "auto",
                    n_starts: int = 5, seed: int = 0,
                    estimate_psi: bool = True) -> ConstrainedFit:
    """Joint MLE of both groups subject to ``distance == epsilon``.

    Parameters
    ----------
    measure : {"prob", "int"}
        Sup-norm distance of transition probabilities on ``[0, tau]`` or
        maximal absolute difference of intensities.
    method : {"auto", "decompose", "penalty"}
        Probability measure only.  ``decompose`` splits ``d == eps`` into one
        smooth problem per (cause, sign) and solves each with SLSQP;
        ``penalty`` runs a quadratic-penalty homotopy from ``n_starts``
        starting points.  ``auto`` uses ``decompose`` and falls back to
        ``penalty`` if no subproblem converges.
    estimate_psi : bool
        Under exponential censoring, treat the censoring rates as free
        parameters (default).  If False they stay at ``censoring.rate``.

    Returns
    -------
    ConstrainedFit
        ``converged`` is False when no optimizer run reached the constraint
        to within ``1e-6``; callers decide whether that is fatal.
    """
    if measure == PROBABILITIES and not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if c1.k != c2.k:
        raise ValueError("cohorts disagree on k")
    s1, s2 = GroupStats.of(c1), GroupStats.of(c2)
    if measure == INTENSITIES:
        return _constrained_intensities(censoring1, censoring2, s1, s2, epsilon)
    if measure != PROBABILITIES:
        raise ValueError(f"unknown measure {measure!r}")
    if method not in ("auto", "decompose", "penalty"):
        raise ValueError(f"unknown method {method!r}")

    has_psi = (isinstance(censoring1, Exponential), isinstance(censoring2, Exponential))
    psi_free, psi_fixed = [], []
    for c, s, exp in zip((censoring1, censoring2), (s1, s2), has_psi):
        if exp and estimate_psi:
            # without censored observations the rate MLE sits on the boundary 0
            psi_free.append(s.censored > 0)
            psi_fixed.append(0.0)
        else:
            psi_free.append(False)
            psi_fixed.append(c.probability_rate() if exp else 0.0)
    psi_in_lik = [exp and (free or fixed > 0) for exp, free, fixed in zip(has_psi, psi_free, psi_fixed)]
    prob = _ProbProblem(s1, s2, psi_free, psi_fixed, tau, epsilon, psi_in_lik)

    a1_hat = s1.events / s1.total_time
    a2_hat = s2.events / s2.total_time
    p1_hat = s1.censored / s1.total_time if psi_free[0] else psi_fixed[0]
    p2_hat = s2.censored / s2.total_time if psi_free[1] else psi_fixed[1]
    d_hat = prob.distance(a1_hat, a2_hat, p1_hat, p2_hat)

    def result(a1, a2, p1, p2, ll, resid, converged, init_ll, how, active):
        pair = FittedPair(ModelParams.estimate(a1), ModelParams.estimate(a2),
                          p1 if has_psi[0] else None, p2 if has_psi[1] else None, ll)
        return ConstrainedFit(pair, epsilon, resid, converged, init_ll, how, active)

    if abs(d_hat - epsilon) <= 1e-12:
        x1, x2, ll, resid = _evaluate(prob, a1_hat, a2_hat, p1_hat, p2_hat)
        return result(x1, x2, p1_hat, p2_hat, ll, resid, True, ll, "unconstrained", None)

    push = d_hat < epsilon
    init = _initializer(prob, a1_hat, a2_hat, p1_hat, p2_hat, d_hat)
    candidates = []  # (loglik, order, a1, a2, p1, p2, resid, method, active)
    init_ll = None
    if init is not None:
        _, x1, x2, q1, q2 = init
        x1, x2, init_ll, resid = _evaluate(prob, x1, x2, q1, q2)
        candidates.append((init_ll, 0, x1, x2, q1, q2, resid, "initializer", None))

    theta_mle = prob.pack(a1_hat, a2_hat, p1_hat, p2_hat)
    starts = [theta_mle]
    if init is not None:
        starts.insert(0, prob.pack(*init[1:]))
    gen = RngStream(seed, 0, 0, MULTISTART).generator()
    jitter = [starts[0] + gen.normal(0.0, 0.3, size=starts[0].size) for _ in range(n_starts)]

    order = 0

    def consider(res_x, how, active, ok=True):
        nonlocal order
        order += 1
        a1, a2, p1, p2 = prob.unpack(res_x)
        x1, x2, ll, resid = _evaluate(prob, a1, a2, p1, p2)
        if ok and resid <= CONSTRAINT_TOL:
            candidates.append((ll, order, x1, x2, p1, p2, resid, how, active))
            return True
        return False

    solved = False
    if method in ("auto", "decompose"):
        # first start only; the others are fallbacks for subproblems that fail
        for th0_list in (starts[:1], starts[1:] + jitter):
            if solved:
                break
            for th0 in th0_list:
                if push:
                    for j in range(prob.k):
                        for sign in (1, -1):
                            res = _slsqp_push(prob, th0, j, sign)
                            solved |= consider(res.x, "decompose", (j + 1, sign), res.success)
                else:
                    res = _slsqp_pull(prob, th0)
                    solved |= consider(res.x, "decompose", None, res.success)
                if solved and th0_list is not starts[:1]:
                    break

    if not solved and method in ("auto", "penalty"):
        for th0 in [starts[0]] + jitter[:max(n_starts - 1, 0)]:
            solved |= consider(_penalty(prob, th0), "penalty", None)

    if not candidates:
        log.warning("constrained fit failed: no feasible point for epsilon=%g", epsilon)
        x1, x2, ll, resid = _evaluate(prob, a1_hat, a2_hat, p1_hat, p2_hat)
        return result(x1, x2, p1_hat, p2_hat, ll, resid, False, None, "failed", None)

    ll, _, a1, a2, p1, p2, resid, how, active = max(candidates, key=lambda c: (c[0], -c[1]))
    return result(a1, a2, p1, p2, ll, resid, solved and resid <= CONSTRAINT_TOL, init_ll, how, active)


# --------------------------------------------------------------------------
# intensity constraint
# --------------------------------------------------------------------------

def _pair_on_difference(n1, t1, n2, t2, c):
    """Maximize ``n1 log a - t1 a + n2 log b - t2 b`` subject to ``a - b = c``."""
    s = t1 + t2
    n = n1 + n2
    lo = max(c, 0.0)
    if n == 0:
        a = lo
    else:
        q = s * c + n
        disc = max(q * q - 4.0 * s * n1 * c, 0.0)
        a = (q + np.sqrt(disc)) / (2.0 * s)
        a = max(a, lo)
    return a, a - c


def _constrained_intensities(censoring1, censoring2, s1, s2, epsilon):
    a1_hat = s1.events / s1.total_time
    a2_hat = s2.events / s2.total_time
    has_psi = (isinstance(censoring1, Exponential), isinstance(censoring2, Exponential))
    p1 = s1.censored / s1.total_time if has_psi[0] else None
    p2 = s2.censored / s2.total_time if has_psi[1] else None

    diff = a1_hat - a2_hat
    if np.max(np.abs(diff)) > epsilon:
        # the problem separates by cause: pull every offending cause onto +-eps
        x1, x2 = a1_hat.copy(), a2_hat.copy()
        for j in np.flatnonzero(np.abs(diff) > epsilon):
            x1[j], x2[j] = _pair_on_difference(s1.events[j], s1.total_time, s2.events[j],
                                               s2.total_time, np.sign(diff[j]) * epsilon)
        ll = _loglik_stats(s1, x1, p1) + _loglik_stats(s2, x2, p2)
        j = int(np.argmax(np.abs(x1 - x2)))
        best = (ll, x1, x2, (j + 1, 1 if x1[j] >= x2[j] else -1))
    else:
        best = None
    for j in range(a1_hat.size if best is None else 0):
        for sign in (1, -1):
            a, b = _pair_on_difference(s1.events[j], s1.total_time, s2.events[j], s2.total_time,
                                       sign * epsilon)
            x1, x2 = a1_hat.copy(), a2_hat.copy()
            x1[j], x2[j] = a, b
            if np.max(np.abs(x1 - x2)) > epsilon + 1e-12:
                continue
            try:
                ll = _loglik_stats(s1, x1, p1) + _loglik_stats(s2, x2, p2)
            except ValueError:
                continue
            if best is None or ll > best[0]:
                best = (ll, x1, x2, (j + 1, sign))
    ll, x1, x2, active = best
    resid = abs(float(np.max(np.abs(x1 - x2))) - epsilon)
    pair = FittedPair(ModelParams.estimate(x1), ModelParams.estimate(x2), p1, p2, ll)
    return ConstrainedFit(pair, epsilon, resid, resid <= CONSTRAINT_TOL, None, "closed-form", active)
