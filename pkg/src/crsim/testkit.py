"""Constrained parametric bootstrap tests of similarity.

The null hypothesis is dissimilarity, ``d >= epsilon``; rejecting it
certifies that the two groups are similar at level ``alpha``.  Bootstrap
samples are drawn from the maximum likelihood fit restricted to the margin
``d == epsilon`` (or from the unrestricted fit when the data already lie in
the null), refitted in closed form, and the observed statistic is compared
with the lower ``alpha``-quantile of the bootstrap statistics.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .inference import (INTENSITIES, PROBABILITIES, ConstrainedFit, ConstrainedFitError,
                        FittedPair, constrained_fit, fit_pair)
from .model import (Administrative, CensoringSpec, Exponential, IntensityWitness,
                    SupDistanceWitness, intensity_witness, sup_distance, sup_distance_arrays)
from .simulate import BOOTSTRAP, Cohort, RngStream, pathways_from_uniforms, uniform_block

__all__ = [
    "TestConfig",
    "TestReport",
    "run_similarity_test",
    "bootstrap_quantile",
    "bootstrap_p_value",
    "bootstrap_statistics",
    "quantile_index",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1


def quantile_index(alpha: float, B: int) -> int:
    """``floor(alpha * B)``, robust to binary rounding of ``alpha``."""
    return int(math.floor(alpha * B + 1e-9))


def bootstrap_quantile(stats, alpha: float) -> float:
    """The ``floor(alpha * B)``-th smallest bootstrap statistic (1-indexed, no interpolation)."""
    stats = np.asarray(stats, dtype=float).reshape(-1)
    m = quantile_index(alpha, stats.size)
    if m < 1:
        raise ValueError(f"floor(alpha * B) = 0 for alpha={alpha}, B={stats.size}")
    return float(np.partition(stats, m - 1)[m - 1])


def bootstrap_p_value(stats, d_hat: float) -> float:
    """Share of bootstrap statistics at or below the observed one."""
    stats = np.asarray(stats, dtype=float)
    return float(np.count_nonzero(stats <= d_hat)) / stats.size


@dataclass(frozen=True)
class TestConfig:
    """Settings of one similarity test.

    ``tau`` defaults to the administrative horizon when both groups share it.
    ``workers`` only affects speed: bootstrap replicates write into fixed
    slots, so results do not depend on it.
    """

    __test__ = False  # not a pytest class

    epsilon: float
    alpha: float = 0.05
    B: int = 500
    tau: Optional[float] = None
    measure: str = PROBABILITIES
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.measure not in (PROBABILITIES, INTENSITIES):
            raise ValueError(f"measure must be 'prob' or 'int', got {self.measure!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")
        if self.B < 100:
            raise ValueError("B must be at least 100")
        if quantile_index(self.alpha, self.B) < 1:
            raise ValueError("alpha * B must be at least 1")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def resolve_tau(self, censoring1: CensoringSpec, censoring2: CensoringSpec) -> float:
        if self.tau is not None:
            return float(self.tau)
        if (isinstance(censoring1, Administrative) and isinstance(censoring2, Administrative)
                and censoring1.horizon == censoring2.horizon):
            return float(censoring1.horizon)
        raise ValueError("tau must be given unless both groups share an administrative horizon")


@dataclass(frozen=True, eq=False)
class TestReport:
    __test__ = False

    d_hat: float
    witness: Union[SupDistanceWitness, IntensityWitness]
    fits_unconstrained: FittedPair
    fits_constrained: Optional[ConstrainedFit]  # None: unconstrained MLEs reused
    bootstrap_stats: np.ndarray
    q_alpha: float
    p_value: float
    reject: bool
    config: TestConfig
    tau: float
    censoring: Tuple[str, str] = field(default=("", ""))

    @property
    def bootstrap_params(self) -> FittedPair:
        """Parameters the bootstrap samples were drawn from."""
        if self.fits_constrained is None:
            return self.fits_unconstrained
        return self.fits_constrained.fitted

    def __eq__(self, other):
        if not isinstance(other, TestReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        cfg = self.config
        w = self.witness
        witness = {"value": w.value, "arg_cause": w.arg_cause, "sign": w.sign}
        if isinstance(w, SupDistanceWitness):
            witness["arg_time"] = w.arg_time
        return {
            "schema_version": SCHEMA_VERSION,
            "measure": cfg.measure,
            "epsilon": cfg.epsilon,
            "alpha": cfg.alpha,
            "B": cfg.B,
            "tau": self.tau,
            "seed": cfg.seed,
            "censoring": list(self.censoring),
            "d_hat": self.d_hat,
            "witness": witness,
            "fits_unconstrained": self.fits_unconstrained.to_dict(),
            "fits_constrained": (self.fits_constrained.to_dict()
                                 if self.fits_constrained is not None else "unconstrained reused"),
            "bootstrap_stats": self.bootstrap_stats.tolist(),
            "q_alpha": self.q_alpha,
            "p_value": self.p_value,
            "reject": self.reject,
        }

    def summary(self) -> str:
        cfg = self.config
        name = "d_inf" if cfg.measure == PROBABILITIES else "d_int"
        verdict = "reject H0: similar" if self.reject else "cannot reject H0"
        branch = "constrained" if self.fits_constrained is not None else "unconstrained (d_hat >= eps)"
        return (f"{name}_hat = {self.d_hat:.6g}  eps = {cfg.epsilon:g}  "
                f"q*_alpha = {self.q_alpha:.6g}  p = {self.p_value:.4f}  "
                f"alpha = {cfg.alpha:g}  B = {cfg.B}  bootstrap from {branch}\n{verdict}")


def _bootstrap_censoring(censoring: CensoringSpec, psi: Optional[float]) -> CensoringSpec:
    if isinstance(censoring, Exponential):
        return Exponential(float(psi))
    return censoring


def _replicate_fits(a, cens, n, seed, group, indices):
    """Closed-form refits of the given replicates; returns intensities and censoring rates."""
    streams = [RngStream(seed, int(b), group, BOOTSTRAP) for b in indices]
    times, states = pathways_from_uniforms(a, cens, uniform_block(streams, n))
    total = times.sum(axis=-1)
    counts = np.stack([np.count_nonzero(states == j, axis=-1) for j in range(a.size + 1)], axis=-1)
    rates = counts / total[:, None]
    psi = rates[:, 0] if isinstance(cens, Exponential) else np.zeros(len(streams))
    return rates[:, 1:], psi


def bootstrap_statistics(params: FittedPair, censoring1: CensoringSpec, censoring2: CensoringSpec,
                         n1: int, n2: int, B: int, tau: float, measure: str, seed: int,
                         workers: int = 1) -> np.ndarray:
    """Distances between closed-form refits of ``B`` simulated cohort pairs.

    Replicate ``b`` of group ``g`` always uses stream ``(seed, b, g)``.
    """
    a1, a2 = params.group1.intensities, params.group2.intensities
    cens1 = _bootstrap_censoring(censoring1, params.psi1)
    cens2 = _bootstrap_censoring(censoring2, params.psi2)
    k = a1.size
    A1, A2 = np.empty((B, k)), np.empty((B, k))
    P1, P2 = np.empty(B), np.empty(B)

    def work(indices):
        A1[indices], P1[indices] = _replicate_fits(a1, cens1, n1, seed, 1, indices)
        A2[indices], P2[indices] = _replicate_fits(a2, cens2, n2, seed, 2, indices)

    chunks = np.array_split(np.arange(B), workers)
    if workers == 1:
        work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, chunks))

    if measure == INTENSITIES:
        return np.max(np.abs(A1 - A2), axis=1)
    return sup_distance_arrays(A1, A2, A1.sum(axis=1) + P1, A2.sum(axis=1) + P2, tau)


def run_similarity_test(c1: Cohort, c2: Cohort, censoring1: CensoringSpec,
                        censoring2: CensoringSpec, cfg: TestConfig) -> TestReport:
    """Test ``H0: d >= eps`` against ``H1: d < eps`` by constrained parametric bootstrap.

    Administrative censoring in both groups gives the fixed-horizon variant;
    exponential censoring in both groups additionally estimates and
    re-simulates the censoring rates.
    """
    if c1.k != c2.k:
        raise ValueError("cohorts disagree on k")
    if type(censoring1) is not type(censoring2):
        raise ValueError("both groups must use the same censoring mechanism")
    tau = cfg.resolve_tau(censoring1, censoring2)

    fits = fit_pair(c1, c2, censoring1, censoring2)
    if cfg.measure == PROBABILITIES:
        witness = sup_distance(fits.group1, fits.group2, *fits.censor_rates, tau=tau)
    else:
        witness = intensity_witness(fits.group1, fits.group2)
    d_hat = witness.value

    constrained = None
    boot_params = fits
    if d_hat < cfg.epsilon:
        constrained = constrained_fit(c1, c2, censoring1, censoring2, cfg.epsilon, tau,
                                      measure=cfg.measure, seed=cfg.seed)
        if not constrained.converged:
            raise ConstrainedFitError(
                f"constrained fit did not converge (eps={cfg.epsilon}, "
                f"residual={constrained.constraint_residual:.3g})")
        boot_params = constrained.fitted

    stats = bootstrap_statistics(boot_params, censoring1, censoring2, len(c1), len(c2),
                                 cfg.B, tau, cfg.measure, cfg.seed, cfg.workers)
    q = bootstrap_quantile(stats, cfg.alpha)
    p = bootstrap_p_value(stats, d_hat)
    return TestReport(
        d_hat=d_hat,
        witness=witness,
        fits_unconstrained=fits,
        fits_constrained=constrained,
        bootstrap_stats=stats,
        q_alpha=q,
        p_value=p,
        reject=bool(d_hat < q),
        config=cfg,
        tau=tau,
        censoring=(str(censoring1), str(censoring2)),
    )
