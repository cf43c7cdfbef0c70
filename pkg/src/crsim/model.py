"""Constant-intensity competing-risks model.

Transition probabilities out of the initial state have the scaled-exponential
form ``P_0j(t) = a_j * (1 - exp(-R t)) / R`` where ``R`` is the all-cause
hazard plus, under exponential censoring, the censoring rate.  Everything in
this module is closed form; the sup-norm distance between two such models is
evaluated exactly from a two-point candidate set per cause.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

__all__ = [
    "ModelParams",
    "CensoringSpec",
    "Administrative",
    "Exponential",
    "SupDistanceWitness",
    "IntensityWitness",
    "transition_probability",
    "transition_probabilities",
    "sup_distance",
    "sup_distance_arrays",
    "intensity_distance",
]


@dataclass(frozen=True)
class ModelParams:
    """Cause-specific constant transition intensities of one group.

    Parameters
    ----------
    intensities : array_like
        ``k`` non-negative rates, one per competing cause (per unit time).
    """

    intensities: np.ndarray

    def __post_init__(self):
        a = np.array(self.intensities, dtype=float).reshape(-1)
        if a.size < 1:
            raise ValueError("need at least one cause")
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise ValueError(f"intensities must be finite and >= 0, got {a}")
        if not np.any(a > 0):
            raise ValueError("at least one intensity must be positive")
        a.setflags(write=False)
        object.__setattr__(self, "intensities", a)

    @classmethod
    def estimate(cls, intensities) -> "ModelParams":
        """Wrap fitted rates; unlike the constructor, an all-zero vector is allowed.

        A cohort without any observed event has MLE zero for every cause.
        """
        a = np.array(intensities, dtype=float).reshape(-1)
        if a.size < 1 or not np.all(np.isfinite(a)) or np.any(a < 0):
            raise ValueError(f"invalid intensity estimate {a}")
        a.setflags(write=False)
        obj = object.__new__(cls)
        object.__setattr__(obj, "intensities", a)
        return obj

    @property
    def k(self) -> int:
        return self.intensities.size

    @property
    def all_cause_hazard(self) -> float:
        return float(np.sum(self.intensities))

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return np.array_equal(self.intensities, other.intensities)

    def __hash__(self):
        return hash(self.intensities.tobytes())

    def __repr__(self):
        return f"ModelParams({self.intensities.tolist()})"


class CensoringSpec:
    """Base class of the two supported censoring mechanisms."""

    kind: str = ""

    def probability_rate(self) -> float:
        """Rate added to the all-cause hazard in the transition probabilities."""
        raise NotImplementedError

    @staticmethod
    def parse(text: str) -> "CensoringSpec":
        """Parse ``adm:<T>``, ``exp`` or ``exp:<rate>``."""
        kind, _, value = text.strip().partition(":")
        kind = kind.lower()
        if kind in ("adm", "administrative"):
            if not value:
                raise ValueError("administrative censoring needs a horizon, e.g. adm:90")
            return Administrative(float(value))
        if kind in ("exp", "exponential"):
            return Exponential(float(value) if value else None)
        raise ValueError(f"unknown censoring {text!r}")


@dataclass(frozen=True)
class Administrative(CensoringSpec):
    """Type I censoring of everyone still event-free at ``horizon``."""

    horizon: float
    kind: str = field(default="adm", init=False, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    def probability_rate(self) -> float:
        return 0.0

    @property
    def label(self) -> str:
        return "adm"

    def __str__(self):
        return f"adm:{self.horizon:g}"


@dataclass(frozen=True)
class Exponential(CensoringSpec):
    """Independent Exp(rate) censoring times.

    ``rate=None`` marks a rate that is unknown and will be estimated from
    data; simulation and population-level distances need a concrete rate.
    """

    rate: Optional[float] = None
    kind: str = field(default="exp", init=False, repr=False)

    def __post_init__(self):
        if self.rate is not None and not (np.isfinite(self.rate) and self.rate >= 0):
            raise ValueError(f"censoring rate must be >= 0, got {self.rate}")

    def probability_rate(self) -> float:
        if self.rate is None:
            raise ValueError("exponential censoring rate is unknown")
        return float(self.rate)

    @property
    def label(self) -> str:
        return "exp" if self.rate is None else f"Exp({self.rate:g})"

    def __str__(self):
        return "exp" if self.rate is None else f"exp:{self.rate:g}"


@dataclass(frozen=True)
class SupDistanceWitness:
    """Value and location of the sup-norm distance between two models."""

    value: float
    arg_time: float
    arg_cause: int  # 1-based
    sign: int  # +1 if group 1 is above group 2 at the witness


@dataclass(frozen=True)
class IntensityWitness:
    value: float
    arg_cause: int  # 1-based
    sign: int


def _decay(intensities, censor_rate):
    return np.sum(intensities, axis=-1) + censor_rate


def _cdf_scale(rate, t):
    """(1 - exp(-rate t)) / rate, with the limit t at rate 0."""
    rate = np.asarray(rate, dtype=float)
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.expm1(-rate * t) / rate
    return np.where(rate > 0, out, t)


def transition_probabilities(intensities, t, censor_rate=0.0):
    """Vectorized ``P_0j(t)`` for every cause.

    Broadcasts ``intensities`` of shape ``(..., k)`` against ``t`` of shape
    ``(...)`` and returns shape ``(..., k)``.
    """
    a = np.asarray(intensities, dtype=float)
    rate = _decay(a, censor_rate)
    scale = _cdf_scale(rate, t)
    return a * np.asarray(scale)[..., None]


def transition_probability(params: ModelParams, cause: int, t: float,
                           censor_rate: float = 0.0) -> float:
    """Probability of having moved to ``cause`` (1-based) by time ``t``.

    ``censor_rate`` is the exponential censoring rate; pass 0 for the
    administrative / uncensored case.  If the all-cause hazard plus the
    censoring rate is zero the probability is 0 (limit of the closed form).
    """
    if not 1 <= cause <= params.k:
        raise IndexError(f"cause must be in 1..{params.k}, got {cause}")
    if t < 0:
        raise ValueError("t must be non-negative")
    if censor_rate < 0:
        raise ValueError("censor_rate must be non-negative")
    if params.all_cause_hazard + censor_rate == 0.0:
        return 0.0
    return float(transition_probabilities(params.intensities, t, censor_rate)[cause - 1])


def _per_cause_sup(a1, a2, r1, r2, tau):
    """Exact ``max_t |P1_j(t) - P2_j(t)|`` per cause on ``[0, tau]``.

    ``a1, a2`` have shape ``(..., k)`` and ``r1, r2`` (effective decay rates)
    shape ``(...)``.  Returns ``(values, times, signs)`` each of shape
    ``(..., k)``.
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    r1 = np.asarray(r1, dtype=float)[..., None]
    r2 = np.asarray(r2, dtype=float)[..., None]

    d_tau = a1 * _cdf_scale(r1, tau) - a2 * _cdf_scale(r2, tau)

    # Interior stationary point of the difference: a1 e^{-r1 t} = a2 e^{-r2 t}.
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t_star = np.log(a1 / a2) / (r1 - r2)
    ok = np.isfinite(t_star) & (t_star > 0) & (t_star < tau)
    t_eval = np.where(ok, t_star, 0.0)
    d_star = a1 * _cdf_scale(r1, t_eval) - a2 * _cdf_scale(r2, t_eval)
    d_star = np.where(ok, d_star, 0.0)

    use_star = np.abs(d_star) > np.abs(d_tau)
    diff = np.where(use_star, d_star, d_tau)
    times = np.where(use_star, t_eval, float(tau))
    signs = np.where(diff < 0, -1, 1)
    return np.abs(diff), times, signs


def sup_distance_arrays(a1, a2, r1, r2, tau):
    """Vectorized sup-norm distance for batches of parameter pairs.

    Parameters
    ----------
    a1, a2 : ndarray, shape (..., k)
        Intensities of groups 1 and 2.
    r1, r2 : array_like, shape (...)
        Effective decay rates, i.e. all-cause hazard plus censoring rate.
    tau : float
        Right end of the time window.

    Returns
    -------
    ndarray, shape (...)
    """
    values, _, _ = _per_cause_sup(a1, a2, r1, r2, tau)
    return values.max(axis=-1)


def _check_pair(m1: ModelParams, m2: ModelParams):
    if m1.k != m2.k:
        raise ValueError(f"models have different numbers of causes ({m1.k} vs {m2.k})")


def _rate_of(c: Union[CensoringSpec, float, None]) -> float:
    if c is None:
        return 0.0
    if isinstance(c, CensoringSpec):
        return c.probability_rate()
    return float(c)


def sup_distance(m1: ModelParams, m2: ModelParams,
                 c1: Union[CensoringSpec, float, None] = None,
                 c2: Union[CensoringSpec, float, None] = None,
                 tau: float = 90.0) -> SupDistanceWitness:
    """Maximal absolute difference of transition probabilities over causes and ``[0, tau]``.

    Censoring enters through each group's effective decay rate: the all-cause
    hazard under administrative censoring, hazard plus ``rate`` under
    exponential censoring.  A plain float is read as an exponential rate.

    For each cause the difference of two scaled exponentials has at most one
    interior stationary point, so evaluating it there and at ``tau`` is exact.
    """
    _check_pair(m1, m2)
    if not tau > 0:
        raise ValueError("tau must be positive")
    r1 = m1.all_cause_hazard + _rate_of(c1)
    r2 = m2.all_cause_hazard + _rate_of(c2)
    values, times, signs = _per_cause_sup(m1.intensities, m2.intensities, r1, r2, tau)
    j = int(np.argmax(values))
    return SupDistanceWitness(value=float(values[j]), arg_time=float(times[j]),
                              arg_cause=j + 1, sign=int(signs[j]))


def intensity_distance(m1: ModelParams, m2: ModelParams) -> float:
    """``max_j |a1_j - a2_j|``."""
    return intensity_witness(m1, m2).value


def intensity_witness(m1: ModelParams, m2: ModelParams) -> IntensityWitness:
    _check_pair(m1, m2)
    diff = m1.intensities - m2.intensities
    j = int(np.argmax(np.abs(diff)))
    return IntensityWitness(value=float(abs(diff[j])), arg_cause=j + 1,
                            sign=-1 if diff[j] < 0 else 1)
