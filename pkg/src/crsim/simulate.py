"""Simulation of competing-risks pathways under censoring.

Each individual consumes exactly three uniforms, laid out row-wise: the
latent all-cause event time, the cause, and the censoring time.  Because of
that fixed layout a cohort drawn in one call or in consecutive chunks from
the same stream is identical.

Random streams are counter based (Philox): the master seed is the key and
``(stream_id, substream, domain)`` occupy the high counter words, so every
(replicate, group) pair owns a disjoint, reproducible stream no matter which
worker consumes it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .model import Administrative, CensoringSpec, Exponential, ModelParams

__all__ = [
    "Observation",
    "Cohort",
    "RngStream",
    "derive_seed",
    "draw_pathway",
    "draw_cohort",
    "draw_arrays",
    "uniform_block",
    "pathways_from_uniforms",
    "DATA",
    "BOOTSTRAP",
]

_MASK64 = (1 << 64) - 1

# Stream domains: keep data simulation and bootstrap resampling disjoint.
DATA = 0
BOOTSTRAP = 1
MULTISTART = 2


@dataclass(frozen=True)
class RngStream:
    """Address of an independent random stream.

    ``master_seed`` keys the generator; ``stream_id`` is the replicate index,
    ``substream`` the group (1 or 2) and ``domain`` separates data draws from
    bootstrap draws.
    """

    master_seed: int
    stream_id: int = 0
    substream: int = 0
    domain: int = DATA

    def generator(self) -> np.random.Generator:
        key = [self.master_seed & _MASK64, (self.master_seed >> 64) & _MASK64]
        counter = [0, self.substream & _MASK64, self.stream_id & _MASK64, self.domain & _MASK64]
        return np.random.Generator(np.random.Philox(counter=counter, key=key))


def derive_seed(master_seed: int, *keys: int) -> int:
    """Hash ``(master_seed, *keys)`` into a fresh 64-bit seed."""
    ss = np.random.SeedSequence(master_seed & _MASK64, spawn_key=tuple(int(k) & _MASK64 for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class Observation(NamedTuple):
    time: float
    state: int  # 0 = censored


@dataclass(frozen=True, eq=False)
class Cohort:
    """Observed sample of one group: observed times and terminal states."""

    times: np.ndarray
    states: np.ndarray
    k: int
    label: int = 1

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        states = np.array(self.states, dtype=np.int64).reshape(-1)
        if times.size == 0:
            raise ValueError("cohort is empty")
        if times.shape != states.shape:
            raise ValueError("times and states differ in length")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if np.any(~np.isfinite(times)) or np.any(times <= 0):
            raise ValueError("observed times must be finite and positive")
        if np.any(states < 0) or np.any(states > self.k):
            raise ValueError(f"states must lie in 0..{self.k}")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @classmethod
    def from_observations(cls, observations, k: int, label: int = 1) -> "Cohort":
        obs = list(observations)
        return cls([o[0] for o in obs], [o[1] for o in obs], k=k, label=label)

    def __len__(self):
        return self.times.size

    def __iter__(self) -> Iterator[Observation]:
        for t, s in zip(self.times.tolist(), self.states.tolist()):
            yield Observation(t, s)

    def __getitem__(self, i) -> Observation:
        return Observation(float(self.times[i]), int(self.states[i]))

    def __eq__(self, other):
        if not isinstance(other, Cohort):
            return NotImplemented
        return (self.k == other.k and self.label == other.label
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.states, other.states))

    @property
    def counts(self) -> np.ndarray:
        """Number of observations ending in each state ``0..k``."""
        return np.bincount(self.states, minlength=self.k + 1)

    @property
    def total_time(self) -> float:
        return float(np.sum(self.times))

    def head(self, n: int) -> "Cohort":
        return Cohort(self.times[:n], self.states[:n], k=self.k, label=self.label)


def _exp_from_uniform(u, rate):
    # u in [0, 1): 1 - u in (0, 1] keeps times finite; u == 0 would give a zero time
    u = np.where(u == 0.0, 2.0 ** -54, u)
    with np.errstate(divide="ignore"):
        return -np.log1p(-u) / rate


def uniform_block(streams, n: int) -> np.ndarray:
    """Stack ``stream.generator().random((n, 3))`` for each stream.

    Equivalent to building one generator per stream, but reuses a single
    Philox instance by resetting its key and counter.
    """
    streams = list(streams)
    out = np.empty((len(streams), n, 3))
    if not streams:
        return out
    bitgen = np.random.Philox(key=[0, 0])
    gen = np.random.Generator(bitgen)
    state = bitgen.state
    for i, s in enumerate(streams):
        state["state"]["key"][:] = [s.master_seed & _MASK64, (s.master_seed >> 64) & _MASK64]
        state["state"]["counter"][:] = [0, s.substream & _MASK64, s.stream_id & _MASK64,
                                        s.domain & _MASK64]
        state["buffer"][:] = 0
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        bitgen.state = state
        gen.random(out=out[i])
    return out


def pathways_from_uniforms(intensities, censoring: CensoringSpec, u: np.ndarray):
    """Map uniforms of shape ``(..., n, 3)`` to ``(times, states)`` of shape ``(..., n)``.

    Column 0 drives the all-cause event time, column 1 the cause (inverse
    CDF of the categorical law ``a_j / a_0``), column 2 the exponential
    censoring time.
    """
    a = np.asarray(intensities, dtype=float)
    a0 = a.sum()
    if a0 > 0:
        event = _exp_from_uniform(u[..., 0], a0)
        cum = np.cumsum(a) / a0
    else:
        event = np.full(u.shape[:-1], np.inf)
        cum = np.linspace(1 / a.size, 1, a.size)
    cause = np.minimum(np.searchsorted(cum, u[..., 1], side="right"), a.size - 1) + 1

    if isinstance(censoring, Administrative):
        # ties event == horizon count as censored
        cens = np.full(event.shape, float(censoring.horizon))
        censored = event >= cens
    elif isinstance(censoring, Exponential):
        psi = censoring.probability_rate()
        cens = _exp_from_uniform(u[..., 2], psi) if psi > 0 else np.full(event.shape, np.inf)
        censored = cens < event
    else:
        raise TypeError(f"unsupported censoring {censoring!r}")

    times = np.where(censored, cens, event)
    states = np.where(censored, 0, cause)
    if not np.all(np.isfinite(times)):
        raise ValueError("pathway never ends: no event hazard and no censoring")
    return times, states


def draw_arrays(intensities, censoring: CensoringSpec, n: int, gen: np.random.Generator):
    """Draw ``n`` pathways from ``gen``; returns ``(times, states)`` arrays."""
    return pathways_from_uniforms(intensities, censoring, gen.random((n, 3)))


def draw_cohort(params: ModelParams, censoring: CensoringSpec, n: int,
                rng: RngStream, label: int = 1,
                chunk_size: Optional[int] = None) -> Cohort:
    """Draw ``n`` independent pathways from ``params`` under ``censoring``.

    ``chunk_size`` only changes how many uniforms are requested per call; the
    cohort is the same for every value.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = rng.generator()
    if chunk_size is None or chunk_size >= n:
        times, states = draw_arrays(params.intensities, censoring, n, gen)
    else:
        parts = [draw_arrays(params.intensities, censoring, min(chunk_size, n - i), gen)
                 for i in range(0, n, chunk_size)]
        times = np.concatenate([p[0] for p in parts])
        states = np.concatenate([p[1] for p in parts])
    return Cohort(times, states, k=params.k, label=label)


def draw_pathway(params: ModelParams, censoring: CensoringSpec, rng: RngStream) -> Observation:
    """Single pathway; the first individual of ``draw_cohort`` on the same stream."""
    return draw_cohort(params, censoring, 1, rng)[0]
