"""Monte Carlo rejection-rate study over the built-in scenarios.

A *cell* is one (scenario, censoring, sample sizes, measure) combination.
Simulated data depend on the cell only through (scenario, censoring, sizes),
so the probability-based and intensity-based tests of a cell pair see the
same data sets replicate by replicate.
"""

from __future__ import annotations

import csv
import logging
import time
import zlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .inference import INTENSITIES, PROBABILITIES, ConstrainedFitError
from .model import (Administrative, CensoringSpec, Exponential, ModelParams,
                    intensity_distance, sup_distance)
from .simulate import DATA, RngStream, derive_seed, draw_cohort
from .testkit import TestConfig, run_similarity_test

__all__ = [
    "Scenario",
    "StudyResult",
    "StudyAborted",
    "SCENARIO_INTENSITIES",
    "CENSORING_SETTINGS",
    "SAMPLE_SIZES",
    "builtin_scenarios",
    "get_scenario",
    "thresholds",
    "run_scenario",
    "run_study",
    "write_results_csv",
    "read_results_csv",
    "RESULT_FIELDS",
    "DESK_PROFILE",
    "FULL_PROFILE",
    "APPLICATION_COUNTS",
    "application_params",
    "application_cohorts",
]

log = logging.getLogger(__name__)

TAU = 90.0

# group 1 and group 2 intensities for causes 1..3
SCENARIO_INTENSITIES: Dict[str, Tuple[Tuple[float, ...], Tuple[float, ...]]] = {
    "Null": ((0.0028, 0.0011, 0.0004), (0.0008, 0.0028, 0.0019)),
    "Margin": ((0.0023, 0.0011, 0.0004), (0.0008, 0.0026, 0.0019)),
    "Alt1": ((0.0018, 0.0011, 0.0004), (0.0008, 0.0021, 0.0014)),
    "Alt2": ((0.0013, 0.0011, 0.0004), (0.0008, 0.0016, 0.0014)),
    "Alt3": ((0.0010, 0.0011, 0.0004), (0.0008, 0.0013, 0.0009)),
    "Alt4": ((0.0009, 0.0011, 0.0004), (0.0008, 0.0012, 0.0007)),
    "Alt5": ((0.0009, 0.0011, 0.0004), (0.0008, 0.0012, 0.0005)),
}

CENSORING_SETTINGS: Dict[str, CensoringSpec] = {
    "adm": Administrative(TAU),
    "Exp(0.002)": Exponential(0.002),
    "Exp(0.005)": Exponential(0.005),
    "Exp(0.01)": Exponential(0.01),
}

SAMPLE_SIZES = [(50, 50), (100, 100), (200, 200), (300, 300), (250, 450), (500, 500)]

DESK_PROFILE = {"n_sim": 300, "B": 300}
FULL_PROFILE = {"n_sim": 1000, "B": 500}


# group sizes and cause-specific event counts by day 90 of a two-group
# hospital cohort with three competing discharge causes
APPLICATION_COUNTS = {1: (213, (17, 18, 6)), 2: (482, (29, 60, 31))}


def application_params(group: int, tau: float = TAU) -> ModelParams:
    """Constant intensities whose probabilities at ``tau`` match the observed event shares."""
    n, counts = APPLICATION_COUNTS[group]
    counts = np.asarray(counts, dtype=float)
    a0 = -np.log1p(-counts.sum() / n) / tau
    return ModelParams(a0 * counts / counts.sum())


def application_cohorts(seed: int = 0, tau: float = TAU):
    """Synthetic cohorts shaped like the hospital application (213 vs 482, three causes)."""
    adm = Administrative(tau)
    return tuple(draw_cohort(application_params(g, tau), adm, APPLICATION_COUNTS[g][0],
                             RngStream(seed, 0, g, DATA), label=g) for g in (1, 2))


class StudyAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    group1: ModelParams
    group2: ModelParams
    censoring_label: str
    censoring: CensoringSpec
    tau: float
    eps_int: float
    eps_inf: float

    def epsilon(self, measure: str) -> float:
        return self.eps_inf if measure == PROBABILITIES else self.eps_int

    def test_censoring(self) -> CensoringSpec:
        """Censoring as the analyst sees it: exponential rates are unknown."""
        if isinstance(self.censoring, Exponential):
            return Exponential()
        return self.censoring

    @property
    def d_inf(self) -> float:
        return sup_distance(self.group1, self.group2, self.censoring, self.censoring, self.tau).value

    @property
    def d_int(self) -> float:
        return intensity_distance(self.group1, self.group2)


def thresholds(tau: float = TAU) -> Dict[str, Tuple[float, float]]:
    """``(eps_int, eps_inf)`` per censoring setting: the distances of the margin scenario."""
    g1, g2 = (ModelParams(a) for a in SCENARIO_INTENSITIES["Margin"])
    eps_int = intensity_distance(g1, g2)
    return {label: (eps_int, sup_distance(g1, g2, c, c, tau).value)
            for label, c in CENSORING_SETTINGS.items()}


def builtin_scenarios() -> List[Scenario]:
    """All intensity rows crossed with the four censoring settings, thresholds attached."""
    eps = thresholds()
    out = []
    for name, (a1, a2) in SCENARIO_INTENSITIES.items():
        for label, cens in CENSORING_SETTINGS.items():
            out.append(Scenario(name, ModelParams(a1), ModelParams(a2), label, cens, TAU, *eps[label]))
    return out


def get_scenario(name: str, censoring: str) -> Scenario:
    for s in builtin_scenarios():
        if s.name.lower() == name.lower() and s.censoring_label.lower() == censoring.lower():
            return s
    raise KeyError(f"no scenario {name!r} with censoring {censoring!r}")


RESULT_FIELDS = ["scenario", "censoring", "n1", "n2", "measure", "n_sim", "B", "alpha",
                 "rejections", "rate", "seed"]


@dataclass(frozen=True)
class StudyResult:
    scenario: str
    censoring: str
    n1: int
    n2: int
    measure: str
    n_sim: int
    B: int
    alpha: float
    rejections: int
    seed: int
    wall_time: float = 0.0
    failures: Tuple[int, ...] = field(default=())

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.n_sim

    @property
    def sample_sizes(self) -> Tuple[int, int]:
        return (self.n1, self.n2)

    def row(self) -> dict:
        return {"scenario": self.scenario, "censoring": self.censoring, "n1": self.n1,
                "n2": self.n2, "measure": self.measure, "n_sim": self.n_sim, "B": self.B,
                "alpha": self.alpha, "rejections": self.rejections,
                "rate": self.rejection_rate, "seed": self.seed}


def cell_seed(seed: int, scenario: str, censoring: str, n1: int, n2: int) -> int:
    tag = zlib.crc32(f"{scenario}|{censoring}|{n1}|{n2}".encode())
    return derive_seed(seed, tag)


def _replicates(s: Scenario, n1, n2, B, alpha, measure, seed, indices):
    """Run the test on the given replicate indices; returns ``(index, reject or None)`` pairs."""
    base = cell_seed(seed, s.name, s.censoring_label, n1, n2)
    cens = s.test_censoring()
    out = []
    for r in indices:
        c1 = draw_cohort(s.group1, s.censoring, n1, RngStream(base, r, 1, DATA), label=1)
        c2 = draw_cohort(s.group2, s.censoring, n2, RngStream(base, r, 2, DATA), label=2)
        cfg = TestConfig(epsilon=s.epsilon(measure), alpha=alpha, B=B, tau=s.tau,
                         measure=measure, seed=derive_seed(base, r))
        try:
            out.append((r, run_similarity_test(c1, c2, cens, cens, cfg).reject))
        except ConstrainedFitError as exc:
            log.warning("replicate %d of %s/%s failed: %s", r, s.name, s.censoring_label, exc)
            out.append((r, None))
    return out


def run_scenario(s: Scenario, n1: int, n2: int, n_sim: int = DESK_PROFILE["n_sim"],
                 B: int = DESK_PROFILE["B"], alpha: float = 0.05,
                 measure: str = PROBABILITIES, seed: int = 0, workers: int = 1,
                 max_failure_rate: float = 0.01) -> StudyResult:
    """Empirical rejection rate of the similarity test in one cell.

    Failed replicates (constrained fit did not converge) count as
    non-rejections; more than ``max_failure_rate`` of them aborts the cell.
    ``workers > 1`` spreads replicates over processes; the result is the
    same for every worker count.
    """
    if n_sim < 1:
        raise ValueError("n_sim must be >= 1")
    start = time.perf_counter()
    chunks = [c for c in np.array_split(np.arange(n_sim), max(workers, 1) * 4) if c.size]
    if workers > 1:
        from joblib import Parallel, delayed
        parts = Parallel(n_jobs=workers)(
            delayed(_replicates)(s, n1, n2, B, alpha, measure, seed, c.tolist()) for c in chunks)
    else:
        parts = [_replicates(s, n1, n2, B, alpha, measure, seed, c.tolist()) for c in chunks]
    outcome: List[Optional[bool]] = [None] * n_sim
    for part in parts:
        for r, rej in part:
            outcome[r] = rej
    failures = tuple(r for r, rej in enumerate(outcome) if rej is None)
    if len(failures) > max_failure_rate * n_sim:
        raise StudyAborted(f"{len(failures)} of {n_sim} replicates failed in "
                           f"{s.name}/{s.censoring_label} (indices {failures[:10]}...)")
    rejections = sum(1 for rej in outcome if rej)
    return StudyResult(s.name, s.censoring_label, n1, n2, measure, n_sim, B, alpha, rejections,
                       seed, time.perf_counter() - start, failures)


def run_study(scenarios: Iterable[Scenario], sizes: Sequence[Tuple[int, int]],
              measures: Sequence[str] = (PROBABILITIES, INTENSITIES),
              n_sim: int = DESK_PROFILE["n_sim"], B: int = DESK_PROFILE["B"],
              alpha: float = 0.05, seed: int = 0, workers: int = 1,
              progress=None) -> List[StudyResult]:
    """Every scenario x size x measure cell; ``progress`` is called with each result."""
    results = []
    for s in scenarios:
        for n1, n2 in sizes:
            for measure in measures:
                res = run_scenario(s, n1, n2, n_sim, B, alpha, measure, seed, workers)
                results.append(res)
                if progress is not None:
                    progress(res)
    return results


def write_results_csv(results: Iterable[StudyResult], dest) -> None:
    """One row per cell; ``dest`` is a path or an open text stream."""
    if hasattr(dest, "write"):
        _write_results(results, dest)
        return
    with open(dest, "w", newline="") as fh:
        _write_results(results, fh)


def _write_results(results, fh):
    writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in results:
        writer.writerow(r.row())


def read_results_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key in ("n1", "n2", "n_sim", "B", "rejections", "seed"):
            row[key] = int(row[key])
        for key in ("alpha", "rate"):
            row[key] = float(row[key])
    return rows
