"""Smallest threshold at which similarity is established.

The hypotheses are nested in the threshold, so testing an increasing grid
of thresholds and reporting the first rejection keeps the overall level.
Every grid point reuses the same bootstrap seed, which makes the p-values
comparable across thresholds.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .inference import PROBABILITIES
from .model import CensoringSpec
from .simulate import Cohort
from .testkit import SCHEMA_VERSION, TestConfig, TestReport, run_similarity_test

__all__ = ["ScanResult", "MonotonicityError", "min_epsilon", "default_grid", "parse_grid"]

log = logging.getLogger(__name__)


class MonotonicityError(RuntimeError):
    """A rejection at some threshold was followed by a non-rejection at a larger one."""


def default_grid() -> np.ndarray:
    return np.round(np.arange(1, 31) * 0.01, 10)


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:step`` (inclusive of ``hi``) or a comma-separated list."""
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        if step <= 0 or hi < lo:
            raise ValueError(f"bad grid {text!r}")
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return np.round(lo + step * np.arange(n), 10)
    return np.array([float(x) for x in text.split(",") if x.strip()])


@dataclass(frozen=True, eq=False)
class ScanResult:
    grid: np.ndarray
    p_values: np.ndarray
    rejections: np.ndarray
    epsilon_hat: Optional[float]
    seed: int
    alpha: float
    d_hat: float
    violations: List[int] = field(default_factory=list)  # grid indices breaking the up-set
    refined: Optional[float] = None
    reports: List[TestReport] = field(default_factory=list, repr=False)

    @property
    def monotone(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "alpha": self.alpha,
            "seed": self.seed,
            "d_hat": self.d_hat,
            "grid": self.grid.tolist(),
            "p_values": self.p_values.tolist(),
            "rejections": self.rejections.tolist(),
            "epsilon_hat": self.epsilon_hat,
            "epsilon_refined": self.refined,
            "violations": list(self.violations),
        }

    def table(self) -> str:
        """p-values per threshold; rejections are starred."""
        head = "threshold " + " ".join(f"{e:>7.4g}" for e in self.grid)
        vals = "p-value   " + " ".join(
            f"{p:>6.3f}{'*' if r else ' '}" for p, r in zip(self.p_values, self.rejections))
        tail = (f"smallest rejecting threshold: {self.epsilon_hat:g}" if self.epsilon_hat is not None
                else "no rejection on the grid")
        if self.refined is not None:
            tail += f" (refined: {self.refined:.4g})"
        return "\n".join([head, vals, tail])


def _one(c1, c2, censoring1, censoring2, eps, alpha, B, tau, measure, seed):
    cfg = TestConfig(epsilon=float(eps), alpha=alpha, B=B, tau=tau, measure=measure, seed=seed)
    return run_similarity_test(c1, c2, censoring1, censoring2, cfg)


def min_epsilon(c1: Cohort, c2: Cohort, censoring1: CensoringSpec, censoring2: CensoringSpec,
                alpha: float = 0.05, B: int = 500, tau: Optional[float] = None,
                grid: Optional[Sequence[float]] = None, seed: int = 0,
                measure: str = PROBABILITIES, refine: bool = False,
                resolution: float = 1e-3, workers: int = 1,
                strict: bool = False) -> ScanResult:
    """Run the similarity test along ``grid`` and report the first rejecting threshold.

    Parameters
    ----------
    grid : sequence of float, optional
        Strictly increasing thresholds; defaults to 0.01, 0.02, ..., 0.30.
    refine : bool
        Bisect between the last accepting and the first rejecting grid point
        down to ``resolution``.
    workers : int
        Grid points evaluated concurrently; results are gathered by index and
        do not depend on this value.
    strict : bool
        Raise ``MonotonicityError`` when the rejections along the grid are not
        an up-set; otherwise the offending indices are recorded.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be non-empty and strictly increasing")
    if measure == PROBABILITIES and (grid[0] <= 0 or grid[-1] >= 1):
        raise ValueError("thresholds must lie in (0, 1)")

    def run(eps):
        return _one(c1, c2, censoring1, censoring2, eps, alpha, B, tau, measure, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, grid))
    else:
        reports = [run(e) for e in grid]

    p_values = np.array([r.p_value for r in reports])
    rejections = np.array([r.reject for r in reports])
    violations = [i for i in range(1, grid.size) if rejections[i - 1] and not rejections[i]]
    if violations:
        msg = f"rejections not monotone along the grid at {grid[violations].tolist()}"
        if strict:
            raise MonotonicityError(msg)
        log.warning(msg)

    first = np.flatnonzero(rejections)
    eps_hat = float(grid[first[0]]) if first.size else None

    refined = None
    if refine and first.size:
        hi = float(grid[first[0]])
        lo = float(grid[first[0] - 1]) if first[0] > 0 else 0.0
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            if run(mid).reject:
                hi = mid
            else:
                lo = mid
        refined = hi

    return ScanResult(grid=grid, p_values=p_values, rejections=rejections, epsilon_hat=eps_hat,
                      seed=seed, alpha=alpha, d_hat=reports[0].d_hat, violations=violations,
                      refined=refined, reports=reports)
