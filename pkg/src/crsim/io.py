"""Cohort CSV files, run configuration files and JSON reports.

Cohort files carry a mandatory header ``group,time,state`` followed by one
row per individual::

    group,time,state
    1,10.5,1
    1,90,0
    2,5,2

``state`` 0 marks a censored observation; ``k`` is the largest state seen
unless given explicitly.

Run configuration files are flat ``key = value`` files (an optional
``[run]`` section header is accepted)::

    measure = prob
    epsilon = 0.1
    alpha = 0.05
    bootstrap = 500
    censoring = adm:90
    seed = 1
"""

from __future__ import annotations

import configparser
import csv
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .inference import INTENSITIES, PROBABILITIES
from .model import CensoringSpec
from .simulate import Cohort

__all__ = [
    "CohortFileError",
    "ConfigError",
    "parse_cohorts",
    "write_cohorts",
    "RunConfig",
    "load_config",
    "write_json",
    "StudyConfig",
    "load_study_config",
]

HEADER = ("group", "time", "state")


class CohortFileError(ValueError):
    """Malformed cohort file; the message names the offending line."""


class ConfigError(ValueError):
    pass


def parse_cohorts(path: Union[str, Path], k: Optional[int] = None) -> Tuple[Cohort, Cohort]:
    """Read two cohorts from a ``group,time,state`` CSV file.

    Row order within each group is preserved.  Line numbers in error
    messages count the header as line 1.
    """
    rows = {1: ([], []), 2: ([], [])}
    max_state = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != HEADER:
            raise CohortFileError(f"{path}: line 1: expected header 'group,time,state', got {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise CohortFileError(f"{path}: line {line_no}: expected 3 fields, got {len(row)}")
            g_txt, t_txt, s_txt = (c.strip() for c in row)
            try:
                group, time, state = int(g_txt), float(t_txt), int(s_txt)
            except ValueError:
                raise CohortFileError(f"{path}: line {line_no}: non-numeric field in {row!r}") from None
            if group not in rows:
                raise CohortFileError(f"{path}: line {line_no}: group must be 1 or 2, got {group}")
            if not np.isfinite(time) or time <= 0:
                raise CohortFileError(f"{path}: line {line_no}: time must be positive, got {t_txt}")
            if state < 0:
                raise CohortFileError(f"{path}: line {line_no}: state must be >= 0, got {state}")
            if k is not None and state > k:
                raise CohortFileError(f"{path}: line {line_no}: state {state} exceeds k = {k}")
            rows[group][0].append(time)
            rows[group][1].append(state)
            max_state = max(max_state, state)
    for g, (times, _) in rows.items():
        if not times:
            raise CohortFileError(f"{path}: group {g} has no rows")
    k = k if k is not None else max(max_state, 1)
    return tuple(Cohort(t, s, k=k, label=g) for g, (t, s) in rows.items())


def write_cohorts(dest, c1: Cohort, c2: Cohort) -> None:
    """Inverse of :func:`parse_cohorts`; floats are written with ``repr`` so they round-trip.

    ``dest`` is a path or an open text stream.
    """
    if hasattr(dest, "write"):
        _write_rows(dest, c1, c2)
        return
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        _write_rows(fh, c1, c2)


def _write_rows(fh, c1, c2):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(HEADER)
    for group, cohort in ((1, c1), (2, c2)):
        for t, s in zip(cohort.times.tolist(), cohort.states.tolist()):
            writer.writerow((group, repr(t), s))


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by the ``test`` and ``scan`` commands.

    Exactly one of ``epsilon`` (single test) and ``grid`` (threshold scan)
    may be set.
    """

    measure: str = PROBABILITIES
    epsilon: Optional[float] = None
    grid: Optional[str] = None
    alpha: float = 0.05
    bootstrap: int = 500
    tau: Optional[float] = None
    censoring1: str = "adm:90"
    censoring2: str = "adm:90"
    k: Optional[int] = None
    seed: int = 0
    threads: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if self.measure not in (PROBABILITIES, INTENSITIES):
            raise ConfigError(f"measure must be 'prob' or 'int', got {self.measure!r}")
        if self.epsilon is not None and self.grid is not None:
            raise ConfigError("epsilon and grid are mutually exclusive")
        for spec in (self.censoring1, self.censoring2):
            try:
                CensoringSpec.parse(spec)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    def censorings(self) -> Tuple[CensoringSpec, CensoringSpec]:
        return CensoringSpec.parse(self.censoring1), CensoringSpec.parse(self.censoring2)

    def updated(self, **overrides) -> "RunConfig":
        """Copy with the non-``None`` overrides applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        # a command-line epsilon replaces a configured grid and vice versa
        if "epsilon" in changes:
            changes.setdefault("grid", None)
        if "grid" in changes:
            changes.setdefault("epsilon", None)
        return replace(self, **changes)


_CONVERT = {"epsilon": float, "alpha": float, "bootstrap": int, "tau": float, "k": int,
            "seed": int, "threads": int}


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read a ``key = value`` run configuration file.

    ``censoring`` sets both groups at once; ``censoring1``/``censoring2``
    set them separately.
    """
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text if text.lstrip().startswith("[") else "[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            key = key.replace("-", "_")
            if key == "censoring":
                values.setdefault("censoring1", raw)
                values.setdefault("censoring2", raw)
                continue
            if key not in known:
                raise ConfigError(f"{path}: unknown key {key!r}")
            try:
                values[key] = _CONVERT.get(key, str)(raw)
            except ValueError:
                raise ConfigError(f"{path}: bad value for {key}: {raw!r}") from None
    return RunConfig(**values)


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(obj: dict, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, default=_default)
        fh.write("\n")


@dataclass(frozen=True)
class StudyConfig:
    """Settings of the ``study`` command.

    ``scenarios`` and ``censorings`` are comma-separated names (``all`` for
    every one); ``sizes`` is a comma-separated list of ``n1xn2`` pairs.
    """

    scenarios: str = "all"
    censorings: str = "all"
    sizes: str = "200x200"
    measures: str = "prob,int"
    n_sim: int = 300
    bootstrap: int = 300
    alpha: float = 0.05
    seed: int = 0
    threads: int = 1
    out: Optional[str] = None

    def size_pairs(self):
        pairs = []
        for item in self.sizes.split(","):
            try:
                n1, n2 = (int(x) for x in item.lower().split("x"))
            except ValueError:
                raise ConfigError(f"bad sample size {item!r}; expected n1xn2") from None
            pairs.append((n1, n2))
        return pairs

    def measure_list(self):
        out = [m.strip() for m in self.measures.split(",") if m.strip()]
        bad = [m for m in out if m not in (PROBABILITIES, INTENSITIES)]
        if bad or not out:
            raise ConfigError(f"bad measures {self.measures!r}")
        return out

    def updated(self, **overrides) -> "StudyConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def load_study_config(path: Union[str, Path]) -> StudyConfig:
    """Read a ``key = value`` study configuration file."""
    parser = configparser.ConfigParser()
    text = Path(path).read_text(encoding="utf-8")
    try:
        parser.read_string(text if text.lstrip().startswith("[") else "[study]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    known = {f.name for f in fields(StudyConfig)}
    conv = {"n_sim": int, "bootstrap": int, "seed": int, "threads": int, "alpha": float}
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"{path}: unknown key {key!r}")
            try:
                values[key] = conv.get(key, str)(raw)
            except ValueError:
                raise ConfigError(f"{path}: bad value for {key}: {raw!r}") from None
    return StudyConfig(**values)
