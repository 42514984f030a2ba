"""Consolidated well-being curves computed from episode traces.

Each indicator is oriented so that higher values mean better collective
well-being, which the downstream metric pipeline relies on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .timeseries import TimeSeries, pointwise_mean

INDICATOR_NAMES = ("apples_pc", "trees_pc", "gini_equality", "hunger_index")

DEFAULT_H_MAX = 100


@dataclass
class EpisodeTrace:
    """Per-tick record of one simulated episode.

    Arrays are indexed by tick along axis 0.  ``consumed`` and
    ``hunger_ticks`` cover the welfare population only (bots excluded);
    ``ledger_*`` columns are cumulative counts over the whole world and
    include bot consumption.
    """

    n_agents: int
    apples_per_tree: np.ndarray          # (horizon, n_trees) live apples per tree
    consumed: np.ndarray                 # (horizon, n_agents) cumulative apples eaten
    hunger_ticks: np.ndarray             # (horizon, n_agents) ticks since last meal
    ledger_consumed: np.ndarray          # (horizon,) cumulative, all agents
    ledger_regrown: np.ndarray           # (horizon,) cumulative
    ledger_event_vanished: np.ndarray    # (horizon,) cumulative
    fired_triggers: tuple[int, ...] = ()
    positions: np.ndarray | None = None  # (horizon, n_agents, 2), for trace export
    bot_records: list = field(default_factory=list)  # per tick: [(id, (r, c), consumed)]

    @property
    def horizon(self) -> int:
        return self.apples_per_tree.shape[0]

    def live_tree_count(self) -> np.ndarray:
        return (self.apples_per_tree > 0).sum(axis=1)

    def validate(self) -> None:
        """Check structural invariants; raises ValueError on violation."""
        h = self.horizon
        for name in ("consumed", "hunger_ticks"):
            arr = getattr(self, name)
            if arr.shape != (h, self.n_agents):
                raise ValueError(f"{name} shape {arr.shape} != ({h}, {self.n_agents})")
        if np.any(np.diff(self.consumed, axis=0) < 0):
            raise ValueError("cumulative consumption must be non-decreasing")
        trees = self.live_tree_count()
        if np.any(np.diff(trees) > 0):
            raise ValueError("live tree count must be non-increasing")
        ate = np.diff(self.consumed, axis=0) > 0
        reset = self.hunger_ticks[1:] == 0
        if not np.array_equal(ate, reset):
            raise ValueError("hunger ticks must reset exactly at consumption ticks")


@dataclass
class IndicatorSet:
    """The consolidated well-being curves for one run.

    Any subset of the four canonical indicators may be present, but at
    least one must be.
    """

    apples_pc: TimeSeries | None = None
    trees_pc: TimeSeries | None = None
    gini_equality: TimeSeries | None = None
    hunger_index: TimeSeries | None = None

    def curves(self) -> dict[str, TimeSeries]:
        """Present indicators, in canonical order."""
        out = {name: getattr(self, name) for name in INDICATOR_NAMES}
        return {k: v for k, v in out.items() if v is not None}

    @property
    def k(self) -> int:
        return len(self.curves())

    @property
    def horizon(self) -> int:
        return len(next(iter(self.curves().values())))

    def validate(self) -> None:
        curves = self.curves()
        if not curves:
            raise ValueError("indicator set must contain at least one curve")
        horizons = {len(c) for c in curves.values()}
        if len(horizons) != 1:
            raise ValueError(f"indicator curves disagree on horizon: {horizons}")
        for name in ("gini_equality", "hunger_index"):
            c = getattr(self, name)
            if c is not None and (np.any(c.values < -1e-12) or np.any(c.values > 1 + 1e-12)):
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("apples_pc", "trees_pc"):
            c = getattr(self, name)
            if c is not None and np.any(c.values < 0):
                raise ValueError(f"{name} must be non-negative")

    def to_csv(self, path: str | Path) -> None:
        curves = self.curves()
        names = list(curves)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tick"] + names)
            for i in range(self.horizon):
                writer.writerow([i] + [repr(float(curves[n].values[i])) for n in names])

    @classmethod
    def from_csv(cls, path: str | Path) -> "IndicatorSet":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != "tick":
                raise ValueError(f"{path}: expected a 'tick' first column")
            names = header[1:]
            unknown = set(names) - set(INDICATOR_NAMES)
            if unknown:
                raise ValueError(f"{path}: unknown indicator columns {sorted(unknown)}")
            cols: list[list[float]] = [[] for _ in names]
            for row in reader:
                if not row:
                    continue
                for i, cell in enumerate(row[1:]):
                    cols[i].append(float(cell))
        kwargs = {name: TimeSeries(col) for name, col in zip(names, cols)}
        return cls(**kwargs)


@dataclass(frozen=True)
class IndicatorConfig:
    names: tuple[str, ...] = INDICATOR_NAMES
    h_max: int = DEFAULT_H_MAX

    def __post_init__(self):
        if not self.names:
            raise ValueError("at least one indicator must be selected")
        unknown = set(self.names) - set(INDICATOR_NAMES)
        if unknown:
            raise ValueError(f"unknown indicators: {sorted(unknown)}")
        if self.h_max < 1:
            raise ValueError("h_max must be >= 1")


def gini(values: Sequence[float]) -> float:
    """Mean-absolute-difference Gini index.

    G = sum_ij |x_i - x_j| / (2 n^2 mu).  Zero-total inputs return 0 by
    convention (nothing to distribute is trivially equal).
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("gini of an empty sequence is undefined")
    if np.any(arr < 0):
        raise ValueError("gini requires non-negative values")
    total = arr.sum()
    if total == 0:
        return 0.0
    n = arr.size
    diff_sum = np.abs(arr[:, None] - arr[None, :]).sum()
    return float(diff_sum / (2 * n * total))  # 2 n^2 mu == 2 n total


def apples_per_capita(trace: EpisodeTrace) -> TimeSeries:
    """Live apples on the map divided by the welfare population size."""
    if trace.n_agents <= 0:
        raise ValueError("apples_per_capita needs at least one agent")
    totals = trace.apples_per_tree.sum(axis=1)
    return TimeSeries(totals / trace.n_agents)


def trees_per_capita(trace: EpisodeTrace) -> TimeSeries:
    """Trees holding at least one live apple, divided by the population size."""
    if trace.n_agents <= 0:
        raise ValueError("trees_per_capita needs at least one agent")
    return TimeSeries(trace.live_tree_count() / trace.n_agents)


def gini_equality(trace: EpisodeTrace) -> TimeSeries:
    """1 - Gini of the cumulative consumption vector, per tick."""
    if trace.n_agents <= 0:
        raise ValueError("gini_equality needs at least one agent")
    x = trace.consumed.astype(np.float64)
    totals = x.sum(axis=1)
    n = trace.n_agents
    diff = np.abs(x[:, :, None] - x[:, None, :]).sum(axis=(1, 2))
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(totals > 0, diff / (2 * n * np.maximum(totals, 1e-300)), 0.0)
    return TimeSeries(1.0 - g)


def hunger_index(trace: EpisodeTrace, h_max: int = DEFAULT_H_MAX) -> TimeSeries:
    """Collective satiation level in [0, 1]; 1 means everyone just ate.

    Per agent, hunger saturates at 1 once ``h_max`` ticks pass without a
    meal; the index is one minus the mean hunger.
    """
    if h_max < 1:
        raise ValueError("h_max must be >= 1")
    hunger = np.minimum(1.0, trace.hunger_ticks / h_max)
    return TimeSeries(1.0 - hunger.mean(axis=1))


def _indicators_for(trace: EpisodeTrace, config: IndicatorConfig) -> IndicatorSet:
    out = IndicatorSet()
    if "apples_pc" in config.names:
        out.apples_pc = apples_per_capita(trace)
    if "trees_pc" in config.names:
        out.trees_pc = trees_per_capita(trace)
    if "gini_equality" in config.names:
        out.gini_equality = gini_equality(trace)
    if "hunger_index" in config.names:
        out.hunger_index = hunger_index(trace, config.h_max)
    return out


def compute_indicators(
    traces: Sequence[EpisodeTrace],
    config: IndicatorConfig = IndicatorConfig(),
) -> tuple[IndicatorSet, list[IndicatorSet]]:
    """Per-episode indicator sets plus their tick-wise mean consolidation.

    Returns ``(consolidated, per_episode)``; the consolidated set is the
    element-wise mean curve across episodes for each selected indicator.
    """
    if not traces:
        raise ValueError("need at least one episode trace")
    horizons = {t.horizon for t in traces}
    if len(horizons) != 1:
        raise ValueError(f"episode traces disagree on horizon: {sorted(horizons)}")
    per_episode = [_indicators_for(t, config) for t in traces]
    consolidated = IndicatorSet()
    for name in config.names:
        setattr(consolidated, name,
                pointwise_mean([getattr(s, name) for s in per_episode]))
    return consolidated, per_episode
