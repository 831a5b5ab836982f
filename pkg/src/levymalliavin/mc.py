"""Monte Carlo driver: chunked path streams and deterministic reduction.

Per-path metrics are accumulated chunk by chunk as (count, sum, sum of
squares); chunk boundaries are part of the configuration, so a run is a
pure function of (config, base_seed). Paths are independent, so chunks
could be farmed out to workers; the reduction below is order-fixed and
gives the same result either way.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .batch import DEFAULT_CHUNK, PathBatch, iter_batches
from .paths import LevyTriplet


@dataclass(frozen=True)
class MCConfig:
    n_paths: int
    base_seed: int
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")


@dataclass
class StreamStats:
    """Running first/second moments of a scalar per-path metric."""

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        self.count += values.size
        self.total += float(values.sum())
        self.total_sq += float(np.dot(values, values))

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else float("nan")

    @property
    def variance(self) -> float:
        if self.count < 2:
            return float("nan")
        m = self.mean
        return max((self.total_sq - self.count * m * m) / (self.count - 1), 0.0)

    @property
    def stderr(self) -> float:
        return float(np.sqrt(self.variance / self.count)) if self.count else float("nan")


def run_streaming(triplet: LevyTriplet, grid_size: int, mc: MCConfig,
                  metric: Callable[[PathBatch], np.ndarray],
                  truncation_eps: Optional[float] = None) -> StreamStats:
    """Accumulate a per-path metric over mc.n_paths simulated paths."""
    stats = StreamStats()
    for batch in iter_batches(triplet, grid_size, mc.n_paths, mc.base_seed,
                              mc.chunk_size, truncation_eps):
        stats.add(metric(batch))
    return stats


def z_score(mean_diff: float, stderr_diff: float) -> tuple[float, bool]:
    """|mean| / stderr with a degenerate-variance guard.

    Returns (z, degenerate). A difference that is identically zero in
    every path has no variance; that is a pass (z = 0), flagged so
    reports can say why.
    """
    if stderr_diff == 0.0 or not np.isfinite(stderr_diff):
        if abs(mean_diff) < 1e-14:
            return 0.0, True
        return float("inf"), True
    return abs(mean_diff) / stderr_diff, False
