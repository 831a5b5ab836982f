"""Vectorized simulation of many paths at once.

Paths are stored column-parallel: a (P, G+1) Brownian array plus a flat,
per-path-sorted jump array indexed CSR-style by ``offsets``. One batch is
drawn from streams keyed by (base_seed, stream, chunk), so a batch is
exactly reproducible given (base_seed, n_paths, chunk layout); it is a
different (equally valid) sample than concatenating single-path
simulations, which key their streams per seed.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Optional

import numpy as np

from .measures import SizeSet, TruncatableMeasure
from .paths import (LevyPath, LevyTriplet, _finite_measure, stream_generator)

DEFAULT_CHUNK = 32768


@dataclass(frozen=True)
class PathBatch:
    """A block of simulated paths sharing one grid."""

    triplet: LevyTriplet
    grid: np.ndarray               # (G+1,)
    brownian: np.ndarray           # (P, G+1)
    jump_times: np.ndarray         # (J,) sorted within each path segment
    jump_sizes: np.ndarray         # (J,)
    offsets: np.ndarray            # (P+1,) int64; path p owns [offsets[p], offsets[p+1])
    base_seed: int
    first_index: int = 0           # global index of path 0 in this chunk

    @property
    def n_paths(self) -> int:
        return self.brownian.shape[0]

    @property
    def T(self) -> float:
        return self.triplet.T

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def jump_path_index(self) -> np.ndarray:
        """Path index of each flat jump entry."""
        return np.repeat(np.arange(self.n_paths), self.counts)

    def per_path_sum(self, per_jump_values: np.ndarray) -> np.ndarray:
        """Sum flat per-jump values into one value per path."""
        return np.bincount(self.jump_path_index, weights=per_jump_values,
                           minlength=self.n_paths)

    def path(self, p: int) -> LevyPath:
        """Materialize path p (seed field records the batch provenance)."""
        lo, hi = self.offsets[p], self.offsets[p + 1]
        return LevyPath(self.triplet, self.grid, self.brownian[p],
                        self.jump_times[lo:hi], self.jump_sizes[lo:hi],
                        seed=self.base_seed)

    def restrict(self, theta: SizeSet) -> "PathBatch":
        """Drop jumps with size outside theta (measure restricted too)."""
        keep = theta.contains(self.jump_sizes)
        kept_counts = np.bincount(self.jump_path_index[keep],
                                  minlength=self.n_paths)
        offsets = np.concatenate([[0], np.cumsum(kept_counts)])
        trip = replace(self.triplet, nu=self.triplet.nu.restrict(theta))
        return PathBatch(trip, self.grid, self.brownian,
                         self.jump_times[keep], self.jump_sizes[keep],
                         offsets, self.base_seed, self.first_index)


def simulate_batch(triplet: LevyTriplet, grid_size: int, n_paths: int,
                   base_seed: int, chunk_index: int = 0,
                   truncation_eps: Optional[float] = None,
                   first_index: int = 0) -> PathBatch:
    """Simulate ``n_paths`` paths in one vectorized draw."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    nu = _finite_measure(triplet, truncation_eps)
    T = triplet.T
    grid = np.linspace(0.0, T, grid_size + 1)

    def rng(stream: int) -> np.random.Generator:
        return stream_generator(base_seed, (stream + 1) * 1000 + chunk_index)

    dt = np.sqrt(np.diff(grid))
    incs = rng(0).standard_normal((n_paths, grid_size)) * dt
    brownian = np.concatenate(
        [np.zeros((n_paths, 1)), np.cumsum(incs, axis=1)], axis=1)

    mass = nu.total_mass
    if mass > 0.0:
        counts = rng(1).poisson(T * mass, size=n_paths).astype(np.int64)
    else:
        counts = np.zeros(n_paths, dtype=np.int64)
    total = int(counts.sum())
    offsets = np.concatenate([[0], np.cumsum(counts)])
    if total:
        raw = T * (1.0 - rng(2).random(total))
        path_idx = np.repeat(np.arange(n_paths), counts)
        order = np.lexsort((raw, path_idx))
        times = raw[order]
        sizes = nu.sample(rng(3), total)
    else:
        times = np.empty(0)
        sizes = np.empty(0)

    triplet_f = replace(triplet, nu=nu)
    return PathBatch(triplet_f, grid, brownian, times, sizes, offsets,
                     base_seed, first_index)


def iter_batches(triplet: LevyTriplet, grid_size: int, n_paths: int,
                 base_seed: int, chunk_size: int = DEFAULT_CHUNK,
                 truncation_eps: Optional[float] = None) -> Iterator[PathBatch]:
    """Yield chunks covering ``n_paths`` paths with deterministic streams."""
    start = 0
    chunk = 0
    while start < n_paths:
        size = min(chunk_size, n_paths - start)
        yield simulate_batch(triplet, grid_size, size, base_seed, chunk,
                             truncation_eps, first_index=start)
        start += size
        chunk += 1
