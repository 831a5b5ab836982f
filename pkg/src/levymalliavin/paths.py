"""Levy triplets and pathwise realizations on a finite horizon [0, T].

A path is a Brownian trajectory on a fixed uniform grid plus a finite,
time-sorted jump list. Finite-activity measures are simulated exactly
(Poisson count, sorted uniform times, i.i.d. normalized sizes); an
infinite-activity measure must be truncated explicitly first.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .measures import Interval, LevyMeasure, SizeSet, TruncatableMeasure

# |x| <= 1 split around the origin (closed outer endpoints), used by the
# compensated-small-jump term of evaluate_X
SMALL_JUMPS = SizeSet((Interval(-1.0, 0.0, True, False),
                       Interval(0.0, 1.0, False, True)))

# fixed stream ids, so Brownian and jump randomness never interleave
STREAM_BROWNIAN = 0
STREAM_JUMP_COUNT = 1
STREAM_JUMP_TIMES = 2
STREAM_JUMP_SIZES = 3


def stream_generator(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream id).

    Philox is counter based, so distinct (seed, stream) keys give
    statistically independent, reproducible streams; simulation of
    distinct seeds is embarrassingly parallel.
    """
    key = np.random.SeedSequence((seed, stream)).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class LevyTriplet:
    """Characteristic triplet (gamma, sigma, nu) with horizon T."""

    gamma: float
    sigma: float
    nu: LevyMeasure | TruncatableMeasure
    T: float

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not self.T > 0.0:
            raise ValueError(f"horizon T must be positive, got {self.T}")


@dataclass(frozen=True)
class JumpRecord:
    time: float
    size: float

    def __post_init__(self):
        if not 0.0 < self.time:
            raise ValueError(f"jump time must lie in (0, T], got {self.time}")
        if self.size == 0.0:
            raise ValueError("jump of size 0")


@dataclass(frozen=True)
class LevyPath:
    """One realized trajectory: Brownian grid values plus a sorted jump list.

    Immutable after construction; safe to share across threads.
    """

    triplet: LevyTriplet
    grid: np.ndarray
    brownian: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    seed: int

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        w = np.asarray(self.brownian, dtype=float)
        jt = np.asarray(self.jump_times, dtype=float)
        jx = np.asarray(self.jump_sizes, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "brownian", w)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "jump_sizes", jx)
        T = self.triplet.T
        if grid[0] != 0.0 or grid[-1] != T or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must increase strictly from 0 to T")
        if w.shape != grid.shape or w[0] != 0.0:
            raise ValueError("brownian values must sit on the grid with W(0)=0")
        if jt.shape != jx.shape:
            raise ValueError("jump times/sizes length mismatch")
        if jt.size:
            if np.any(jt <= 0.0) or np.any(jt > T):
                raise ValueError("jump times must lie in (0, T]")
            if np.any(np.diff(jt) <= 0.0):
                raise ValueError("jump times must be strictly increasing")
            if np.any(jx == 0.0):
                raise ValueError("jumps of size 0 are not allowed")

    @property
    def T(self) -> float:
        return self.triplet.T

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.size)

    @property
    def jumps(self) -> tuple[JumpRecord, ...]:
        return tuple(JumpRecord(float(t), float(x))
                     for t, x in zip(self.jump_times, self.jump_sizes))

    def brownian_at(self, t):
        """W(t) by linear interpolation between grid nodes."""
        return np.interp(t, self.grid, self.brownian)


def _finite_measure(triplet: LevyTriplet, truncation_eps: Optional[float]):
    nu = triplet.nu
    if isinstance(nu, TruncatableMeasure):
        if truncation_eps is None:
            raise ValueError(
                "infinite-activity measure: pass truncation_eps to simulate "
                "the jumps with size |x| > eps"
            )
        return nu.truncated(truncation_eps)
    return nu


def simulate_path(triplet: LevyTriplet, grid_size: int, seed: int,
                  truncation_eps: Optional[float] = None) -> LevyPath:
    """Simulate one path: Brownian grid values plus the compound-Poisson jumps.

    The jump count is Poisson(T * nu(support)), the jump times are sorted
    uniforms on (0, T], and the sizes are i.i.d. from the normalized
    measure, independent of the Brownian part. Same seed, same path.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    nu = _finite_measure(triplet, truncation_eps)
    T = triplet.T
    grid = np.linspace(0.0, T, grid_size + 1)

    rng_w = stream_generator(seed, STREAM_BROWNIAN)
    increments = rng_w.standard_normal(grid_size) * np.sqrt(np.diff(grid))
    brownian = np.concatenate([[0.0], np.cumsum(increments)])

    mass = nu.total_mass
    if mass > 0.0:
        n = int(stream_generator(seed, STREAM_JUMP_COUNT).poisson(T * mass))
    else:
        n = 0
    if n > 0:
        u = stream_generator(seed, STREAM_JUMP_TIMES).random(n)
        times = np.sort(T * (1.0 - u))  # maps [0,1) onto (0,T]
        sizes = nu.sample(stream_generator(seed, STREAM_JUMP_SIZES), n)
    else:
        times = np.empty(0)
        sizes = np.empty(0)

    triplet_f = replace(triplet, nu=nu)
    return LevyPath(triplet_f, grid, brownian, times, sizes, seed)


def restrict_jumps(path: LevyPath, theta: SizeSet) -> LevyPath:
    """Keep only the jumps with size in theta (Brownian part unchanged).

    The measure of the returned path is restricted as well, so that
    compensators stay consistent with the retained jump stream.
    """
    if theta.includes_zero:
        raise ValueError("a jump-size set must exclude 0")
    keep = theta.contains(path.jump_sizes)
    triplet_r = replace(path.triplet, nu=path.triplet.nu.restrict(theta))
    return LevyPath(triplet_r, path.grid, path.brownian,
                    path.jump_times[keep], path.jump_sizes[keep], path.seed)


def count_jumps(path: LevyPath, theta: Optional[SizeSet] = None) -> int:
    """Number of jumps on [0, T] with size in theta (all jumps if None)."""
    if theta is None:
        return path.n_jumps
    return int(theta.contains(path.jump_sizes).sum())


def evaluate_X(path: LevyPath, t: float) -> float:
    """Value X_t of the process at time t.

    Follows the drift + Brownian + large-jump + compensated-small-jump
    decomposition: jumps with |x| > 1 enter as-is, jumps with |x| <= 1
    enter compensated by t * int_{|x|<=1} x nu(dx) (quadrature over the
    path's own, possibly truncated, measure).
    """
    trip = path.triplet
    if not 0.0 <= t <= trip.T:
        raise ValueError(f"t={t} outside [0, {trip.T}]")
    if t == 0.0:
        return 0.0
    value = trip.gamma * t + trip.sigma * float(path.brownian_at(t))
    before = path.jump_times <= t
    sizes = path.jump_sizes[before]
    value += float(sizes[np.abs(sizes) > 1.0].sum())
    value += float(sizes[np.abs(sizes) <= 1.0].sum())
    value -= t * trip.nu.integrate(lambda x: x, SMALL_JUMPS)
    return value


def path_to_record(path: LevyPath) -> dict:
    """JSON-ready record {seed, grid, brownian[], jumps[]}."""
    return {
        "seed": int(path.seed),
        "grid": [float(t) for t in path.grid],
        "brownian": [float(w) for w in path.brownian],
        "jumps": [[float(t), float(x)]
                  for t, x in zip(path.jump_times, path.jump_sizes)],
    }


def path_from_record(record: dict, triplet: LevyTriplet) -> LevyPath:
    jumps = np.asarray(record["jumps"], dtype=float).reshape(-1, 2)
    return LevyPath(
        triplet,
        np.asarray(record["grid"], dtype=float),
        np.asarray(record["brownian"], dtype=float),
        jumps[:, 0],
        jumps[:, 1],
        int(record["seed"]),
    )


def path_to_json(path: LevyPath) -> str:
    return json.dumps(path_to_record(path))


def path_from_json(text: str, triplet: LevyTriplet) -> LevyPath:
    return path_from_record(json.loads(text), triplet)
