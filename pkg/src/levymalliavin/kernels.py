"""Deterministic integrand types: kernels h(t, x), derivative weights
k(t, x), and bounded time functions g(t).

All callables are numpy-vectorized: they accept arrays and broadcast
elementwise. Time derivatives are analytic and user-supplied; a
finite-difference validator guards against inconsistent pairs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .paths import LevyTriplet
from .quadrature import gl_integrate


@dataclass(frozen=True)
class Kernel:
    """A kernel h(t, x), C^1 in time for x != 0, with analytic dt_h.

    ``dt_h`` may be None for integration-only uses; derivative operators
    require it.
    """

    h: Callable
    dt_h: Optional[Callable] = None
    name: str = ""

    def require_dt(self) -> Callable:
        if self.dt_h is None:
            raise ValueError(
                f"kernel {self.name or self.h!r} has no analytic time derivative"
            )
        return self.dt_h


@dataclass(frozen=True)
class WeightK:
    """A bounded derivative weight k(t, x) with analytic time derivative."""

    k: Callable
    dt_k: Callable
    sup_bound: float
    name: str = ""

    def __post_init__(self):
        if not self.sup_bound > 0.0:
            raise ValueError("sup_bound must be positive")


@dataclass(frozen=True)
class TimeFunction:
    """A bounded measurable g on [0, T], optionally with an antiderivative.

    ``antiderivative`` is G with G(0) = 0 and G' = g; when present the
    windowed integrals used by the duality verifier are exact.
    """

    g: Callable
    antiderivative: Optional[Callable] = None
    name: str = ""

    def integral(self, a: float, b: float, order: int = 64) -> float:
        if self.antiderivative is not None:
            return float(self.antiderivative(b) - self.antiderivative(a))
        return gl_integrate(self.g, a, b, order)

    def cumulative(self, s, T: float):
        """G(s) = int_0^s g, vectorized over s."""
        s = np.asarray(s, dtype=float)
        if self.antiderivative is not None:
            return np.asarray(self.antiderivative(s), dtype=float) \
                - float(self.antiderivative(0.0))
        out = np.array([gl_integrate(self.g, 0.0, float(v)) for v in np.atleast_1d(s)])
        return out.reshape(s.shape)


def check_time_derivative(fn, dfn, t_points, x_points, delta: float = 1e-5,
                          rate_bound: float = 50.0) -> float:
    """Validate an analytic time derivative by central differences.

    Returns the worst deviation |(f(t+d)-f(t-d))/2d - df(t)| over the
    sample; raises if it exceeds ``rate_bound * delta`` plus roundoff
    allowance (the deviation of a C^2 function scales like delta^2, so a
    linear-in-delta envelope is a generous consistency check).
    """
    t = np.asarray(t_points, dtype=float)
    x = np.asarray(x_points, dtype=float)
    numeric = (np.asarray(fn(t + delta, x), dtype=float)
               - np.asarray(fn(t - delta, x), dtype=float)) / (2.0 * delta)
    analytic = np.asarray(dfn(t, x), dtype=float)
    worst = float(np.max(np.abs(numeric - analytic))) if t.size else 0.0
    scale = 1.0 + float(np.max(np.abs(analytic))) if t.size else 1.0
    if worst > rate_bound * delta * scale + 1e-9:
        raise ValueError(
            f"analytic time derivative disagrees with finite differences "
            f"(max deviation {worst:.3e} at delta={delta})"
        )
    return worst


def _sample_points(triplet: LevyTriplet, n_t: int = 9):
    T = triplet.T
    t = np.linspace(T / (n_t + 1), T * n_t / (n_t + 1), n_t)
    xs, _ = triplet.nu.nodes_weights()
    if xs.size == 0:
        xs = np.array([1.0])
    xs = xs[np.linspace(0, xs.size - 1, min(xs.size, 7)).astype(int)]
    tt, xx = np.meshgrid(t, xs, indexing="ij")
    return tt.ravel(), xx.ravel()


def validate_kernel(kernel: Kernel, triplet: LevyTriplet,
                    delta: float = 1e-5) -> float:
    """Registration check: dt_h consistency and finite mu-norm.

    The norm is int_0^T h(t,0)^2 dt + int_0^T int h(t,x)^2 x^2 nu(dx) dt
    (the covariance measure of the driving random measure, with the
    Gaussian weight applied separately by the caller when needed).
    """
    T = triplet.T
    if kernel.dt_h is not None:
        t, x = _sample_points(triplet)
        check_time_derivative(kernel.h, kernel.dt_h, t, x, delta)
    norm = gl_integrate(lambda t: np.asarray(kernel.h(t, 0.0)) ** 2, 0.0, T)
    norm += gl_integrate(
        lambda t: np.array([
            triplet.nu.integrate(lambda x: kernel.h(ti, x) ** 2 * x * x)
            for ti in np.atleast_1d(t)
        ]),
        0.0, T, order=32,
    )
    if not np.isfinite(norm):
        raise ValueError("kernel has infinite norm against the covariance measure")
    return float(norm)


def validate_weight(weight: WeightK, triplet: LevyTriplet,
                    delta: float = 1e-5) -> None:
    """Registration check for a derivative weight: bound and dt_k."""
    t, x = _sample_points(triplet)
    sup = float(np.max(np.abs(weight.k(t, x)))) if t.size else 0.0
    if sup > weight.sup_bound * (1.0 + 1e-12):
        raise ValueError(
            f"weight exceeds its declared bound: sampled {sup} > {weight.sup_bound}"
        )
    check_time_derivative(weight.k, weight.dt_k, t, x, delta)
    # integrability against dt x nu (bounded k on a finite-mass measure is
    # automatic; this guards density measures with heavy declared supports)
    mass = triplet.nu.total_mass
    if not np.isfinite(mass):
        raise ValueError("validate weights against a truncated measure")
