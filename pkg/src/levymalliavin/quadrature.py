"""Deterministic quadrature helpers shared across the package.

Two regimes are used throughout:

* fixed Gauss-Legendre rules for smooth time integrals (vectorizable over
  extra axes, error decays spectrally for the smooth kernels used here);
* adaptive quadrature (scipy's QUADPACK) for integrals against density
  Levy measures, where supports may be unbounded or have integrable
  endpoint singularities.
"""
from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
from scipy.integrate import IntegrationWarning, quad

DEFAULT_GL_ORDER = 64
DEFAULT_QUAD_TOL = 1e-9


@lru_cache(maxsize=64)
def _gl_reference(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def gauss_legendre(a: float, b: float, order: int = DEFAULT_GL_ORDER):
    """Nodes and weights of the Gauss-Legendre rule on [a, b]."""
    nodes, weights = _gl_reference(order)
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def gl_integrate(fn, a: float, b: float, order: int = DEFAULT_GL_ORDER) -> float:
    """Integrate a smooth vectorized callable on [a, b]."""
    if b <= a:
        return 0.0
    x, w = gauss_legendre(a, b, order)
    return float(np.dot(w, fn(x)))


def adaptive_integrate(fn, a: float, b: float, tol: float = DEFAULT_QUAD_TOL) -> float:
    """Adaptive integral of a scalar callable, raising on divergence.

    Wraps scipy.integrate.quad; an estimated error far above ``tol`` (or a
    non-finite result) means the integrand is not integrable at the given
    tolerance and is reported instead of silently returned.
    """
    value, err = quad(fn, a, b, epsabs=tol, epsrel=tol, limit=200)
    if not np.isfinite(value):
        raise ArithmeticError(f"divergent quadrature on [{a}, {b}]")
    if err > max(1e3 * tol, 1e-6 * abs(value)):
        raise ArithmeticError(
            f"quadrature on [{a}, {b}] did not converge: value={value!r}, err={err!r}"
        )
    return float(value)


def trapezoid_cumulative(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid integral of grid samples, starting at 0."""
    dt = np.diff(grid)
    segments = 0.5 * dt * (values[..., 1:] + values[..., :-1])
    out = np.zeros(values.shape)
    np.cumsum(segments, axis=-1, out=out[..., 1:])
    return out
