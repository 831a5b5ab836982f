"""Pathwise integrals against the driving random measure.

The centered measure M combines the Gaussian part and the compensated
jump part:

    M(h) = sigma * int_0^T h(t,0) dW_t + int h(t,x) x dN~(t,x).

The Wiener integral uses left-point Ito sums on the path grid; the jump
integral is an exact sum over the realized jumps minus a deterministic
compensator computed by quadrature. N-integrals (non-compensated) keep
the integrand as-is -- note M carries an extra factor x, the N-integrals
do not; the two are never converted implicitly.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .batch import PathBatch
from .kernels import Kernel
from .measures import SizeSet
from .paths import LevyPath, LevyTriplet
from .quadrature import gauss_legendre, gl_integrate


def _as_kernel(h) -> Kernel:
    return h if isinstance(h, Kernel) else Kernel(h)


def compensator_M(h, triplet: LevyTriplet, sizes: Optional[SizeSet] = None,
                  order: int = 64) -> float:
    """int_0^T int h(t,x) x nu(dx) dt by deterministic quadrature."""
    kern = _as_kernel(h)
    T = triplet.T
    t_nodes, t_w = gauss_legendre(0.0, T, order)
    x_nodes, x_w = triplet.nu.nodes_weights(sizes)
    if x_nodes.size == 0:
        return 0.0
    vals = kern.h(t_nodes[:, None], x_nodes[None, :]) * x_nodes[None, :]
    out = float(t_w @ vals @ x_w)
    if not np.isfinite(out):
        raise ArithmeticError("divergent compensator quadrature")
    return out


def compensator_N(phi, triplet: LevyTriplet, sizes: Optional[SizeSet] = None,
                  order: int = 64) -> float:
    """int_0^T int phi(t,x) nu(dx) dt (no factor x)."""
    T = triplet.T
    t_nodes, t_w = gauss_legendre(0.0, T, order)
    x_nodes, x_w = triplet.nu.nodes_weights(sizes)
    if x_nodes.size == 0:
        return 0.0
    vals = np.asarray(phi(t_nodes[:, None], x_nodes[None, :]))
    vals = np.broadcast_to(vals, (t_nodes.size, x_nodes.size))
    out = float(t_w @ vals @ x_w)
    if not np.isfinite(out):
        raise ArithmeticError("divergent compensator quadrature")
    return out


def wiener_integral(path: LevyPath, fn) -> float:
    """Left-point Ito sum of a deterministic integrand against dW."""
    vals = np.asarray(fn(path.grid[:-1]), dtype=float)
    vals = np.broadcast_to(vals, path.grid[:-1].shape)
    return float(np.dot(vals, np.diff(path.brownian)))


def integrate_M(path: LevyPath, h, compensator: Optional[float] = None) -> float:
    """Pathwise M(h) (first-order integral against the centered measure)."""
    kern = _as_kernel(h)
    trip = path.triplet
    out = 0.0
    if trip.sigma != 0.0:
        out += trip.sigma * wiener_integral(path, lambda t: kern.h(t, 0.0))
    if path.n_jumps:
        out += float(np.sum(kern.h(path.jump_times, path.jump_sizes)
                            * path.jump_sizes))
    if compensator is None:
        compensator = compensator_M(kern, trip)
    return out - compensator


def integrate_N(path: LevyPath, phi) -> float:
    """Sum of phi over the realized (time, size) jump pairs."""
    if path.n_jumps == 0:
        return 0.0
    return float(np.sum(phi(path.jump_times, path.jump_sizes)))


def integrate_tildeN(path: LevyPath, phi,
                     compensator: Optional[float] = None) -> float:
    """Compensated jump integral: integrate_N minus int phi dt dnu."""
    if compensator is None:
        compensator = compensator_N(phi, path.triplet)
    return integrate_N(path, phi) - compensator


def mu_inner_product(h, g, triplet: LevyTriplet, order: int = 128) -> float:
    """Covariance E[M(h) M(g)] = sigma^2 int h(.,0) g(.,0) dt + int h g x^2 dnu dt."""
    hk, gk = _as_kernel(h), _as_kernel(g)
    T = triplet.T
    out = triplet.sigma ** 2 * gl_integrate(
        lambda t: np.asarray(hk.h(t, 0.0)) * np.asarray(gk.h(t, 0.0)), 0.0, T, order)
    t_nodes, t_w = gauss_legendre(0.0, T, order)
    x_nodes, x_w = triplet.nu.nodes_weights()
    if x_nodes.size:
        vals = (hk.h(t_nodes[:, None], x_nodes[None, :])
                * gk.h(t_nodes[:, None], x_nodes[None, :])
                * x_nodes[None, :] ** 2)
        out += float(t_w @ vals @ x_w)
    return out


def fubini_residual(path: LevyPath, f, order: int = 32) -> float:
    """|int_0^T M(f(u, .)) du  -  M(int_0^T f(u, .) du)| on one path.

    Both sides share the same outer Gauss-Legendre rule in u, so the
    residual reflects only floating-point non-associativity.
    """
    T = path.T
    u_nodes, u_w = gauss_legendre(0.0, T, order)

    lhs = 0.0
    for u, w in zip(u_nodes, u_w):
        lhs += w * integrate_M(path, lambda t, x, u=u: f(u, t, x))

    def integrated(t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        acc = 0.0
        for u, w in zip(u_nodes, u_w):
            acc = acc + w * f(u, t, x)
        return acc

    rhs = integrate_M(path, integrated)
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# batch versions (column-parallel across paths)

def wiener_integral_batch(batch: PathBatch, fn) -> np.ndarray:
    vals = np.asarray(fn(batch.grid[:-1]), dtype=float)
    vals = np.broadcast_to(vals, batch.grid[:-1].shape)
    return np.diff(batch.brownian, axis=1) @ vals


def integrate_M_batch(batch: PathBatch, h,
                      compensator: Optional[float] = None) -> np.ndarray:
    """M(h) for every path in the batch; compensator computed once."""
    kern = _as_kernel(h)
    trip = batch.triplet
    out = np.zeros(batch.n_paths)
    if trip.sigma != 0.0:
        out += trip.sigma * wiener_integral_batch(batch, lambda t: kern.h(t, 0.0))
    if batch.jump_times.size:
        per_jump = np.asarray(kern.h(batch.jump_times, batch.jump_sizes),
                              dtype=float) * batch.jump_sizes
        out += batch.per_path_sum(per_jump)
    if compensator is None:
        compensator = compensator_M(kern, trip)
    return out - compensator


def integrate_N_batch(batch: PathBatch, phi) -> np.ndarray:
    if batch.jump_times.size == 0:
        return np.zeros(batch.n_paths)
    vals = np.asarray(phi(batch.jump_times, batch.jump_sizes), dtype=float)
    vals = np.broadcast_to(vals, batch.jump_times.shape)
    return batch.per_path_sum(vals)
