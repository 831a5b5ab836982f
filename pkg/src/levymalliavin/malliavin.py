"""The local jump-time derivative operator and its pathwise calculus.

For a size set Lambda and a bounded weight k(t, x), the derivative of the
order-1 integral M(h) is the process

    D_t M(h) = 1_Lambda(0) sigma h(t, 0)
             + sum over jumps (s, y), y in Lambda, of
                   k(s, y) dt_h(s, y) y * (s/T - 1_{t <= s}),

i.e. a continuous Brownian-direction part plus a step function of t whose
breakpoints are the jump times. :class:`DerivativeProcess` stores the two
parts separately; the step part is kept symbolically as (time,
coefficient) pairs so L^2 inner products use the exact closed forms

    int_0^T (s/T - 1_{t<=s})(r/T - 1_{t<=r}) dt = s (1 - r/T),  s <= r,

and the positivity criterion is free of grid error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .chaos import (DEFAULT_ENUM_BUDGET, SimplexIntegrand,
                    combination_indices, theta_jumps)
from .kernels import Kernel, WeightK
from .measures import SizeSet
from .paths import LevyPath
from .quadrature import gauss_legendre, trapezoid_cumulative
from .random_measure import integrate_M, compensator_M


def step_basis(s, T: float, t):
    """The breakpoint basis psi_s(t) = s/T - 1_{t <= s}, vectorized."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return s / T - (t <= s)


@dataclass(frozen=True)
class DerivativeProcess:
    """t -> D_t F as a continuous part plus an exact step part."""

    T: float
    step_times: np.ndarray
    step_coeffs: np.ndarray
    brownian_fn: Optional[Callable] = None

    def __post_init__(self):
        st = np.asarray(self.step_times, dtype=float)
        sc = np.asarray(self.step_coeffs, dtype=float)
        object.__setattr__(self, "step_times", st)
        object.__setattr__(self, "step_coeffs", sc)
        if st.shape != sc.shape:
            raise ValueError("step times/coefficients length mismatch")
        if st.size and (np.any(st <= 0.0) or np.any(st > self.T)):
            raise ValueError("step breakpoints must lie in (0, T]")
        if st.size > 1 and np.any(np.diff(st) < 0.0):
            raise ValueError("step breakpoints must be sorted")

    @classmethod
    def zero(cls, T: float) -> "DerivativeProcess":
        return cls(T, np.empty(0), np.empty(0))

    @classmethod
    def from_steps(cls, T: float, times, coeffs,
                   brownian_fn: Optional[Callable] = None) -> "DerivativeProcess":
        """Sort and merge equal breakpoints (coefficients add)."""
        times = np.asarray(times, dtype=float)
        coeffs = np.asarray(coeffs, dtype=float)
        if times.size:
            uniq, inverse = np.unique(times, return_inverse=True)
            merged = np.zeros(uniq.size)
            np.add.at(merged, inverse, coeffs)
            times, coeffs = uniq, merged
        return cls(T, times, coeffs, brownian_fn)

    @property
    def is_zero(self) -> bool:
        return self.brownian_fn is None and not np.any(self.step_coeffs)

    def step_at(self, t):
        t = np.asarray(t, dtype=float)
        if self.step_times.size == 0:
            return np.zeros(t.shape)
        basis = step_basis(self.step_times[None, ...], self.T, t[..., None])
        return (basis @ self.step_coeffs).reshape(t.shape)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.step_at(t)
        if self.brownian_fn is not None:
            out = out + np.asarray(self.brownian_fn(t), dtype=float)
        return out

    def scaled(self, a: float) -> "DerivativeProcess":
        fn = None
        if self.brownian_fn is not None:
            fn = lambda t, b=self.brownian_fn, a=a: a * np.asarray(b(t))
        return DerivativeProcess(self.T, self.step_times, a * self.step_coeffs, fn)

    @staticmethod
    def combine(parts: Sequence["DerivativeProcess"],
                weights: Optional[Sequence[float]] = None) -> "DerivativeProcess":
        """Weighted sum of derivative processes (same horizon)."""
        if not parts:
            raise ValueError("nothing to combine")
        T = parts[0].T
        if weights is None:
            weights = [1.0] * len(parts)
        times = np.concatenate([p.step_times for p in parts])
        coeffs = np.concatenate([w * p.step_coeffs
                                 for p, w in zip(parts, weights)])
        fns = [(p.brownian_fn, w) for p, w in zip(parts, weights)
               if p.brownian_fn is not None]
        fn = None
        if fns:
            def fn(t, fns=fns):
                acc = 0.0
                for b, w in fns:
                    acc = acc + w * np.asarray(b(t), dtype=float)
                return acc
        return DerivativeProcess.from_steps(T, times, coeffs, fn)


# ---------------------------------------------------------------------------
# L^2 geometry of the step basis (closed forms)

def step_l2_cross(s: float, r: float, T: float) -> float:
    """int_0^T psi_s psi_r dt = min(s,r) * (1 - max(s,r)/T)."""
    lo, hi = (s, r) if s <= r else (r, s)
    return lo * (1.0 - hi / T)


def _step_norm_sq(times: np.ndarray, coeffs: np.ndarray, T: float) -> float:
    # sum_i c_i^2 s_i (1 - s_i/T) + 2 sum_{i<j} c_i c_j s_i (1 - s_j/T),
    # evaluated with prefix sums (times are sorted)
    diag = float(np.sum(coeffs ** 2 * times * (1.0 - times / T)))
    if times.size < 2:
        return diag
    prefix = np.concatenate([[0.0], np.cumsum(coeffs * times)])[:-1]
    cross = 2.0 * float(np.sum(coeffs * (1.0 - times / T) * prefix))
    return diag + cross


def l2_norm_sq(D: DerivativeProcess, path: Optional[LevyPath] = None,
               grid: Optional[np.ndarray] = None) -> float:
    """int_0^T D_t^2 dt: exact step part, grid quadrature for the rest."""
    T = D.T
    total = _step_norm_sq(D.step_times, D.step_coeffs, T)
    if D.brownian_fn is None:
        return total
    if grid is None:
        if path is None:
            raise ValueError("a grid (or path) is needed for the Brownian part")
        grid = path.grid
    b = np.asarray(D.brownian_fn(grid), dtype=float)
    cumulative = trapezoid_cumulative(b, grid)
    cumulative_sq = trapezoid_cumulative(b * b, grid)
    total += float(cumulative_sq[-1])
    if D.step_times.size:
        # cross terms: int B psi_s dt = (s/T) int_0^T B - int_0^s B
        ib_at_s = np.interp(D.step_times, grid, cumulative)
        cross = (D.step_times / T) * cumulative[-1] - ib_at_s
        total += 2.0 * float(np.dot(D.step_coeffs, cross))
    return total


def orthogonality_residual(D: DerivativeProcess) -> float:
    """|int_0^T D_t dt| for a step-only process (0 not in Lambda).

    Each basis function integrates to exactly 0 over [0, T]; the residual
    is computed from the piecewise-exact integral and lands at roundoff.
    A process with a Brownian part is not orthogonal to constants in
    general, so it is rejected here.
    """
    if D.brownian_fn is not None:
        raise ValueError("orthogonality applies to processes with 0 not in Lambda "
                         "(no Brownian part)")
    s, c, T = D.step_times, D.step_coeffs, D.T
    # int_0^T psi_s dt = s (s/T - 1) + (T - s) s/T, computed as written
    pieces = s * (s / T - 1.0) + (T - s) * (s / T)
    return abs(float(np.dot(c, pieces)))


def abs_continuity_indicator(D: DerivativeProcess,
                             path: Optional[LevyPath] = None,
                             tol: float = 1e-12) -> bool:
    """Positivity test int_0^T D_t^2 dt > tol * scale^2.

    ``scale`` = sum |c_i| keeps the threshold relative to the step
    magnitudes, so a single nonzero step of any size tests true (its
    norm is c^2 s (1 - s/T), strictly positive inside the horizon); a
    zero process tests false. The underlying criterion is strict
    positivity, and the tolerance only absorbs roundoff-level
    cancellation.
    """
    scale = float(np.sum(np.abs(D.step_coeffs)))
    return l2_norm_sq(D, path) > tol * scale * scale


# ---------------------------------------------------------------------------
# derivative of order-1 integrals and smooth functionals

def _lambda_jumps(path: LevyPath, lam: SizeSet):
    keep = lam.nonzero_part.contains(path.jump_sizes)
    return path.jump_times[keep], path.jump_sizes[keep]


def derivative_M(path: LevyPath, h: Kernel, lam: SizeSet,
                 k: WeightK) -> DerivativeProcess:
    """D_t M(h): Brownian part 1_Lambda(0) sigma h(t,0), one step entry
    per Lambda-jump with coefficient k(s,y) dt_h(s,y) y."""
    dt_h = h.require_dt()
    jt, jx = _lambda_jumps(path, lam)
    coeffs = (np.asarray(k.k(jt, jx), dtype=float)
              * np.asarray(dt_h(jt, jx), dtype=float) * jx) if jt.size \
        else np.empty(0)
    fn = None
    if lam.includes_zero and path.triplet.sigma != 0.0:
        sigma = path.triplet.sigma
        fn = lambda t: sigma * np.asarray(h.h(np.asarray(t, dtype=float), 0.0),
                                          dtype=float)
    return DerivativeProcess.from_steps(path.T, jt, coeffs, fn)


def derivative_M_alt(path: LevyPath, h: Kernel, lam: SizeSet, k: WeightK,
                     order: int = 64) -> DerivativeProcess:
    """D_t M(h) through the compensated + boundary-term representation.

    Same step part as :func:`derivative_M`; the remaining terms (the
    compensator of the jump integral, the boundary bracket, and the
    dt_k correction) are continuous in t and cancel analytically, so the
    returned process agrees with the direct form up to the quadrature
    error of the nu-integrals.
    """
    dt_h = h.require_dt()
    base = derivative_M(path, h, lam, k)
    T = path.T
    x_nodes, x_weights = path.triplet.nu.nodes_weights(lam.nonzero_part)
    sigma = path.triplet.sigma

    if x_nodes.size == 0:
        return base

    s_full, w_full = gauss_legendre(0.0, T, order)

    def time_tail(fn_sx, t: float) -> np.ndarray:
        """int_t^T fn(s, x) ds for every x node."""
        if t >= T:
            return np.zeros(x_nodes.size)
        s, w = gauss_legendre(t, T, order)
        return w @ np.asarray(fn_sx(s[:, None], x_nodes[None, :]), dtype=float)

    k_dth = lambda s, x: (np.asarray(k.k(s, x), dtype=float)
                          * np.asarray(dt_h(s, x), dtype=float))
    h_dtk = lambda s, x: (np.asarray(h.h(s, x), dtype=float)
                          * np.asarray(k.dt_k(s, x), dtype=float))

    # t-independent pieces, one value per x node
    a_slope = w_full @ (k_dth(s_full[:, None], x_nodes[None, :])
                        * (s_full[:, None] / T))
    b_slope = w_full @ (h_dtk(s_full[:, None], x_nodes[None, :])
                        * (s_full[:, None] / T))
    kh_mean = (w_full @ (np.asarray(k.k(s_full[:, None], x_nodes[None, :]),
                                    dtype=float)
                         * np.asarray(h.h(s_full[:, None], x_nodes[None, :]),
                                      dtype=float))) / T

    xw = x_weights * x_nodes  # nu(dx)-weighted factor y

    def continuous(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.shape)
        for i, ti in enumerate(t):
            comp = a_slope - time_tail(k_dth, float(ti))
            bracket = (np.asarray(k.k(ti, x_nodes), dtype=float)
                       * np.asarray(h.h(ti, x_nodes), dtype=float)) - kh_mean
            correction = b_slope - time_tail(h_dtk, float(ti))
            out[i] = float(np.dot(xw, -comp + bracket - correction))
        if lam.includes_zero and sigma != 0.0:
            out = out + sigma * np.asarray(h.h(t, 0.0), dtype=float)
        return out

    return DerivativeProcess(T, base.step_times, base.step_coeffs, continuous)


@dataclass(frozen=True)
class SmoothFunctional:
    """F = f(M(h_1), ..., M(h_n)) with analytic gradient.

    ``f`` and ``grad_f`` are vectorized over a trailing axis of length n.
    """

    f: Callable
    grad_f: Callable
    kernels: tuple[Kernel, ...]
    name: str = ""

    @property
    def arity(self) -> int:
        return len(self.kernels)

    def m_values(self, path: LevyPath,
                 compensators: Optional[Sequence[float]] = None) -> np.ndarray:
        if compensators is None:
            compensators = [None] * self.arity
        return np.array([integrate_M(path, kern, comp)
                         for kern, comp in zip(self.kernels, compensators)])

    def value(self, path: LevyPath) -> float:
        return float(self.f(self.m_values(path)))


def validate_smooth_functional(F: SmoothFunctional, delta: float = 1e-6,
                               points: Optional[np.ndarray] = None) -> None:
    """Finite-difference check of grad_f on a handful of points."""
    n = F.arity
    if points is None:
        points = np.linspace(-1.5, 1.5, 5)[:, None] * np.ones(n)[None, :]
    grads = np.asarray(F.grad_f(points), dtype=float)
    for i in range(n):
        shift = np.zeros(n)
        shift[i] = delta
        numeric = (np.asarray(F.f(points + shift), dtype=float)
                   - np.asarray(F.f(points - shift), dtype=float)) / (2 * delta)
        if np.max(np.abs(numeric - grads[..., i])) > 1e3 * delta:
            raise ValueError(f"grad_f slot {i} disagrees with finite differences")


def derivative_smooth(path: LevyPath, F: SmoothFunctional, lam: SizeSet,
                      k: WeightK,
                      compensators: Optional[Sequence[float]] = None
                      ) -> DerivativeProcess:
    """Chain rule: D_t F = sum_i d_i f(M(h_1..h_n)) D_t M(h_i)."""
    grads = np.asarray(F.grad_f(F.m_values(path, compensators)), dtype=float)
    parts = [derivative_M(path, kern, lam, k) for kern in F.kernels]
    return DerivativeProcess.combine(parts, grads)


# ---------------------------------------------------------------------------
# derivatives of multiple integrals and jump-time functionals

def _require_theta_in_lambda(sizes: np.ndarray, lam: SizeSet) -> None:
    if sizes.size and not np.all(lam.nonzero_part.contains(sizes)):
        raise ValueError("the jump set Theta must be contained in Lambda")


def derivative_Jn(path: LevyPath, theta: SizeSet, lam: SizeSet, k: WeightK,
                  phi: SimplexIntegrand,
                  budget: int = DEFAULT_ENUM_BUDGET) -> DerivativeProcess:
    """D_t J_n(phi) = sum_j J_n(k(s_j,x_j) dt_j phi * psi_{s_j}(t)).

    Every ordered tuple contributes, slot by slot, a coefficient
    k * dt_j phi at the breakpoint occupied by that slot.
    """
    jt, jx = theta_jumps(path, theta)
    _require_theta_in_lambda(jx, lam)
    n = phi.arity
    accum = np.zeros(jt.size)
    if jt.size >= n:
        combos = combination_indices(jt.size, n, budget)
        t_mat, x_mat = jt[combos], jx[combos]
        for j in range(n):
            vals = (np.asarray(k.k(t_mat[:, j], x_mat[:, j]), dtype=float)
                    * np.asarray(phi.partial(j)(t_mat, x_mat), dtype=float))
            np.add.at(accum, combos[:, j], vals)
    return DerivativeProcess.from_steps(path.T, jt, accum)


def derivative_jump_functional(path: LevyPath, theta: SizeSet, lam: SizeSet,
                               k: WeightK,
                               phi: SimplexIntegrand) -> DerivativeProcess:
    """D_t phi(T_1, dX_1; ...; T_n, dX_n) on {N >= n} (zero otherwise).

    One step entry per slot: c_j = k(T_j, dX_j) dt_j phi evaluated at the
    first n jumps. In particular phi = t_j gives the jump-time derivative
    D_t T_j = k(T_j, dX_j) (T_j/T - 1_{t <= T_j}).
    """
    jt, jx = theta_jumps(path, theta)
    _require_theta_in_lambda(jx, lam)
    n = phi.arity
    if jt.size < n:
        return DerivativeProcess.zero(path.T)
    t_row, x_row = jt[None, :n], jx[None, :n]
    coeffs = np.array([
        float(k.k(t_row[0, j], x_row[0, j]))
        * float(np.asarray(phi.partial(j)(t_row, x_row)).reshape(()))
        for j in range(n)
    ])
    return DerivativeProcess.from_steps(path.T, jt[:n], coeffs)


def directional_difference(functional, times: np.ndarray, sizes: np.ndarray,
                           direction: np.ndarray, eps: float,
                           T: float, max_shrink: int = 12) -> tuple[float, float]:
    """Central difference of a jump-time functional along ``direction``.

    Shrinks eps when the perturbation would reorder the jump times or
    push them outside (0, T]; raises if it underflows.
    """
    base_eps = eps
    for _ in range(max_shrink):
        plus_t = times + eps * direction
        minus_t = times - eps * direction
        ok = True
        for cand in (plus_t, minus_t):
            if cand.size and (np.any(np.diff(cand) <= 0.0)
                              or cand[0] <= 0.0 or cand[-1] > T):
                ok = False
                break
        if ok:
            value = (functional(plus_t, sizes) - functional(minus_t, sizes)) \
                / (2.0 * eps)
            return value, eps
        eps /= 10.0
    raise ArithmeticError(
        f"could not find a perturbation size (started at {base_eps}) that "
        "preserves the jump-time ordering"
    )


def finite_difference_check(path: LevyPath, theta: SizeSet, lam: SizeSet,
                            k: WeightK, phi: SimplexIntegrand, t: float,
                            eps: float = 1e-5) -> dict:
    """Analytic vs numeric directional derivative of phi(T_1, ..., T_n).

    The perturbation direction is v_j = k(T_j, dX_j) psi_{T_j}(t), the
    same combination the derivative operator produces, so for smooth phi
    |analytic - numeric| = O(eps^2).
    """
    jt, jx = theta_jumps(path, theta)
    _require_theta_in_lambda(jx, lam)
    n = phi.arity
    if jt.size < n:
        return {"analytic": 0.0, "numeric": 0.0, "epsilon_used": eps}
    analytic = float(derivative_jump_functional(path, theta, lam, k, phi)(
        np.array([t]))[0])
    head_t, head_x = jt[:n].copy(), jx[:n]
    direction = (np.asarray(k.k(head_t, head_x), dtype=float)
                 * step_basis(head_t, path.T, t))

    def functional(times, sizes):
        return float(phi.on_simplex(times[None, :], sizes[None, :])[0])

    numeric, used = directional_difference(functional, head_t, head_x,
                                           direction, eps, path.T)
    return {"analytic": analytic, "numeric": numeric, "epsilon_used": used}
