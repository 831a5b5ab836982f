"""The three equation classes, their pathwise solvers, and the explicit
derivative formulas of their terminal values.

* a diffusion with state-independent jumps (Brownian-direction derivative
  through the variational equation);
* a pure-jump equation dZ = f(Z) dt + h(y) dN (drift flow between jumps,
  additive jump increments);
* a pure-jump equation dZ = f(Z) dt + h(y) g(Z-) dN (multiplicative
  jump increments).

Between jumps the drift ODE is integrated with classical RK4 on substeps
of at most ``step``; the exponent integrals int f'(Z_u) du accumulate on
the same substeps by the trapezoid rule, so exponential factors telescope
exactly across jump intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .kernels import WeightK
from .malliavin import DerivativeProcess
from .paths import LevyPath, LevyTriplet

DEFAULT_ODE_STEP = 1.0 / 2048.0


def _rk4_step(f, z, dt):
    k1 = f(z)
    k2 = f(z + 0.5 * dt * k1)
    k3 = f(z + 0.5 * dt * k2)
    k4 = f(z + dt * k3)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass(frozen=True)
class Flow:
    """Solution map of dz/dt = f(z) with its closed-form partials.

    d/dx Phi_t(s, x) = exp(int_s^t f'(Phi_u) du)
    d/ds Phi_t(s, x) = -f(x) exp(int_s^t f'(Phi_u) du)
    d/dt Phi_t(s, x) = f(Phi_t(s, x))
    """

    f: Callable
    df: Callable
    step: float = DEFAULT_ODE_STEP

    def advance(self, x, s: float, t: float):
        """(Phi_t(s, x), int_s^t f'(Phi_u) du), vectorized over x."""
        z = np.asarray(x, dtype=float)
        integral = np.zeros(z.shape)
        if t <= s:
            return z, integral
        n_sub = max(1, math.ceil((t - s) / self.step))
        dt = (t - s) / n_sub
        for _ in range(n_sub):
            df_before = np.asarray(self.df(z), dtype=float)
            z = _rk4_step(self.f, z, dt)
            integral = integral + 0.5 * dt * (df_before
                                              + np.asarray(self.df(z), dtype=float))
        return z, integral

    def map(self, x, s: float, t: float):
        return self.advance(x, s, t)[0]

    def dx(self, x, s: float, t: float):
        return np.exp(self.advance(x, s, t)[1])

    def ds(self, x, s: float, t: float):
        return -np.asarray(self.f(np.asarray(x, dtype=float))) * self.dx(x, s, t)


# ---------------------------------------------------------------------------
# equation types

@dataclass(frozen=True)
class DiffusionSDE:
    """dZ = b(Z) dt + sigma_fn(Z) dW + l(y) y dN, Z_0 = x0."""

    b: Callable
    db: Callable
    sigma_fn: Callable
    dsigma_fn: Callable
    l: Callable
    x0: float


@dataclass(frozen=True)
class AdditiveJumpSDE:
    """dZ = f(Z) dt + h(y) dN, Z_0 = x0 (jump increments ignore the state)."""

    f: Callable
    df: Callable
    h: Callable
    x0: float


@dataclass(frozen=True)
class MultiplicativeJumpSDE:
    """dZ = f(Z) dt + h(y) g(Z-) dN, Z_0 = x0, with declared sup bounds."""

    f: Callable
    df: Callable
    d2f: Callable
    g: Callable
    dg: Callable
    h: Callable
    x0: float
    d2f_sup: float = np.inf
    g_sup: float = np.inf
    h_sup: float = np.inf


# ---------------------------------------------------------------------------
# single-path solver for the pure-jump equations

@dataclass
class JumpFlowTrajectory:
    """Z along one path: substep nodes plus exact per-jump bookkeeping."""

    times: np.ndarray          # substep boundaries including 0, jump times, T
    values: np.ndarray         # Z at those times (post-jump value at a jump)
    integral_df: np.ndarray    # cumulative int_0^t f'(Z_u) du at those times
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    jump_pre: np.ndarray       # Z_{T_j -}
    jump_post: np.ndarray      # Z_{T_j}
    jump_integral: np.ndarray  # int_0^{T_j} f'(Z_u) du

    @property
    def z_T(self) -> float:
        return float(self.values[-1])

    @property
    def I_T(self) -> float:
        return float(self.integral_df[-1])

    def value(self, t):
        """Approximate Z_t by interpolation on the substep nodes."""
        return np.interp(t, self.times, self.values)


def solve_jump_flow(path: LevyPath, x0: float, f, df, jump_increment,
                    step: float = DEFAULT_ODE_STEP) -> JumpFlowTrajectory:
    """Integrate dz = f(z) dt between jumps, adding jump_increment(z-, y)."""
    T = path.T
    times = [0.0]
    values = [float(x0)]
    integral = [0.0]
    jump_pre, jump_post, jump_i = [], [], []
    z, acc, t_cur = float(x0), 0.0, 0.0

    events = list(zip(path.jump_times, path.jump_sizes)) + [(T, None)]
    for te, y in events:
        if te > t_cur:
            n_sub = max(1, math.ceil((te - t_cur) / step))
            dt = (te - t_cur) / n_sub
            for i in range(n_sub):
                df_before = float(df(z))
                z = float(_rk4_step(f, z, dt))
                acc += 0.5 * dt * (df_before + float(df(z)))
                times.append(t_cur + (i + 1) * dt)
                values.append(z)
                integral.append(acc)
            t_cur = te
        if y is not None:
            jump_pre.append(z)
            jump_i.append(acc)
            z = z + float(jump_increment(z, y))
            jump_post.append(z)
            times.append(te)
            values.append(z)
            integral.append(acc)

    return JumpFlowTrajectory(
        np.asarray(times), np.asarray(values), np.asarray(integral),
        path.jump_times.copy(), path.jump_sizes.copy(),
        np.asarray(jump_pre), np.asarray(jump_post), np.asarray(jump_i),
    )


def solve_additive_jump(path: LevyPath, sde: AdditiveJumpSDE,
                        step: float = DEFAULT_ODE_STEP) -> JumpFlowTrajectory:
    return solve_jump_flow(path, sde.x0, sde.f, sde.df,
                           lambda z, y: sde.h(y), step)


def solve_multiplicative(path: LevyPath, sde: MultiplicativeJumpSDE,
                         step: float = DEFAULT_ODE_STEP) -> JumpFlowTrajectory:
    return solve_jump_flow(path, sde.x0, sde.f, sde.df,
                           lambda z, y: sde.h(y) * sde.g(z), step)


# ---------------------------------------------------------------------------
# derivative formulas for the pure-jump equations

def additive_step_coefficients(sde: AdditiveJumpSDE,
                               traj: JumpFlowTrajectory,
                               k: WeightK) -> np.ndarray:
    """c_j = exp(int_{T_j}^T f'(Z)) (f(Z_{T_j-}) - f(Z_{T_j})) k(T_j, y_j)."""
    if traj.jump_times.size == 0:
        return np.empty(0)
    factor = np.exp(traj.I_T - traj.jump_integral)
    drop = np.asarray(sde.f(traj.jump_pre), dtype=float) \
        - np.asarray(sde.f(traj.jump_post), dtype=float)
    kv = np.broadcast_to(
        np.asarray(k.k(traj.jump_times, traj.jump_sizes), dtype=float),
        traj.jump_times.shape)
    return factor * drop * kv


def derivative_additive(path: LevyPath, sde: AdditiveJumpSDE, k: WeightK,
                        traj: Optional[JumpFlowTrajectory] = None,
                        step: float = DEFAULT_ODE_STEP) -> DerivativeProcess:
    """D_t Z_T for the additive-jump equation (step part only)."""
    if traj is None:
        traj = solve_additive_jump(path, sde, step)
    coeffs = additive_step_coefficients(sde, traj, k)
    return DerivativeProcess.from_steps(path.T, traj.jump_times, coeffs)


def multiplicative_tail_products(alpha: np.ndarray) -> np.ndarray:
    """tail[j] = prod_{i > j} alpha[i] (tail[-1] = 1)."""
    tail = np.ones(alpha.shape)
    if alpha.size > 1:
        tail[:-1] = np.cumprod(alpha[::-1])[::-1][1:]
    return tail


def multiplicative_step_coefficients(sde: MultiplicativeJumpSDE,
                                     traj: JumpFlowTrajectory,
                                     k: WeightK) -> np.ndarray:
    """Closed form of the jump-by-jump induction for the terminal value:

    c_j = exp(int_{T_j}^T f') * prod_{i>j} (1 + h(y_i) g'(Z_{T_i-}))
          * k(T_j, y_j)
          * (f(Z_{T_j-}) - f(Z_{T_j}) + f(Z_{T_j-}) h(y_j) g'(Z_{T_j-})).

    Expanding the tail product reproduces the multiple-integral series of
    the derivative: each subset of later jumps contributes its h g'
    factors, the first slot carries the local term.
    """
    jt, jx = traj.jump_times, traj.jump_sizes
    if jt.size == 0:
        return np.empty(0)
    hv = np.broadcast_to(np.asarray(sde.h(jx), dtype=float), jt.shape)
    gp = np.asarray(sde.dg(traj.jump_pre), dtype=float)
    alpha = 1.0 + hv * gp
    tail = multiplicative_tail_products(alpha)
    f_pre = np.asarray(sde.f(traj.jump_pre), dtype=float)
    f_post = np.asarray(sde.f(traj.jump_post), dtype=float)
    local = f_pre - f_post + f_pre * hv * gp
    kv = np.broadcast_to(np.asarray(k.k(jt, jx), dtype=float), jt.shape)
    return np.exp(traj.I_T - traj.jump_integral) * tail * kv * local


def derivative_multiplicative(path: LevyPath, sde: MultiplicativeJumpSDE,
                              k: WeightK,
                              traj: Optional[JumpFlowTrajectory] = None,
                              step: float = DEFAULT_ODE_STEP
                              ) -> DerivativeProcess:
    """D_t Z_T for the multiplicative-jump equation (step part only)."""
    if traj is None:
        traj = solve_multiplicative(path, sde, step)
    coeffs = multiplicative_step_coefficients(sde, traj, k)
    return DerivativeProcess.from_steps(path.T, traj.jump_times, coeffs)


# ---------------------------------------------------------------------------
# derivative weights tailored to the absolute-continuity arguments

def monotone_weight(h, direction: str = "increasing") -> WeightK:
    """Time-constant weight making (f(Z-) - f(Z)) k positive at jumps.

    clamp(-h(y)) to [-1, 1] for increasing drift, clamp(h(y)) for
    decreasing drift.
    """
    if direction == "increasing":
        k = lambda t, y: np.clip(-np.asarray(h(y), dtype=float), -1.0, 1.0)
    elif direction == "decreasing":
        k = lambda t, y: np.clip(np.asarray(h(y), dtype=float), -1.0, 1.0)
    else:
        raise ValueError("direction must be 'increasing' or 'decreasing'")

    def zero(t, y):
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(y)).shape)

    return WeightK(k, zero, sup_bound=1.0, name=f"monotone-{direction}")


def last_jump_weight(p: float, T: float) -> WeightK:
    """k(s, y) = (s - p)^2 1_{s > p}: C^1, supported strictly after p."""
    if not 0.0 < p < T:
        raise ValueError("p must lie in (0, T)")

    def k(s, y):
        s = np.asarray(s, dtype=float)
        return np.where(s > p, (s - p) ** 2, 0.0)

    def dt_k(s, y):
        s = np.asarray(s, dtype=float)
        return np.where(s > p, 2.0 * (s - p), 0.0)

    return WeightK(k, dt_k, sup_bound=(T - p) ** 2, name=f"after-{p:g}")


def local_monotone_weight(t_cut: float, h) -> WeightK:
    """k(s, y) = -(t_cut - s)^2 1_{s < t_cut} clamp(h(y)).

    A C^1 bump that only sees jumps before t_cut, signed against the
    jump direction so the positivity argument applies near the initial
    condition.
    """
    if not t_cut > 0.0:
        raise ValueError("t_cut must be positive")

    def clamp(y):
        return np.clip(np.asarray(h(y), dtype=float), -1.0, 1.0)

    def k(s, y):
        s = np.asarray(s, dtype=float)
        return -np.where(s < t_cut, (t_cut - s) ** 2, 0.0) * clamp(y)

    def dt_k(s, y):
        s = np.asarray(s, dtype=float)
        return np.where(s < t_cut, 2.0 * (t_cut - s), 0.0) * clamp(y)

    return WeightK(k, dt_k, sup_bound=t_cut ** 2, name=f"before-{t_cut:g}")


def wronskian_condition(sde: MultiplicativeJumpSDE, triplet: LevyTriplet,
                        n_x: int = 2001,
                        x_halfwidth: Optional[float] = None) -> bool:
    """|h(y) (g'f - f'g)(x)| > 0.5 ||f''|| ||h||^2 ||g||^2 on a sample.

    x runs over a wide interval around x0 covering the reachable range
    (each jump moves Z by at most ||h|| ||g||, counts concentrate near
    T nu(R_0)); y runs over the measure's quadrature nodes. Sup norms
    come from the declared bounds.
    """
    for bound in (sde.d2f_sup, sde.g_sup, sde.h_sup):
        if not np.isfinite(bound):
            raise ValueError("declare d2f_sup, g_sup, h_sup to evaluate the "
                             "Wronskian condition")
    rhs = 0.5 * sde.d2f_sup * sde.h_sup ** 2 * sde.g_sup ** 2
    if x_halfwidth is None:
        lam = triplet.T * triplet.nu.total_mass
        n_q = lam + 10.0 * math.sqrt(lam) + 10.0
        x_halfwidth = 10.0 + n_q * sde.h_sup * sde.g_sup
    x = np.linspace(sde.x0 - x_halfwidth, sde.x0 + x_halfwidth, n_x)
    wronskian = (np.asarray(sde.dg(x), dtype=float)
                 * np.asarray(sde.f(x), dtype=float)
                 - np.asarray(sde.df(x), dtype=float)
                 * np.asarray(sde.g(x), dtype=float))
    y_nodes, _ = triplet.nu.nodes_weights()
    if y_nodes.size == 0:
        return False
    hy = np.abs(np.broadcast_to(np.asarray(sde.h(y_nodes), dtype=float),
                                y_nodes.shape))
    lhs_min = float(np.min(np.abs(wronskian))) * float(np.min(hy))
    return lhs_min > rhs


# ---------------------------------------------------------------------------
# diffusion with state-independent jumps

@dataclass
class DiffusionTrajectory:
    times: np.ndarray       # grid nodes united with jump times
    values: np.ndarray      # Z (post-jump value at a jump time)
    factors: np.ndarray     # per-substep variational factors 1 + b' dt + s' dW
    brownian: np.ndarray    # W at the same nodes
    jump_times: np.ndarray
    jump_pre: np.ndarray
    jump_post: np.ndarray

    @property
    def z_T(self) -> float:
        return float(self.values[-1])


def solve_diffusion(path: LevyPath, sde: DiffusionSDE) -> DiffusionTrajectory:
    """Euler-Maruyama on grid-union-jump nodes; each jump adds l(y) y.

    Brownian increments at interior jump times come from linear
    interpolation of the stored grid values, consistent with how the
    path itself is evaluated.
    """
    nodes = np.union1d(path.grid, path.jump_times)
    w = path.brownian_at(nodes)
    jump_at = {float(t): float(x)
               for t, x in zip(path.jump_times, path.jump_sizes)}

    values = np.empty(nodes.shape)
    factors = np.empty(nodes.size - 1)
    jump_pre, jump_post = [], []
    z = float(sde.x0)
    values[0] = z
    for i in range(nodes.size - 1):
        dt = nodes[i + 1] - nodes[i]
        dw = w[i + 1] - w[i]
        factors[i] = 1.0 + float(sde.db(z)) * dt + float(sde.dsigma_fn(z)) * dw
        z = z + float(sde.b(z)) * dt + float(sde.sigma_fn(z)) * dw
        t_next = float(nodes[i + 1])
        if t_next in jump_at:
            y = jump_at[t_next]
            jump_pre.append(z)
            z = z + float(sde.l(y)) * y
            jump_post.append(z)
        values[i + 1] = z

    return DiffusionTrajectory(nodes, values, factors, w,
                               path.jump_times.copy(),
                               np.asarray(jump_pre), np.asarray(jump_post))


def derivative_diffusion_D0(path: LevyPath, sde: DiffusionSDE,
                            traj: Optional[DiffusionTrajectory] = None
                            ) -> DerivativeProcess:
    """Brownian-direction derivative of Z_T via the variational equation.

    D_t Z_T = sigma_fn(Z_t) * prod over substeps after t of
    (1 + b'(Z) dt + sigma_fn'(Z) dW), evaluated at the solver nodes and
    interpolated in between. Jumps are state-independent, so they do not
    enter the variational product.
    """
    if traj is None:
        traj = solve_diffusion(path, sde)
    suffix = np.ones(traj.times.size)
    if traj.factors.size:
        suffix[:-1] = np.cumprod(traj.factors[::-1])[::-1]
    d_nodes = np.asarray(sde.sigma_fn(traj.values), dtype=float) * suffix
    nodes = traj.times

    def fn(t):
        return np.interp(np.asarray(t, dtype=float), nodes, d_nodes)

    return DerivativeProcess(path.T, np.empty(0), np.empty(0), fn)


def diffusion_d0_closed_form(sde: DiffusionSDE,
                             traj: DiffusionTrajectory) -> np.ndarray:
    """sigma_fn(Z_t) exp(int_t^T (b' - s'^2/2) ds + int_t^T s' dW) at nodes.

    Left-point sums on the solver mesh; used as the cross-check for the
    variational route (they agree up to the Euler discretization error).
    """
    z = traj.values
    dt = np.diff(traj.times)
    dw = np.diff(traj.brownian)
    db = np.asarray(sde.db(z[:-1]), dtype=float)
    ds = np.asarray(sde.dsigma_fn(z[:-1]), dtype=float)
    increments = (db - 0.5 * ds * ds) * dt + ds * dw
    suffix = np.zeros(traj.times.size)
    suffix[:-1] = np.cumsum(increments[::-1])[::-1]
    return np.asarray(sde.sigma_fn(z), dtype=float) * np.exp(suffix)


def stopping_time_S(traj: DiffusionTrajectory, sde: DiffusionSDE) -> float:
    """First node where the diffusion coefficient is active, else T.

    Discrete version of inf{t : int_0^t 1_{sigma_fn(Z_s) != 0} ds > 0}.
    """
    active = np.asarray(sde.sigma_fn(traj.values), dtype=float) != 0.0
    if not np.any(active):
        return float(traj.times[-1])
    return float(traj.times[int(np.argmax(active))])
