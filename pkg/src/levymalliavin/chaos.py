"""Multiple integrals over jump sets of finite mass.

J_n(phi) sums a simplex integrand phi over all strictly increasing
n-tuples of jumps whose sizes lie in a set Theta bounded away from 0
(so the jump count is a.s. finite and everything is computed pathwise
by enumeration). The product formula, symmetrization, and the L^p
moment bound of this algebra are implemented alongside.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .batch import PathBatch
from .measures import SizeSet
from .paths import LevyPath, LevyTriplet
from .quadrature import gauss_legendre

# enumerating C(N,n) tuples of n scalars each must stay under this many
# entries unless the caller raises the budget
DEFAULT_ENUM_BUDGET = 4 << 20


@dataclass(frozen=True)
class SimplexIntegrand:
    """phi(t_1,x_1; ...; t_n,x_n) defined for t_1 < ... < t_n.

    ``eval_fn`` takes time/size arrays of shape (..., n) and returns
    (...); ``dt_fns[j]`` is the analytic partial in t_j with the same
    signature. Evaluation off the ordered simplex is only allowed with
    ``symmetric_extension=True``, in which case the pairs are sorted by
    time before evaluation.
    """

    arity: int
    eval_fn: Callable
    dt_fns: Optional[tuple[Callable, ...]] = None
    symmetric_extension: bool = False
    name: str = ""

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError("arity must be >= 1")
        if self.dt_fns is not None and len(self.dt_fns) != self.arity:
            raise ValueError("need one time partial per slot")

    def on_simplex(self, t, x):
        """Evaluate at already-ordered tuples (no sorting, no checks)."""
        return np.asarray(self.eval_fn(t, x), dtype=float)

    def evaluate(self, t, x):
        """Evaluate anywhere, sorting pairs by time if extension is enabled."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        ordered = np.all(np.diff(t, axis=-1) >= 0.0)
        if not ordered:
            if not self.symmetric_extension:
                raise ValueError(
                    "evaluation off the ordered simplex requires "
                    "symmetric_extension=True"
                )
            order = np.argsort(t, axis=-1, kind="stable")
            t = np.take_along_axis(t, order, axis=-1)
            x = np.take_along_axis(x, order, axis=-1)
        return self.on_simplex(t, x)

    def partial(self, j: int) -> Callable:
        if self.dt_fns is None:
            raise ValueError(f"integrand {self.name!r} has no analytic partials")
        return self.dt_fns[j]


def as_arity1(phi) -> SimplexIntegrand:
    if isinstance(phi, SimplexIntegrand):
        if phi.arity != 1:
            raise ValueError("expected an arity-1 integrand")
        return phi
    return SimplexIntegrand(
        1,
        lambda t, x: np.asarray(phi(t[..., 0], x[..., 0]), dtype=float),
        symmetric_extension=True,
    )


def theta_jumps(path: LevyPath, theta: Optional[SizeSet]):
    if theta is None:
        return path.jump_times, path.jump_sizes
    keep = theta.contains(path.jump_sizes)
    return path.jump_times[keep], path.jump_sizes[keep]


def combination_indices(n_jumps: int, n: int, budget: int) -> np.ndarray:
    count = math.comb(n_jumps, n)
    if count * n > budget:
        raise ValueError(
            f"enumeration of C({n_jumps},{n}) = {count} tuples exceeds the "
            f"budget of {budget} entries; raise `budget` to force it"
        )
    return np.array(list(itertools.combinations(range(n_jumps), n)),
                    dtype=np.intp).reshape(count, n)


def multiple_integral(path: LevyPath, theta: Optional[SizeSet],
                      phi: SimplexIntegrand,
                      budget: int = DEFAULT_ENUM_BUDGET) -> float:
    """J_n(phi): sum of phi over ordered n-tuples of Theta-jumps.

    Returns 0 when the path carries fewer than n such jumps.
    """
    jt, jx = theta_jumps(path, theta)
    n = phi.arity
    if jt.size < n:
        return 0.0
    combos = combination_indices(jt.size, n, budget)
    vals = phi.on_simplex(jt[combos], jx[combos])
    return float(np.sum(vals))


def multiple_integral_batch(batch: PathBatch, theta: Optional[SizeSet],
                            phi: SimplexIntegrand,
                            budget: int = DEFAULT_ENUM_BUDGET) -> np.ndarray:
    """J_n(phi) for every path of a batch (paths grouped by jump count)."""
    sub = batch if theta is None else batch.restrict(theta)
    n = phi.arity
    counts = sub.counts
    out = np.zeros(sub.n_paths)
    for count in np.unique(counts):
        if count < n:
            continue
        which = np.nonzero(counts == count)[0]
        starts = sub.offsets[which]
        gather = starts[:, None] + np.arange(count)[None, :]
        times = sub.jump_times[gather]          # (P_c, count)
        sizes = sub.jump_sizes[gather]
        combos = combination_indices(int(count), n, budget)  # (C, n)
        vals = phi.on_simplex(times[:, combos], sizes[:, combos])  # (P_c, C)
        out[which] = vals.sum(axis=1)
    return out


def tensor_tilde(phi_n: SimplexIntegrand, phi_1) -> SimplexIntegrand:
    """The (n+1)-slot product integrand: sum over which slot feeds phi_1.

    (t_1..t_{n+1}) -> sum_j phi_n(all pairs but slot j) * phi_1(t_j, x_j).
    """
    one = as_arity1(phi_1)
    n1 = phi_n.arity + 1

    def eval_fn(t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        total = 0.0
        for j in range(n1):
            keep = [i for i in range(n1) if i != j]
            term = phi_n.evaluate(t[..., keep], x[..., keep]) \
                * one.on_simplex(t[..., j:j + 1], x[..., j:j + 1])
            total = total + term
        return total

    return SimplexIntegrand(n1, eval_fn, symmetric_extension=True,
                            name=f"({phi_n.name} (x~) {one.name})")


def star_contract(phi_n: SimplexIntegrand, phi_1) -> SimplexIntegrand:
    """Same-arity contraction: phi_n * sum_j phi_1(t_j, x_j)."""
    one = as_arity1(phi_1)
    n = phi_n.arity

    def eval_fn(t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        s = 0.0
        for j in range(n):
            s = s + one.on_simplex(t[..., j:j + 1], x[..., j:j + 1])
        return phi_n.evaluate(t, x) * s

    return SimplexIntegrand(n, eval_fn,
                            symmetric_extension=phi_n.symmetric_extension,
                            name=f"({phi_n.name} * {one.name})")


def symmetrize(phi: SimplexIntegrand) -> SimplexIntegrand:
    """Average of phi over all slot permutations (fixed point if symmetric)."""
    n = phi.arity
    if n == 1:
        return SimplexIntegrand(1, phi.eval_fn, phi.dt_fns, True, phi.name)
    perms = list(itertools.permutations(range(n)))

    def eval_fn(t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        acc = 0.0
        for perm in perms:
            idx = list(perm)
            acc = acc + phi.evaluate(t[..., idx], x[..., idx])
        return acc / len(perms)

    return SimplexIntegrand(n, eval_fn, symmetric_extension=True,
                            name=f"sym({phi.name})")


def product_identity_residual(path: LevyPath, theta: Optional[SizeSet],
                              phi_n: SimplexIntegrand, phi_1) -> float:
    """|J_n(phi_n) J_1(phi_1) - J_{n+1}(phi_n (x~) phi_1) - J_n(phi_n * phi_1)|."""
    one = as_arity1(phi_1)
    lhs = multiple_integral(path, theta, phi_n) \
        * multiple_integral(path, theta, one)
    rhs = multiple_integral(path, theta, tensor_tilde(phi_n, one)) \
        + multiple_integral(path, theta, star_contract(phi_n, one))
    return abs(lhs - rhs)


def random_simplex_integrand(n: int, rng: np.random.Generator,
                             coupling: bool = True) -> SimplexIntegrand:
    """A randomized smooth integrand with analytic slot partials.

    phi = prod_j (a_j + b_j t_j + c_j sin t_j + d_j x_j) * (1 + e t_1 t_n),
    with coefficients drawn from ``rng``; the affine-in-sin factors keep
    every partial O(1) and the coupling term makes phi non-separable.
    """
    a = rng.uniform(0.5, 1.5, n)
    b = rng.uniform(-0.7, 0.7, n)
    c = rng.uniform(-0.7, 0.7, n)
    d = rng.uniform(-0.5, 0.5, n)
    e = float(rng.uniform(-0.5, 0.5)) if (coupling and n >= 2) else 0.0

    def factors(t, x):
        return a + b * t + c * np.sin(t) + d * x

    def leave_one_out(u):
        # prefix/suffix products along the last axis
        ones = np.ones(u.shape[:-1] + (1,))
        prefix = np.concatenate([ones, np.cumprod(u, axis=-1)[..., :-1]],
                                axis=-1)
        suffix = np.concatenate([np.cumprod(u[..., ::-1], axis=-1)[..., ::-1]
                                 [..., 1:], ones], axis=-1)
        return prefix * suffix

    def couple(t):
        return 1.0 + e * t[..., 0] * t[..., -1]

    def eval_fn(t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.prod(factors(t, x), axis=-1) * couple(t)

    def make_partial(j):
        def partial(t, x):
            t = np.asarray(t, dtype=float)
            x = np.asarray(x, dtype=float)
            u = factors(t, x)
            loo = leave_one_out(u)[..., j]
            out = (b[j] + c[j] * np.cos(t[..., j])) * loo * couple(t)
            if e != 0.0 and (j == 0 or j == n - 1):
                other = t[..., -1] if j == 0 else t[..., 0]
                out = out + np.prod(u, axis=-1) * e * other
            return out
        return partial

    return SimplexIntegrand(n, eval_fn,
                            dt_fns=tuple(make_partial(j) for j in range(n)),
                            symmetric_extension=True,
                            name=f"random-{n}")


# ---------------------------------------------------------------------------
# L^p moment bound

def moment_constant(p: float, n: int, rate: float,
                    rel_tol: float = 1e-15) -> float:
    """The combinatorial constant of the L^p bound for J_n.

    Equals exp(-rate) * sum_{k>=n} rate^(k-n)/(k-n)! * C(k,n)^(p-1) with
    rate = T * nu(Theta): conditioning the jump count on k, Jensen pays
    a factor (number of ordered n-tuples)^(p-1) = C(k,n)^(p-1), and the
    order statistics contribute k!/(k-n)! per unit simplex integral. For
    n = 1 this is the series with the factor k^(p-1). The truncated
    series is topped up with a geometric tail bound so the returned
    value is always an upper bound; it is exact (attained) for constant
    integrands with integer p.
    """
    if rate < 0.0:
        raise ValueError("rate must be nonnegative")
    acc = 0.0
    term = 1.0  # j = 0: rate^0/0! * C(n,n)^(p-1)
    j = 0
    while True:
        acc += term
        j += 1
        # C(j+n, n) / C(j-1+n, n) = (j+n) / j
        term = term * rate / j * ((j + n) / j) ** (p - 1.0)
        if j > 2.0 * rate * (1.0 + n) ** (p - 1.0) + 4 * (p + n) \
                and term < rel_tol * acc:
            break
        if j > 100_000:
            raise ArithmeticError("moment constant series failed to converge")
    # past the stopping point the term ratio is below 1/2
    tail = 2.0 * term
    return math.exp(-rate) * (acc + tail)


def simplex_lp_integral(phi: SimplexIntegrand, p: float,
                        triplet: LevyTriplet, theta: Optional[SizeSet],
                        order: int = 24) -> float:
    """int over the ordered time simplex of |phi|^p against dt^n x nu^n.

    Times are mapped to the simplex by t_j = v_j * t_{j+1} (t_{n+1} = T),
    which keeps the integrand smooth; sizes run over the measure's
    quadrature nodes, so the cost is order^n times (number of nodes)^n.
    """
    n = phi.arity
    T = triplet.T
    x_nodes, x_weights = triplet.nu.nodes_weights(theta)
    if x_nodes.size == 0:
        return 0.0
    v_nodes, v_weights = gauss_legendre(0.0, 1.0, order)

    v_grids = np.meshgrid(*([v_nodes] * n), indexing="ij")
    w_time = np.ones(v_grids[0].shape)
    for g in np.meshgrid(*([v_weights] * n), indexing="ij"):
        w_time = w_time * g
    times = [None] * n
    jac = np.ones(v_grids[0].shape)
    upper = T
    for j in range(n - 1, -1, -1):
        jac = jac * upper
        times[j] = v_grids[j] * upper
        upper = times[j]
    t_stack = np.stack(times, axis=-1).reshape(-1, n)
    w_flat = (w_time * jac).reshape(-1)

    total = 0.0
    for x_idx in itertools.product(range(x_nodes.size), repeat=n):
        xw = float(np.prod(x_weights[list(x_idx)]))
        xs = np.broadcast_to(x_nodes[list(x_idx)], t_stack.shape)
        vals = np.abs(phi.on_simplex(t_stack, xs)) ** p
        total += xw * float(np.dot(w_flat, vals))
    return total


def moment_bound_check(triplet: LevyTriplet, theta: Optional[SizeSet],
                       phi: SimplexIntegrand, p: float, mc,
                       grid_size: int = 8) -> dict:
    """Monte Carlo E|J_n(phi)|^p against the deterministic upper bound.

    Returns the estimate with its standard error, the bound, and the
    pieces it is made of. The contract is lhs <= rhs within MC error.
    """
    from .mc import run_streaming  # local import to avoid a cycle

    rate = triplet.T * (triplet.nu.mass_of(theta) if theta is not None
                        else triplet.nu.total_mass)
    constant = moment_constant(p, phi.arity, rate)
    integral = simplex_lp_integral(phi, p, triplet, theta)

    def metric(batch: PathBatch) -> np.ndarray:
        return np.abs(multiple_integral_batch(batch, theta, phi)) ** p

    stats = run_streaming(triplet, grid_size, mc, metric)
    return {
        "lhs_estimate": stats.mean,
        "lhs_stderr": stats.stderr,
        "rhs_bound": constant * integral,
        "constant": constant,
        "integral": integral,
        "n_paths": stats.count,
    }
