"""Jump-size (Levy) measures and Borel size-sets.

A Levy measure here is a measure on the punctured line R_0 = R - {0} with
no mass at the origin. Three concrete flavours cover the experiments:

* :class:`DiscreteMeasure` -- finitely many atoms, everything exact;
* :class:`DensityMeasure` -- finite total mass with a density on a finite
  union of intervals, sampled through a user-supplied inverse CDF;
* :class:`TruncatableMeasure` -- an infinite-activity family that can only
  be simulated after an explicit truncation ``{|x| > eps}``.

:class:`SizeSet` models the Borel subsets of jump sizes used to localize
the derivative operator (finite unions of intervals excluding 0, plus an
explicit flag for whether the singleton {0} -- the Brownian direction --
is included).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .quadrature import DEFAULT_QUAD_TOL, adaptive_integrate, gauss_legendre


@dataclass(frozen=True)
class Interval:
    """An interval of the real line, with open/closed endpoints."""

    lo: float
    hi: float
    closed_lo: bool = False
    closed_hi: bool = False

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval: ({self.lo}, {self.hi})")

    def contains(self, x):
        x = np.asarray(x)
        left = x >= self.lo if self.closed_lo else x > self.lo
        right = x <= self.hi if self.closed_hi else x < self.hi
        return left & right

    def straddles_zero(self) -> bool:
        inner = self.lo < 0.0 < self.hi
        at_lo = self.lo == 0.0 and self.closed_lo
        at_hi = self.hi == 0.0 and self.closed_hi
        return inner or at_lo or at_hi

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        if self.lo > other.lo or (self.lo == other.lo and not other.closed_lo):
            lo, closed_lo = self.lo, self.closed_lo and other.contains(self.lo)
        else:
            lo, closed_lo = other.lo, other.closed_lo and self.contains(other.lo)
        if self.hi < other.hi or (self.hi == other.hi and not other.closed_hi):
            hi, closed_hi = self.hi, self.closed_hi and bool(other.contains(self.hi))
        else:
            hi, closed_hi = other.hi, other.closed_hi and bool(self.contains(other.hi))
        if lo > hi or (lo == hi and not (closed_lo and closed_hi)):
            return None
        return Interval(lo, hi, bool(closed_lo), bool(closed_hi))


@dataclass(frozen=True)
class SizeSet:
    """A finite union of intervals in R_0, with an explicit zero flag.

    The intervals must not touch 0; the Brownian direction is selected by
    ``includes_zero`` alone.
    """

    intervals: tuple[Interval, ...] = ()
    includes_zero: bool = False

    def __post_init__(self):
        for iv in self.intervals:
            if iv.straddles_zero():
                raise ValueError(
                    f"interval ({iv.lo}, {iv.hi}) touches 0; split it around the origin"
                )

    @classmethod
    def reals(cls, include_zero: bool = False) -> "SizeSet":
        """The whole punctured line (optionally plus the zero direction)."""
        return cls(
            (Interval(-np.inf, 0.0), Interval(0.0, np.inf)),
            includes_zero=include_zero,
        )

    @classmethod
    def zero_only(cls) -> "SizeSet":
        return cls((), includes_zero=True)

    @classmethod
    def singleton(cls, x: float) -> "SizeSet":
        if x == 0.0:
            return cls.zero_only()
        return cls((Interval(x, x, True, True),))

    @classmethod
    def abs_band(cls, lo: float, hi: float) -> "SizeSet":
        """The symmetric band {lo < |x| < hi}."""
        if not 0.0 <= lo < hi:
            raise ValueError("need 0 <= lo < hi")
        return cls((Interval(-hi, -lo), Interval(lo, hi)))

    def contains(self, x):
        """Vectorized membership for nonzero sizes."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for iv in self.intervals:
            out |= iv.contains(x)
        if self.includes_zero:
            out |= x == 0.0
        return out

    def intersect(self, other: "SizeSet") -> "SizeSet":
        pieces = []
        for a in self.intervals:
            for b in other.intervals:
                c = a.intersect(b)
                if c is not None:
                    pieces.append(c)
        pieces.sort(key=lambda iv: (iv.lo, iv.hi))
        return SizeSet(tuple(pieces), self.includes_zero and other.includes_zero)

    @property
    def nonzero_part(self) -> "SizeSet":
        return replace(self, includes_zero=False)


EVERYTHING = SizeSet.reals()


class LevyMeasure:
    """Common interface of the concrete jump measures (finite variants)."""

    total_mass: float

    def mass_of(self, sizes: SizeSet) -> float:
        raise NotImplementedError

    def integrate(self, fn, sizes: Optional[SizeSet] = None) -> float:
        """Deterministic integral of ``fn`` against the measure."""
        raise NotImplementedError

    def nodes_weights(self, sizes: Optional[SizeSet] = None):
        """Quadrature representation (x_i, w_i) with sum_i w_i f(x_i) ~ int f dnu."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def restrict(self, sizes: SizeSet) -> "LevyMeasure":
        raise NotImplementedError


@dataclass(frozen=True)
class DiscreteMeasure(LevyMeasure):
    """Finitely many atoms (x_i, mass_i); all integrals are exact sums."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for x, m in self.atoms:
            if x == 0.0:
                raise ValueError("atom at 0 is not allowed in a Levy measure")
            if m < 0.0:
                raise ValueError(f"negative mass {m} at {x}")

    @property
    def sizes_array(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms], dtype=float)

    @property
    def masses_array(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=float)

    @property
    def total_mass(self) -> float:
        return float(sum(m for _, m in self.atoms))

    def mass_of(self, sizes: SizeSet) -> float:
        keep = sizes.contains(self.sizes_array)
        return float(self.masses_array[keep].sum())

    def integrate(self, fn, sizes: Optional[SizeSet] = None) -> float:
        x, w = self.nodes_weights(sizes)
        if x.size == 0:
            return 0.0
        return float(np.dot(w, fn(x)))

    def nodes_weights(self, sizes: Optional[SizeSet] = None):
        x, w = self.sizes_array, self.masses_array
        if sizes is not None:
            keep = sizes.contains(x)
            x, w = x[keep], w[keep]
        return x, w

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.total_mass <= 0.0:
            raise ValueError("cannot sample jump sizes from a zero measure")
        p = self.masses_array / self.total_mass
        idx = rng.choice(len(self.atoms), size=n, p=p)
        return self.sizes_array[idx]

    def restrict(self, sizes: SizeSet) -> "DiscreteMeasure":
        keep = sizes.contains(self.sizes_array)
        return DiscreteMeasure(tuple(a for a, k in zip(self.atoms, keep) if k))


ZERO_MEASURE = DiscreteMeasure(())


@dataclass(frozen=True)
class DensityMeasure(LevyMeasure):
    """Finite-mass measure with a density on a finite union of intervals.

    ``inverse_cdf`` maps a unit uniform to a jump size and is used for
    simulation; it must agree with the density (checked at construction by
    a moment comparison). Restrictions keep the density but drop the
    sampler, so restricted measures integrate but do not simulate.
    """

    density: Callable[[np.ndarray], np.ndarray]
    support: tuple[Interval, ...]
    inverse_cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    quad_tol: float = DEFAULT_QUAD_TOL
    gl_order: int = 96
    _mass: Optional[float] = field(default=None, repr=False)

    def __post_init__(self):
        for iv in self.support:
            if iv.straddles_zero():
                raise ValueError("support must exclude 0")
        mass = self._piecewise_quad(lambda x: self.density(x))
        if not np.isfinite(mass):
            raise ValueError("density has non-finite total mass")
        object.__setattr__(self, "_mass", float(mass))
        # the Levy-measure moment conditions, checked once up front
        for moment in (lambda x: np.abs(x) * self.density(x),
                       lambda x: x * x * self.density(x)):
            value = self._piecewise_quad(moment)
            if not np.isfinite(value):
                raise ValueError("density fails the first/second moment check")
        if self.inverse_cdf is not None:
            u = np.linspace(1e-6, 1.0 - 1e-6, 257)
            xs = np.asarray(self.inverse_cdf(u), dtype=float)
            if np.any(xs == 0.0):
                raise ValueError("sampler returned a jump of size 0")
            if not np.all(self.contains_support(xs)):
                raise ValueError("sampler leaves the declared support")

    def contains_support(self, x):
        x = np.asarray(x)
        ok = np.zeros(x.shape, dtype=bool)
        for iv in self.support:
            # endpoint-tolerant: samplers may hit closed endpoints
            ok |= (x >= iv.lo) & (x <= iv.hi)
        return ok

    def _piecewise_quad(self, fn) -> float:
        return sum(
            adaptive_integrate(lambda x: float(fn(np.array([x]))[0]), iv.lo, iv.hi,
                               self.quad_tol)
            for iv in self.support
        )

    @property
    def total_mass(self) -> float:
        return self._mass

    def _pieces(self, sizes: Optional[SizeSet]):
        if sizes is None:
            return self.support
        out = []
        for iv in self.support:
            for lv in sizes.intervals:
                c = iv.intersect(lv)
                if c is not None and c.hi > c.lo:
                    out.append(c)
        return tuple(out)

    def mass_of(self, sizes: SizeSet) -> float:
        return self.integrate(lambda x: np.ones_like(x), sizes)

    def integrate(self, fn, sizes: Optional[SizeSet] = None) -> float:
        total = 0.0
        for iv in self._pieces(sizes):
            total += adaptive_integrate(
                lambda x: float(fn(np.array([x]))[0] * self.density(np.array([x]))[0]),
                iv.lo, iv.hi, self.quad_tol,
            )
        return total

    def nodes_weights(self, sizes: Optional[SizeSet] = None):
        xs, ws = [], []
        for iv in self._pieces(sizes):
            x, w = gauss_legendre(iv.lo, iv.hi, self.gl_order)
            xs.append(x)
            ws.append(w * self.density(x))
        if not xs:
            return np.empty(0), np.empty(0)
        return np.concatenate(xs), np.concatenate(ws)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.inverse_cdf is None:
            raise ValueError(
                "this (restricted) density measure has no sampler; "
                "simulate with the full measure and restrict the jumps"
            )
        return np.asarray(self.inverse_cdf(rng.random(n)), dtype=float)

    def restrict(self, sizes: SizeSet) -> "DensityMeasure":
        return DensityMeasure(self.density, self._pieces(sizes), None,
                              self.quad_tol, self.gl_order)


def table_inverse_cdf(density, lo: float, hi: float, n: int = 4097):
    """Numeric inverse CDF from a density on [lo, hi] via a monotone table."""
    x = np.linspace(lo, hi, n)
    pdf = density(x)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(x) * (pdf[1:] + pdf[:-1]))])
    cdf /= cdf[-1]
    # drop flat segments so interp stays strictly monotone
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    xs, cs = x[keep], cdf[keep]

    def inverse(u):
        return np.interp(u, cs, xs)

    return inverse


@dataclass(frozen=True)
class TruncatableMeasure:
    """Infinite-activity family; usable only through truncated({|x| > eps}).

    ``density`` is the family's density on R_0 (integrable against 1 ^ x^2
    but possibly of infinite total mass near 0). ``support`` bounds where
    that density lives. ``truncated_mass``/``truncated_inverse_cdf`` may
    supply closed forms; otherwise adaptive quadrature and a table-based
    sampler are built per truncation level.
    """

    density: Callable[[np.ndarray], np.ndarray]
    support: tuple[Interval, ...]
    truncated_mass: Optional[Callable[[float], float]] = None
    truncated_inverse_cdf: Optional[Callable[[float], Callable]] = None
    table_hi: Optional[float] = None

    def __post_init__(self):
        for iv in self.support:
            if iv.straddles_zero():
                raise ValueError("support must exclude 0")

    @property
    def total_mass(self) -> float:
        return float("inf")

    def truncated(self, eps: float) -> DensityMeasure:
        if not eps > 0.0:
            raise ValueError("truncation level eps must be positive")
        band = SizeSet((Interval(-np.inf, -eps, False, True),
                        Interval(eps, np.inf, True, False)))
        pieces = []
        for iv in self.support:
            for lv in band.intervals:
                c = iv.intersect(lv)
                if c is not None and c.hi > c.lo:
                    pieces.append(c)
        if self.truncated_inverse_cdf is not None:
            sampler = self.truncated_inverse_cdf(eps)
        else:
            if len(pieces) != 1:
                raise ValueError("table sampler supports one-sided families only")
            iv = pieces[0]
            hi = iv.hi if np.isfinite(iv.hi) else self.table_hi
            if hi is None:
                raise ValueError("unbounded support needs table_hi or a closed form")
            sampler = table_inverse_cdf(self.density, iv.lo, hi)
        return DensityMeasure(self.density, tuple(pieces), sampler)

    def integrate_full(self, fn, tol: float = DEFAULT_QUAD_TOL) -> float:
        """Integral against the *untruncated* measure (must converge)."""
        total = 0.0
        for iv in self.support:
            total += adaptive_integrate(
                lambda x: float(fn(np.array([x]))[0] * self.density(np.array([x]))[0]),
                iv.lo, iv.hi, tol,
            )
        return total
