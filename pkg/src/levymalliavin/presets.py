"""Named presets for measures, kernels, weights, functionals and SDEs.

Configs refer to these by name with numeric parameter overrides; there is
no runtime expression parsing. Every preset callable is numpy-vectorized.
"""
from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from scipy.special import exp1

from .kernels import Kernel, TimeFunction, WeightK
from .malliavin import SmoothFunctional
from .measures import (DensityMeasure, DiscreteMeasure, Interval, SizeSet,
                       TruncatableMeasure, ZERO_MEASURE)
from .paths import LevyTriplet
from .sde import AdditiveJumpSDE, DiffusionSDE, MultiplicativeJumpSDE


def _shape(t, x):
    return np.broadcast(np.asarray(t), np.asarray(x)).shape


def _ones(t, x):
    return np.ones(_shape(t, x))


def _zeros(t, x):
    return np.zeros(_shape(t, x))


# ---------------------------------------------------------------------------
# measures

def _poisson_measure(mass: float = 1.0, size: float = 1.0) -> DiscreteMeasure:
    return DiscreteMeasure(((size, mass),))


def _two_atom_measure(mass1: float = 0.6, mass2: float = 0.4,
                      size1: float = 1.0, size2: float = -2.0) -> DiscreteMeasure:
    return DiscreteMeasure(((size1, mass1), (size2, mass2)))


def _two_atom_positive(mass1: float = 0.6, mass2: float = 0.4,
                       size1: float = 0.8, size2: float = 1.6) -> DiscreteMeasure:
    return DiscreteMeasure(((size1, mass1), (size2, mass2)))


def _finite_density_measure(lo: float = 0.3, hi: float = 3.0,
                            scale: float = 1.0) -> DensityMeasure:
    """Truncated exponential tail: density scale * e^{-x} on [lo, hi]."""
    norm = math.exp(-lo) - math.exp(-hi)

    def density(x):
        x = np.asarray(x, dtype=float)
        return scale * np.exp(-x) * ((x >= lo) & (x <= hi))

    def inverse_cdf(u):
        u = np.asarray(u, dtype=float)
        return -np.log(math.exp(-lo) - u * norm)

    return DensityMeasure(density, (Interval(lo, hi, True, True),), inverse_cdf)


def _gamma_like_measure(scale: float = 1.0) -> TruncatableMeasure:
    """Gamma-process jump family: density scale * x^{-1} e^{-x} on (0, inf).

    Infinite total mass at the origin; truncated mass has the closed form
    scale * E_1(eps). First two h(y) = y moments against the full measure
    are scale * Gamma(1) and scale * Gamma(2).
    """

    def density(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(x > 0.0, scale * np.exp(-x) / np.where(x > 0, x, 1.0),
                           0.0)
        return out

    return TruncatableMeasure(
        density, (Interval(0.0, np.inf),),
        truncated_mass=lambda eps: scale * float(exp1(eps)),
        table_hi=40.0,
    )


MEASURES: dict[str, Callable] = {
    "zero": lambda: ZERO_MEASURE,
    "poisson": _poisson_measure,
    "compound-two-atom": _two_atom_measure,
    "two-atom-positive": _two_atom_positive,
    "finite-density": _finite_density_measure,
    "truncatable-gamma-like": _gamma_like_measure,
}


def make_measure(name: str, **params):
    if name not in MEASURES:
        raise KeyError(f"unknown measure preset {name!r}")
    return MEASURES[name](**params)


def make_triplet(measure: str = "poisson", gamma: float = 0.0,
                 sigma: float = 0.0, T: float = 1.0,
                 measure_params: Optional[dict] = None) -> LevyTriplet:
    return LevyTriplet(gamma, sigma, make_measure(measure,
                                                  **(measure_params or {})), T)


# ---------------------------------------------------------------------------
# kernels h(t, x)

def _kernel_constant(value: float = 1.0) -> Kernel:
    return Kernel(lambda t, x: value * _ones(t, x), _zeros, name="constant")


def _kernel_linear_time(slope: float = 1.0) -> Kernel:
    return Kernel(lambda t, x: slope * np.asarray(t, dtype=float) * _ones(t, x),
                  lambda t, x: slope * _ones(t, x), name="linear-time")


def _kernel_cos_time(omega: float = 1.0, amp: float = 1.0) -> Kernel:
    return Kernel(
        lambda t, x: amp * np.cos(omega * np.asarray(t, dtype=float)) * _ones(t, x),
        lambda t, x: -amp * omega * np.sin(omega * np.asarray(t, dtype=float))
        * _ones(t, x),
        name="cos-time")


def _kernel_time_size() -> Kernel:
    return Kernel(lambda t, x: np.asarray(t, dtype=float)
                  * np.asarray(x, dtype=float),
                  lambda t, x: np.asarray(x, dtype=float) * _ones(t, x),
                  name="time-size")


def _kernel_sin_time_size(omega: float = 2.0) -> Kernel:
    return Kernel(
        lambda t, x: np.sin(omega * np.asarray(t, dtype=float))
        * np.asarray(x, dtype=float),
        lambda t, x: omega * np.cos(omega * np.asarray(t, dtype=float))
        * np.asarray(x, dtype=float),
        name="sin-time-size")


def _kernel_count_indicator(lo: float = 0.5, hi: float = math.inf) -> Kernel:
    """1_{lo < |x| < hi} / x: M(h) recovers the jump count of the band
    (up to its compensator); time-constant, so its derivative vanishes."""
    def h(t, x):
        x = np.asarray(x, dtype=float)
        inside = (np.abs(x) > lo) & (np.abs(x) < hi) & (x != 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(inside, 1.0 / np.where(x == 0.0, 1.0, x), 0.0) \
                * _ones(t, x)

    return Kernel(h, _zeros, name="count-indicator")


KERNELS: dict[str, Callable] = {
    "constant": _kernel_constant,
    "linear-time": _kernel_linear_time,
    "cos-time": _kernel_cos_time,
    "time-size": _kernel_time_size,
    "sin-time-size": _kernel_sin_time_size,
    "count-indicator": _kernel_count_indicator,
}


def make_kernel(name: str, **params) -> Kernel:
    if name not in KERNELS:
        raise KeyError(f"unknown kernel preset {name!r}")
    return KERNELS[name](**params)


# ---------------------------------------------------------------------------
# derivative weights k(t, x)

def _weight_unit() -> WeightK:
    return WeightK(_ones, _zeros, sup_bound=1.0, name="unit")


def _weight_constant(value: float = 1.0) -> WeightK:
    return WeightK(lambda t, x: value * _ones(t, x), _zeros,
                   sup_bound=abs(value) or 1.0, name="scaled-unit")


def _weight_cosine_time(T: float = 1.0) -> WeightK:
    w = math.pi / T
    return WeightK(
        lambda t, x: 0.5 * (1.0 + np.cos(w * np.asarray(t, dtype=float)))
        * _ones(t, x),
        lambda t, x: -0.5 * w * np.sin(w * np.asarray(t, dtype=float))
        * _ones(t, x),
        sup_bound=1.0, name="cosine-time")


def _weight_parabola_time(T: float = 1.0) -> WeightK:
    return WeightK(
        lambda t, x: np.asarray(t, dtype=float)
        * (T - np.asarray(t, dtype=float)) / T ** 2 * _ones(t, x),
        lambda t, x: (T - 2.0 * np.asarray(t, dtype=float)) / T ** 2
        * _ones(t, x),
        sup_bound=0.25, name="parabola-time")


def _weight_exp_size_decay(T: float = 1.0) -> WeightK:
    return WeightK(
        lambda t, x: np.exp(-np.abs(np.asarray(x, dtype=float)))
        * (1.0 - np.asarray(t, dtype=float) / T),
        lambda t, x: -np.exp(-np.abs(np.asarray(x, dtype=float))) / T
        * _ones(t, x),
        sup_bound=1.0, name="exp-size-decay")


WEIGHTS: dict[str, Callable] = {
    "unit": _weight_unit,
    "scaled-unit": _weight_constant,
    "cosine-time": _weight_cosine_time,
    "parabola-time": _weight_parabola_time,
    "exp-size-decay": _weight_exp_size_decay,
}


def make_weight(name: str, **params) -> WeightK:
    if name not in WEIGHTS:
        raise KeyError(f"unknown weight preset {name!r}")
    return WEIGHTS[name](**params)


# ---------------------------------------------------------------------------
# bounded time functions g(t)

G_FUNCTIONS: dict[str, Callable] = {
    "one": lambda: TimeFunction(lambda t: np.ones(np.asarray(t).shape),
                                lambda t: np.asarray(t, dtype=float),
                                name="one"),
    "linear": lambda: TimeFunction(lambda t: np.asarray(t, dtype=float),
                                   lambda t: 0.5 * np.asarray(t, dtype=float) ** 2,
                                   name="linear"),
    "quadratic": lambda: TimeFunction(
        lambda t: np.asarray(t, dtype=float) ** 2,
        lambda t: np.asarray(t, dtype=float) ** 3 / 3.0, name="quadratic"),
    "exp-decay": lambda: TimeFunction(
        lambda t: np.exp(-np.asarray(t, dtype=float)),
        lambda t: 1.0 - np.exp(-np.asarray(t, dtype=float)), name="exp-decay"),
}


def make_g(name: str, **params) -> TimeFunction:
    if name not in G_FUNCTIONS:
        raise KeyError(f"unknown g preset {name!r}")
    return G_FUNCTIONS[name](**params)


# ---------------------------------------------------------------------------
# smooth outer functions and functionals

def _sech2(u):
    return 1.0 / np.cosh(u) ** 2


SMOOTH_1D = {
    "tanh": (np.tanh, _sech2),
    "sin": (np.sin, np.cos),
    "gauss": (lambda u: np.exp(-0.5 * u ** 2),
              lambda u: -u * np.exp(-0.5 * u ** 2)),
}

SMOOTH_2D = {
    "sin-cos": (
        lambda u, v: np.sin(u) * np.cos(v),
        lambda u, v: (np.cos(u) * np.cos(v), -np.sin(u) * np.sin(v)),
    ),
    "tanh-sum": (
        lambda u, v: np.tanh(u + 0.5 * v),
        lambda u, v: (_sech2(u + 0.5 * v), 0.5 * _sech2(u + 0.5 * v)),
    ),
}


def smooth_functional_1d(fn_name: str, kernel: Kernel,
                         name: str = "") -> SmoothFunctional:
    fn, dfn = SMOOTH_1D[fn_name]

    def f(m):
        return fn(np.asarray(m, dtype=float)[..., 0])

    def grad(m):
        return dfn(np.asarray(m, dtype=float)[..., 0])[..., None]

    return SmoothFunctional(f, grad, (kernel,), name or fn_name)


def smooth_functional_2d(fn_name: str, k1: Kernel, k2: Kernel,
                         name: str = "") -> SmoothFunctional:
    fn, dfn = SMOOTH_2D[fn_name]

    def f(m):
        m = np.asarray(m, dtype=float)
        return fn(m[..., 0], m[..., 1])

    def grad(m):
        m = np.asarray(m, dtype=float)
        g1, g2 = dfn(m[..., 0], m[..., 1])
        return np.stack([g1, g2], axis=-1)

    return SmoothFunctional(f, grad, (k1, k2), name or fn_name)


# ---------------------------------------------------------------------------
# SDE presets

def _sde_increasing_drift(x0: float = 0.0, a: float = 1.0) -> AdditiveJumpSDE:
    """f(z) = a z + tanh(z): strictly increasing, f' in [a, a + 1]."""
    return AdditiveJumpSDE(
        f=lambda z: a * np.asarray(z, dtype=float) + np.tanh(z),
        df=lambda z: a + _sech2(np.asarray(z, dtype=float)),
        h=lambda y: np.asarray(y, dtype=float),
        x0=x0)


def _sde_contracting_drift(x0: float = 1.0) -> AdditiveJumpSDE:
    """f(z) = -z: decreasing drift, closed-form flow between jumps."""
    return AdditiveJumpSDE(
        f=lambda z: -np.asarray(z, dtype=float),
        df=lambda z: -np.ones(np.asarray(z, dtype=float).shape),
        h=lambda y: np.asarray(y, dtype=float),
        x0=x0)


def _sde_locally_monotone(x0: float = 0.0, width: float = 1.0) -> AdditiveJumpSDE:
    """f(z) = (z - x0) exp(-(z - x0)^2 / (2 width^2)).

    Strictly increasing on (x0 - width, x0 + width), f(x0) = 0, and
    sup |f'| = 1 for every width.
    """

    def f(z):
        u = np.asarray(z, dtype=float) - x0
        return u * np.exp(-0.5 * (u / width) ** 2)

    def df(z):
        u = np.asarray(z, dtype=float) - x0
        return (1.0 - (u / width) ** 2) * np.exp(-0.5 * (u / width) ** 2)

    return AdditiveJumpSDE(f=f, df=df,
                           h=lambda y: np.asarray(y, dtype=float), x0=x0)


def _sde_wronskian_pair(x0: float = 0.0, amp: float = 1.0, beta: float = 0.5,
                        h0: float = 0.5) -> MultiplicativeJumpSDE:
    """f = amp sin(beta z), g = amp cos(beta z), h = h0.

    The Wronskian g'f - f'g is the constant -amp^2 beta, so the density
    condition |h W| > 0.5 ||f''|| ||h||^2 ||g||^2 holds whenever
    beta h0 amp < 2.
    """
    return MultiplicativeJumpSDE(
        f=lambda z: amp * np.sin(beta * np.asarray(z, dtype=float)),
        df=lambda z: amp * beta * np.cos(beta * np.asarray(z, dtype=float)),
        d2f=lambda z: -amp * beta ** 2 * np.sin(beta * np.asarray(z, dtype=float)),
        g=lambda z: amp * np.cos(beta * np.asarray(z, dtype=float)),
        dg=lambda z: -amp * beta * np.sin(beta * np.asarray(z, dtype=float)),
        h=lambda y: h0 * np.ones(np.asarray(y, dtype=float).shape),
        x0=x0,
        d2f_sup=amp * beta ** 2, g_sup=amp, h_sup=abs(h0))


def _sde_gbm_diffusion(x0: float = 1.0, mu: float = 0.05,
                       vol: float = 0.2) -> DiffusionSDE:
    return DiffusionSDE(
        b=lambda z: mu * np.asarray(z, dtype=float),
        db=lambda z: mu * np.ones(np.asarray(z, dtype=float).shape),
        sigma_fn=lambda z: vol * np.asarray(z, dtype=float),
        dsigma_fn=lambda z: vol * np.ones(np.asarray(z, dtype=float).shape),
        l=lambda y: np.zeros(np.asarray(y, dtype=float).shape),
        x0=x0)


SDES: dict[str, Callable] = {
    "increasing-drift": _sde_increasing_drift,
    "contracting-drift": _sde_contracting_drift,
    "locally-monotone": _sde_locally_monotone,
    "wronskian-pair": _sde_wronskian_pair,
    "gbm-diffusion": _sde_gbm_diffusion,
}


def make_sde(name: str, **params):
    if name not in SDES:
        raise KeyError(f"unknown SDE preset {name!r}")
    return SDES[name](**params)


# ---------------------------------------------------------------------------
# duality presets: (triplet, F, g, Lambda, k) quintuples

def _lam_reals_with_zero() -> SizeSet:
    return SizeSet.reals(include_zero=True)


def _lam_positive_with_zero() -> SizeSet:
    return SizeSet((Interval(0.5, np.inf),), includes_zero=True)


def duality_preset(name: str, T: float = 1.0) -> dict:
    """A ready-to-run (triplet, F, g, lam, k) combination."""
    if name == "poisson-unit-weight":
        # the Poisson specialization: one atom, singleton Lambda,
        # time-constant weight
        return {
            "triplet": make_triplet("poisson", T=T),
            "F": smooth_functional_1d("tanh", make_kernel("linear-time")),
            "g": make_g("linear"),
            "lam": SizeSet.singleton(1.0),
            "k": make_weight("unit"),
        }
    if name == "poisson-flat":
        # constant g with a time-constant weight: both sides vanish
        # pathwise (orthogonality to constants)
        return {
            "triplet": make_triplet("poisson", T=T),
            "F": smooth_functional_1d("tanh", make_kernel("linear-time")),
            "g": make_g("one"),
            "lam": SizeSet.singleton(1.0),
            "k": make_weight("unit"),
        }
    if name == "two-atom-cosine":
        return {
            "triplet": make_triplet("compound-two-atom", T=T),
            "F": smooth_functional_2d("sin-cos", make_kernel("time-size"),
                                      make_kernel("cos-time")),
            "g": make_g("quadratic"),
            "lam": SizeSet.reals(),
            "k": make_weight("cosine-time", T=T),
        }
    if name == "gaussian-wiener":
        return {
            "triplet": make_triplet("zero", sigma=1.0, T=T),
            "F": smooth_functional_1d("tanh", make_kernel("cos-time", omega=2.0)),
            "g": make_g("exp-decay"),
            "lam": SizeSet.zero_only(),
            "k": make_weight("unit"),
        }
    if name == "mixed-levy":
        return {
            "triplet": make_triplet("compound-two-atom", sigma=0.5, T=T),
            "F": smooth_functional_2d("tanh-sum", make_kernel("linear-time"),
                                      make_kernel("time-size")),
            "g": make_g("linear"),
            "lam": _lam_positive_with_zero(),
            "k": make_weight("parabola-time", T=T),
        }
    if name == "density-exp-weight":
        return {
            "triplet": make_triplet("finite-density", T=T),
            "F": smooth_functional_1d("tanh", make_kernel("time-size")),
            "g": make_g("quadratic"),
            "lam": SizeSet((Interval(0.0, np.inf),)),
            "k": make_weight("exp-size-decay", T=T),
        }
    raise KeyError(f"unknown duality preset {name!r}")


DUALITY_PRESETS = (
    "poisson-unit-weight",
    "poisson-flat",
    "two-atom-cosine",
    "gaussian-wiener",
    "mixed-levy",
    "density-exp-weight",
)


def preset_catalog() -> dict:
    """Everything addressable from a config file."""
    return {
        "measures": sorted(MEASURES),
        "kernels": sorted(KERNELS),
        "weights": sorted(WEIGHTS),
        "g_functions": sorted(G_FUNCTIONS),
        "smooth_1d": sorted(SMOOTH_1D),
        "smooth_2d": sorted(SMOOTH_2D),
        "sdes": sorted(SDES),
        "duality": list(DUALITY_PRESETS),
    }
