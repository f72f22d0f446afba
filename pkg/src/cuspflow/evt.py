"""Extreme-value laws for the maximal excursion height.

Exact finite-sample law: the max of k independent heights has CDF
(1 - rho^n)^k (the Galambos-type product), re-derived here by a taboo DP over
the chain as an independent check.  Limiting law: with the number of
excursions calibrated to a time budget T through t_of_n / n_of_t, the centered
max converges to the double-exponential exp(-rho^y).

Two sign conventions circulate for the N(T) denominator; only
2 e^{2 delta} + C (e^{2 delta} - q) inverts t_of_n, and n_of_t_variant exposes
the sign-flipped version so reports can demonstrate empirically that the "+"
calibration is the one matching simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import chain as _chain
from .errors import EmptySamples, UnsupportedMode
from .excursion import c_gamma_exact, cycle_law
from .model import Prob, QuotientModel, check_delta, rho_value

__all__ = [
    "LimitParams",
    "EvtRow",
    "EvtReport",
    "galambos_cdf",
    "max_height_exact",
    "limit_cdf",
    "t_of_n",
    "n_of_t",
    "n_of_t_variant",
    "center_level",
    "empirical_cdf_compare",
]


@dataclass(frozen=True)
class LimitParams:
    """q, delta and the compact-sojourn constant entering the calibration."""

    q: int
    delta: float | None
    c_gamma: Prob = 0

    def __post_init__(self) -> None:
        check_delta(self.q, self.delta)
        if self.c_gamma < 0:
            raise ValueError(f"c_gamma must be nonnegative, got {self.c_gamma}")

    @property
    def rho(self) -> Prob:
        return rho_value(self.q, self.delta)

    @classmethod
    def from_model(cls, model: QuotientModel) -> "LimitParams":
        return cls(q=model.q, delta=model.delta, c_gamma=c_gamma_exact(model))


def galambos_cdf(q: int, delta: float | None, n: int, k: int) -> Prob:
    """P(max of k independent excursion heights <= n) = (1 - rho^n)^k.

    Exact Fraction in the lattice case, float otherwise. k = 0 gives 1 (empty
    max), n = 0 gives 0 for k >= 1 (heights are >= 1).
    """
    if n < 0:
        raise ValueError(f"threshold must be nonnegative, got {n}")
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    rho = rho_value(q, delta)
    return (1 - rho**n) ** k


def max_height_exact(model: QuotientModel, k: int, n: int) -> Prob:
    """P(max height of the first k excursions <= n), by forward propagation
    over the chain with levels above n as taboo.

    Independent of galambos_cdf: no independence of excursion heights is
    assumed, the event is integrated step by step.  k excursions of height
    <= n take at most 2 n k steps, so the propagation below is exact.  Compact
    blocks can stall for unboundedly many steps, hence point mode only.
    """
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    if n < 0:
        raise ValueError(f"threshold must be nonnegative, got {n}")
    ch = _chain.build_chain(model)
    if not model.is_point:
        raise UnsupportedMode(
            "exact max-height DP needs a step bound; compact sojourns in "
            "matrix mode are unbounded"
        )
    if k == 0:
        return ch.one()
    if n == 0:
        return ch.zero()
    zero = ch.zero()
    nu = cycle_law(ch)
    # mass over (state, completed excursions), starting on a stationarily
    # drawn ray; mass that would climb past level n leaves the event
    dist: dict[tuple[_chain.ChainState, int], Prob] = {
        (_chain.RayUp(r, 1), 0): p for r, p in nu.items() if p != 0
    }
    done = zero
    for _ in range(2 * n * k):
        if not dist:
            break
        nxt: dict[tuple[_chain.ChainState, int], Prob] = {}
        for (s, c), mass in dist.items():
            for t, p in _chain.successors(ch, s):
                if isinstance(t, _chain.RayUp) and t.level > n:
                    continue
                c2 = c + 1 if isinstance(t, _chain.RayDown) and t.level == 1 else c
                w = mass * p
                if c2 == k:
                    done += w
                else:
                    key = (t, c2)
                    nxt[key] = nxt.get(key, zero) + w
        dist = nxt
    return done


def limit_cdf(q: int, delta: float | None, y: float) -> float:
    """The double-exponential limit exp(-rho^y) of the centered max height;
    exp(-q^{-y}) in the lattice case."""
    d = check_delta(q, delta)
    rho = q * math.exp(-2.0 * d)
    return math.exp(-math.exp(y * math.log(rho)))


def _expanded(params: LimitParams) -> tuple[float, float]:
    """(e^{2 delta}, e^{2 delta} - q); the gap is positive by the delta check."""
    d = check_delta(params.q, params.delta)
    e2d = math.exp(2.0 * d)
    return e2d, e2d - params.q


def t_of_n(params: LimitParams, n: float) -> Prob:
    """Time budget whose excursion count centers the max at level n:
    T = (2 / (1 - rho) + C) rho^{-n}.  Exact for integer n in rational mode."""
    rho = params.rho
    pref = 2 / (1 - rho) + params.c_gamma
    if isinstance(n, int) and isinstance(rho, Fraction) and isinstance(pref, Fraction):
        return pref * rho ** (-n)
    return float(pref) * float(rho) ** (-float(n))


def n_of_t_variant(params: LimitParams, t: float, additive: bool = True) -> float:
    """Centering level for a time budget under either denominator sign.

    additive=True is the exact inverse of t_of_n,
    N = log_{1/rho}( T (e^{2d} - q) / (2 e^{2d} + C (e^{2d} - q)) );
    additive=False flips the C term's sign, which does not invert t_of_n and
    exists so the mismatch can be exhibited on simulated data.
    """
    if t <= 0:
        raise ValueError(f"time budget must be positive, got {t}")
    e2d, gap = _expanded(params)
    c = float(params.c_gamma)
    den = 2.0 * e2d + c * gap if additive else 2.0 * e2d - c * gap
    if den <= 0:
        raise ValueError("variant denominator is not positive for these parameters")
    return math.log(t * gap / den) / math.log(e2d / params.q)


def n_of_t(params: LimitParams, t: float) -> float:
    """Exact inverse of t_of_n: the level at which a budget-T run centers."""
    return n_of_t_variant(params, t, additive=True)


def center_level(n: float) -> int:
    """Integer threshold floor(n), nudged so that calibrations landing exactly
    on an integer (up to float noise in the logs) are not rounded down."""
    return math.floor(n + 1e-9)


@dataclass(frozen=True)
class EvtRow:
    y: float
    empirical: float
    theoretical: float
    abs_err: float


@dataclass(frozen=True)
class EvtReport:
    rows: tuple[EvtRow, ...]
    ks_distance: float
    params: LimitParams
    n_samples: int


def empirical_cdf_compare(
    samples: Sequence[int],
    params: LimitParams,
    n: float,
    ys: Sequence[float],
    theoretical: str = "limit",
    k: int | None = None,
) -> EvtReport:
    """Empirical CDF of max heights at thresholds floor(n + y) against a
    theoretical curve.

    theoretical="limit" compares with exp(-rho^y) at the real offset y;
    "galambos" compares with the exact finite-k law evaluated at the floored
    integer threshold (k required).  Heights are integers, so the empirical
    side is necessarily floored; the KS distance is the max row gap.
    """
    arr = np.asarray(samples)
    if arr.size == 0:
        raise EmptySamples("no height samples to compare")
    if theoretical not in ("limit", "galambos"):
        raise ValueError(f"unknown theoretical curve {theoretical!r}")
    if theoretical == "galambos" and k is None:
        raise ValueError("the finite-k comparison needs k")
    rows = []
    for y in sorted(float(v) for v in ys):
        thr = center_level(n + y)
        emp = float(np.count_nonzero(arr <= thr)) / arr.size
        if theoretical == "limit":
            theo = limit_cdf(params.q, params.delta, y)
        else:
            theo = float(galambos_cdf(params.q, params.delta, thr, k)) if thr >= 1 else 0.0
        rows.append(EvtRow(y=y, empirical=emp, theoretical=theo, abs_err=abs(emp - theo)))
    ks = max(r.abs_err for r in rows)
    return EvtReport(rows=tuple(rows), ks_distance=ks, params=params, n_samples=int(arr.size))
