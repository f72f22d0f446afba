"""Shadow and cylinder measures on the boundary of the covering tree.

Conventions: the visual boundary carries the conformal density of dimension
delta normalized to a probability measure at the base vertex. The shadow of a
ball of radius 0 around a vertex at distance d >= 1 from the observer has
measure 1 / ((q+1) q^(d-1)); pushing one level deeper along a cusp ray scales
a shadow by q e^{-2 delta} = rho, which is where every tail formula below
comes from.

Cylinder sets of admissible edge paths carry the stationary Markov measure
lambda([e_0 .. e_{n-1}]) = pi(e_0) prod_j p(e_j, e_{j+1}).  This is defined
here for pure-ray and star (point) models, where edge stabilizers are
trivial; matrix-mode blocks would need stabilizer data the model does not
carry, so those raise UnsupportedMode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import chain as _chain
from .errors import EmptySamples, UnsupportedMode
from .model import Prob, QuotientModel, check_delta, rho_value

__all__ = [
    "ball_shadow",
    "excursion_height_tail",
    "conformal_alpha_step",
    "shadow_ratio",
    "CylinderMeasure",
    "cylinder_measure",
    "lambda_cylinder",
    "markov_property_residuals",
    "check_markov_property",
    "random_admissible_path",
]


def ball_shadow(q: int, d: int) -> Fraction:
    """Measure of the shadow cast by a vertex at distance d >= 1: the boundary
    splits into q+1 sectors and each further step divides a sector by q."""
    if q < 2:
        raise ValueError(f"q must be at least 2, got {q}")
    if d < 1:
        raise ValueError(f"d must be at least 1, got {d}")
    return Fraction(1, (q + 1) * q ** (d - 1))


def excursion_height_tail(q: int, delta: float | None, n: int) -> Prob:
    """P(excursion height > n) = rho^n: each extra level survives with the
    shadow ratio rho = q e^{-2 delta}."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    return rho_value(q, delta) ** n


def conformal_alpha_step(alpha: float, q: int, delta: float | None) -> float:
    """One ascent step of the conformal weight along a cusp ray: the q
    congruent children scale by e^{-delta} each."""
    d = check_delta(q, delta)
    return q * alpha * math.exp(-d)


def shadow_ratio(q: int, delta: float | None, n: int) -> Prob:
    """Ratio of the shadow mass that escapes above level n to the whole cusp
    shadow. The geometric series (q-1) sum_{j>=n} rho^j over the same series
    from 0 collapses to rho^n."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    return rho_value(q, delta) ** n


# ---------------------------------------------------------------------------
# cylinder measure


@dataclass(frozen=True)
class CylinderMeasure:
    path: tuple[_chain.ChainState, ...]
    value: Prob
    admissible: bool


def _edge_path(path: Sequence[_chain.ChainState]) -> tuple[_chain.ChainState, ...]:
    if not path:
        raise EmptySamples("cylinder over the empty path is the whole space; pass edges")
    for s in path:
        if not isinstance(s, (_chain.RayUp, _chain.RayDown)):
            raise UnsupportedMode(
                "cylinders are over oriented quotient edges; compact steps are not edges"
            )
    return tuple(path)


def cylinder_measure(
    chain: _chain.ChainSpec,
    dist: _chain.StationaryDistribution,
    path: Sequence[_chain.ChainState],
) -> CylinderMeasure:
    """lambda of one cylinder, given the chain and its stationary law."""
    edges = _edge_path(path)
    value = dist.mass(edges[0])
    for s, t in zip(edges, edges[1:]):
        p = _chain.transition_prob(chain, s, t)
        if p == 0:
            return CylinderMeasure(path=edges, value=chain.zero(), admissible=False)
        value *= p
    return CylinderMeasure(path=edges, value=value, admissible=True)


def _point_chain(model: QuotientModel) -> tuple[_chain.ChainSpec, _chain.StationaryDistribution]:
    if not model.is_point:
        raise UnsupportedMode(
            "lambda is implemented for pure-ray and star models; matrix blocks "
            "would need edge stabilizer data"
        )
    ch = _chain.build_chain(model)
    return ch, _chain.stationary_distribution(ch)


def lambda_cylinder(model: QuotientModel, path: Sequence[_chain.ChainState]) -> CylinderMeasure:
    """Stationary cylinder measure lambda([e_0 .. e_{n-1}]) on a point-mode
    model. Inadmissible paths get measure zero and the admissible=False flag."""
    ch, dist = _point_chain(model)
    return cylinder_measure(ch, dist, path)


def markov_property_residuals(
    chain: _chain.ChainSpec,
    dist: _chain.StationaryDistribution,
    path: Sequence[_chain.ChainState],
) -> tuple[Prob, Prob]:
    """Both one-step consistency identities for a cylinder:

    predecessor side  |sum_e lambda([e] + path) - lambda(path)|
    successor side    |sum_e lambda(path + [e]) - lambda(path)|

    Zero exactly in rational mode; the first is stationarity of pi, the
    second is row stochasticity.
    """
    edges = _edge_path(path)
    base = cylinder_measure(chain, dist, edges).value
    pred = chain.zero()
    for s, _ in _chain.predecessors(chain, edges[0]):
        if isinstance(s, (_chain.RayUp, _chain.RayDown)):
            pred += cylinder_measure(chain, dist, (s,) + edges).value
    succ = chain.zero()
    for t, _ in _chain.successors(chain, edges[-1]):
        succ += cylinder_measure(chain, dist, edges + (t,)).value
    return abs(pred - base), abs(succ - base)


def check_markov_property(
    model: QuotientModel, path: Sequence[_chain.ChainState]
) -> tuple[Prob, Prob]:
    ch, dist = _point_chain(model)
    return markov_property_residuals(ch, dist, path)


def random_admissible_path(
    chain: _chain.ChainSpec, rng, length: int
) -> list[_chain.ChainState]:
    """Random admissible state path for property checks.

    Starts from a uniformly chosen ray edge at level <= 3 and extends by
    picking uniformly among the admissible successors at each step.  rng is
    any object with an ``integers(n)`` method (a numpy Generator works).
    """
    if length < 1:
        raise ValueError(f"length must be at least 1, got {length}")
    pool: list[_chain.ChainState] = []
    for ray in chain.rays:
        for level in (1, 2, 3):
            pool.append(_chain.RayUp(ray, level))
            pool.append(_chain.RayDown(ray, level))
    state = pool[int(rng.integers(len(pool)))]
    path = [state]
    while len(path) < length:
        succ = _chain.successors(chain, state)
        state = succ[int(rng.integers(len(succ)))][0]
        path.append(state)
    return path
