"""Countable-state Markov chain of a quotient model.

States are the oriented edges of the quotient, grouped as

    RayUp(r, i)    ascending edge of ray r from level i-1 to level i
    RayDown(r, i)  descending edge of ray r from level i to level i-1
    Compact(v)     one unit step inside the compact block arriving at v

Transitions: an ascending edge continues up with probability
rho = q e^{-2 delta} and turns around with probability 1 - rho; a descending
edge above level 1 has a single admissible continuation (keep descending);
the base descending edge routes into the next departure, through the compact
block in matrix mode.  Compact trajectory states are labeled by the vertex a
unit step arrives at, so P(Compact(v) -> Compact(v')) = trans(v, v') and
P(Compact(v) -> RayUp(r, 1)) = exit(v, r) with no renormalization, and the
number of Compact states between two excursions is exactly the sojourn length
spent strictly inside the compact block.

All arithmetic follows the model's backend: exact Fractions in the lattice
case delta = log q (with file probabilities kept rational), floats otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

from .errors import (
    InvalidModel,
    NotIrreducible,
    SingularCompactBlock,
    UnknownState,
    UnsupportedMode,
)
from .model import Prob, QuotientModel, validate_model

__all__ = [
    "RayUp",
    "RayDown",
    "Compact",
    "ChainState",
    "state_id",
    "ChainSpec",
    "build_chain",
    "transition_prob",
    "successors",
    "predecessors",
    "StationaryDistribution",
    "stationary_distribution",
    "ReturnDistribution",
    "first_return_distribution",
    "pure_ray_return_mean_tail",
    "n_step_prob",
    "Classification",
    "classify",
    "peak_height_cdf",
    "compact_sojourn",
    "solve_linear",
]


@dataclass(frozen=True)
class RayUp:
    ray: str
    level: int


@dataclass(frozen=True)
class RayDown:
    ray: str
    level: int


@dataclass(frozen=True)
class Compact:
    vertex: str


ChainState = Union[RayUp, RayDown, Compact]


def state_id(s: ChainState) -> str:
    if isinstance(s, RayUp):
        return f"u:{s.ray}:{s.level}"
    if isinstance(s, RayDown):
        return f"d:{s.ray}:{s.level}"
    return f"c:{s.vertex}"


@dataclass(frozen=True)
class ChainSpec:
    """Transition data of the chain: rho, the ray list, and the routing maps
    out of the base descending edges (precomposed with the entry
    distributions in matrix mode)."""

    model: QuotientModel
    rho: Prob
    rays: tuple[str, ...]
    states: tuple[str, ...]  # declared compact states; empty in point mode
    # compact states that actually occur in trajectories: a Compact(v) state is
    # a unit step arriving at v, so v must receive an internal step from some
    # entry-reachable position (entry points reached and immediately left are
    # positions but never trajectory states)
    occupied: tuple[str, ...]
    # base routing: RayDown(r, 1) -> RayUp(r', 1)
    base_to_ray: Mapping[tuple[str, str], Prob]
    # base routing into the block: RayDown(r, 1) -> Compact(v)
    base_to_compact: Mapping[tuple[str, str], Prob]
    trans: Mapping[tuple[str, str], Prob]
    exits: Mapping[tuple[str, str], Prob]
    entries: Mapping[tuple[str, str], Prob]

    @property
    def is_exact(self) -> bool:
        return isinstance(self.rho, Fraction)

    def one(self) -> Prob:
        return Fraction(1) if self.is_exact else 1.0

    def zero(self) -> Prob:
        return Fraction(0) if self.is_exact else 0.0


def build_chain(model: QuotientModel) -> ChainSpec:
    """Assemble the chain of a validated model."""
    violations = validate_model(model)
    if violations:
        raise InvalidModel(violations)
    rho = model.rho
    exact = isinstance(rho, Fraction)

    def num(p: Prob) -> Prob:
        if exact:
            return p if isinstance(p, Fraction) else Fraction(p)
        return float(p)

    rays = model.ray_ids
    if model.is_point:
        w = {r: num(p) for r, p in model.point_weights().items()}
        base_to_ray = {(r, r2): w[r2] for r in rays for r2 in rays if w[r2] != 0}
        return ChainSpec(
            model=model,
            rho=rho,
            rays=rays,
            states=(),
            occupied=(),
            base_to_ray=base_to_ray,
            base_to_compact={},
            trans={},
            exits={},
            entries={},
        )

    c = model.compact
    trans = {k: num(p) for k, p in c.trans.items() if p != 0}
    exits = {k: num(p) for k, p in c.exits.items() if p != 0}
    entries = {k: num(p) for k, p in c.entries.items() if p != 0}
    base_to_ray: dict[tuple[str, str], Prob] = {}
    base_to_compact: dict[tuple[str, str], Prob] = {}
    for r in rays:
        for v, pe in ((v, p) for (ray, v), p in entries.items() if ray == r):
            for r2 in rays:
                p = exits.get((v, r2))
                if p:
                    key = (r, r2)
                    base_to_ray[key] = base_to_ray.get(key, num(0)) + pe * p
            for v2 in c.states:
                p = trans.get((v, v2))
                if p:
                    key = (r, v2)
                    base_to_compact[key] = base_to_compact.get(key, num(0)) + pe * p
    positions = {v for (_, v) in entries}
    frontier = list(positions)
    while frontier:
        u = frontier.pop()
        for (v1, v2) in trans:
            if v1 == u and v2 not in positions:
                positions.add(v2)
                frontier.append(v2)
    occupied = tuple(
        v for v in c.states if any((u, v) in trans for u in positions)
    )
    return ChainSpec(
        model=model,
        rho=rho,
        rays=rays,
        states=c.states,
        occupied=occupied,
        base_to_ray=base_to_ray,
        base_to_compact=base_to_compact,
        trans=trans,
        exits=exits,
        entries=entries,
    )


def successors(chain: ChainSpec, s: ChainState) -> list[tuple[ChainState, Prob]]:
    """All states reachable in one step with their probabilities. Rows sum
    to one."""
    rho = chain.rho
    one = chain.one()
    if isinstance(s, RayUp):
        return [(RayUp(s.ray, s.level + 1), rho), (RayDown(s.ray, s.level), one - rho)]
    if isinstance(s, RayDown):
        if s.level >= 2:
            return [(RayDown(s.ray, s.level - 1), one)]
        out: list[tuple[ChainState, Prob]] = []
        for (r, r2), p in chain.base_to_ray.items():
            if r == s.ray:
                out.append((RayUp(r2, 1), p))
        for (r, v), p in chain.base_to_compact.items():
            if r == s.ray:
                out.append((Compact(v), p))
        return sorted(out, key=lambda t: state_id(t[0]))
    if isinstance(s, Compact):
        out = []
        for (v, v2), p in chain.trans.items():
            if v == s.vertex:
                out.append((Compact(v2), p))
        for (v, r), p in chain.exits.items():
            if v == s.vertex:
                out.append((RayUp(r, 1), p))
        return sorted(out, key=lambda t: state_id(t[0]))
    raise UnknownState(f"not a chain state: {s!r}")


def transition_prob(chain: ChainSpec, s: ChainState, t: ChainState) -> Prob:
    for u, p in successors(chain, s):
        if u == t:
            return p
    return chain.zero()


def predecessors(chain: ChainSpec, t: ChainState) -> list[tuple[ChainState, Prob]]:
    """All states with a positive one-step probability into t."""
    rho = chain.rho
    one = chain.one()
    out: list[tuple[ChainState, Prob]] = []
    occupied = set(chain.occupied)
    if isinstance(t, RayUp):
        if t.level >= 2:
            out.append((RayUp(t.ray, t.level - 1), rho))
        else:
            for (r, r2), p in chain.base_to_ray.items():
                if r2 == t.ray:
                    out.append((RayDown(r, 1), p))
            for (v, r), p in chain.exits.items():
                # exits taken straight from an entry position are part of
                # base_to_ray; only occupied states are trajectory sources
                if r == t.ray and v in occupied:
                    out.append((Compact(v), p))
    elif isinstance(t, RayDown):
        out.append((RayUp(t.ray, t.level), one - rho))
        out.append((RayDown(t.ray, t.level + 1), one))
    elif isinstance(t, Compact):
        for (v, v2), p in chain.trans.items():
            if v2 == t.vertex and v in occupied:
                out.append((Compact(v), p))
        for (r, v), p in chain.base_to_compact.items():
            if v == t.vertex:
                out.append((RayDown(r, 1), p))
    else:
        raise UnknownState(f"not a chain state: {t!r}")
    return sorted(out, key=lambda x: state_id(x[0]))


# ---------------------------------------------------------------------------
# linear algebra helper, generic over Fraction and float


def solve_linear(a: list[list[Prob]], b: list[Prob]) -> list[Prob]:
    """Solve a x = b by Gaussian elimination with partial pivoting.

    Works elementwise on whatever number type the inputs carry, so rational
    systems are solved exactly. Raises SingularCompactBlock when no usable
    pivot exists.
    """
    n = len(a)
    m = [list(row) + [bi] for row, bi in zip(a, b)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        if m[piv][col] == 0:
            raise SingularCompactBlock("singular linear system")
        m[col], m[piv] = m[piv], m[col]
        inv = m[col][col]
        for r in range(n):
            if r == col:
                continue
            factor = m[r][col] / inv
            if factor == 0:
                continue
            m[r] = [x - factor * y for x, y in zip(m[r], m[col])]
    return [m[i][n] / m[i][i] for i in range(n)]


# ---------------------------------------------------------------------------
# stationary distribution


@dataclass(frozen=True)
class StationaryDistribution:
    """pi on the full countable state space.

    The finite data is the mass of each compact state and of each base pair;
    within ray r the masses are the exact geometric family
    pi(RayUp(r, i)) = pi(RayDown(r, i)) = base_mass[r] * rho^(i-1), so no tail
    is ever truncated.
    """

    chain: ChainSpec
    compact_mass: Mapping[str, Prob]
    base_mass: Mapping[str, Prob]
    residual: Prob

    def mass(self, s: ChainState) -> Prob:
        if isinstance(s, (RayUp, RayDown)):
            return self.base_mass[s.ray] * self.chain.rho ** (s.level - 1)
        if isinstance(s, Compact):
            return self.compact_mass[s.vertex]
        raise UnknownState(f"not a chain state: {s!r}")

    def total_mass(self) -> Prob:
        # each ray carries 2 * base / (1 - rho); the split identity
        # pi(d_i) = pi(u_i) is verified against the balance equations in tests
        rho = self.chain.rho
        tails = sum((2 * m) / (1 - rho) for m in self.base_mass.values())
        return sum(self.compact_mass.values(), start=self.chain.zero()) + tails


def _finite_states(chain: ChainSpec) -> list[ChainState]:
    out: list[ChainState] = [Compact(v) for v in chain.occupied]
    for r in chain.rays:
        out.append(RayUp(r, 1))
        out.append(RayDown(r, 1))
    return out


def _residual(chain: ChainSpec, dist: StationaryDistribution) -> Prob:
    targets: list[ChainState] = list(_finite_states(chain))
    for r in chain.rays:
        for i in (2, 3, 4):
            targets.append(RayUp(r, i))
            targets.append(RayDown(r, i))
    worst = chain.zero()
    for t in targets:
        inflow = chain.zero()
        for s, p in predecessors(chain, t):
            inflow += dist.mass(s) * p
        gap = abs(inflow - dist.mass(t))
        if gap > worst:
            worst = gap
    return worst


def stationary_distribution(chain: ChainSpec) -> StationaryDistribution:
    """Solve for pi exactly.

    Within a ray, stationarity forces pi(u_{i+1}) = rho pi(u_i) and admits
    pi(d_i) = pi(u_i), so only the compact masses and the per-ray base masses
    are unknown. Those satisfy a finite linear system; one balance equation is
    replaced by total mass 1, where each ray contributes
    2 base / (1 - rho) = sum_i 2 base rho^(i-1).
    """
    cls = classify(chain, with_mean_return=False)
    if not cls.irreducible:
        raise NotIrreducible("chain is not irreducible; no unique stationary law")
    rho = chain.rho
    one = chain.one()
    states = list(chain.occupied)
    rays = list(chain.rays)
    idx = {("c", v): i for i, v in enumerate(states)}
    idx.update({("u", r): len(states) + j for j, r in enumerate(rays)})
    n = len(states) + len(rays)
    a: list[list[Prob]] = [[chain.zero() for _ in range(n)] for _ in range(n)]
    b: list[Prob] = [chain.zero() for _ in range(n)]

    # balance at compact states: pi(v') = sum_v pi(v) trans(v, v')
    #                                   + sum_r pi(d_1^r) P(d_1^r -> v')
    occupied = set(states)
    for v2 in states:
        row = a[idx["c", v2]]
        row[idx["c", v2]] -= one
        for (v, vv), p in chain.trans.items():
            if vv == v2 and v in occupied:
                row[idx["c", v]] += p
        for (r, vv), p in chain.base_to_compact.items():
            if vv == v2:
                row[idx["u", r]] += p  # pi(d_1) = pi(u_1)
    # balance at base ascending edges
    for r2 in rays:
        row = a[idx["u", r2]]
        row[idx["u", r2]] -= one
        for (v, r), p in chain.exits.items():
            if r == r2 and v in occupied:
                row[idx["c", v]] += p
        for (r, rr), p in chain.base_to_ray.items():
            if rr == r2:
                row[idx["u", r]] += p
    # replace the last balance row by total mass = 1
    mass_row = [one for _ in states] + [(2 * one) / (one - rho) for _ in rays]
    a[n - 1] = mass_row
    b[n - 1] = one

    try:
        x = solve_linear(a, b)
    except SingularCompactBlock:
        raise SingularCompactBlock(
            "stationary solve is singular; the compact block does not mix with the rays"
        ) from None
    compact_mass = {v: x[idx["c", v]] for v in states}
    base_mass = {r: x[idx["u", r]] for r in rays}
    dist = StationaryDistribution(
        chain=chain, compact_mass=compact_mass, base_mass=base_mass, residual=chain.zero()
    )
    res = _residual(chain, dist)
    return StationaryDistribution(
        chain=chain, compact_mass=compact_mass, base_mass=base_mass, residual=res
    )


# ---------------------------------------------------------------------------
# first-return and n-step distributions (exact taboo dynamic programs)


@dataclass(frozen=True)
class ReturnDistribution:
    state: ChainState
    n_max: int
    probs: tuple[Prob, ...]  # probs[n-1] = P(first return at step n)
    tail_bound: Prob  # upper bound for sum_{n > n_max} f^(n)

    def partial_mass(self) -> Prob:
        return sum(self.probs)

    def partial_mean(self) -> Prob:
        return sum(n * p for n, p in enumerate(self.probs, start=1))


def first_return_distribution(
    chain: ChainSpec, s: ChainState, n_max: int
) -> ReturnDistribution:
    """f^(n)(s) for n <= n_max by forward propagation with s as taboo.

    A trajectory from a base-level state that climbs to ray level L needs at
    least 2(L-1) steps to come back, so levels above n_max // 2 + 2 cannot
    contribute and the truncation below is exact, not approximate.
    """
    cap = n_max // 2 + 2
    zero = chain.zero()
    probs: list[Prob] = []
    dist: dict[ChainState, Prob] = {s: chain.one()}
    for _ in range(n_max):
        nxt: dict[ChainState, Prob] = {}
        hit = zero
        for u, mass in dist.items():
            for t, p in successors(chain, u):
                if isinstance(t, (RayUp, RayDown)) and t.level > cap:
                    continue
                w = mass * p
                if t == s:
                    hit += w
                else:
                    nxt[t] = nxt.get(t, zero) + w
        probs.append(hit)
        dist = nxt
    partial = sum(probs)
    # exact remainder for a recurrent chain; an upper bound in general
    tail = chain.one() - partial
    return ReturnDistribution(state=s, n_max=n_max, probs=tuple(probs), tail_bound=tail)


def pure_ray_return_mean_tail(chain: ChainSpec, n_max: int) -> Prob:
    """Analytic bound for sum_{n > n_max} n f^(n)(u_1) on the one-ray model.

    There the return time is twice a geometric excursion height,
    f^(2k) = (1 - rho) rho^(k-1), and the remainder past n_max = 2m is
    2 rho^m (m + 1 - m rho) / (1 - rho).
    """
    if len(chain.rays) != 1 or chain.states or not chain.model.is_point:
        raise UnsupportedMode("analytic return tail implemented for the one-ray model")
    rho = chain.rho
    m = n_max // 2
    return 2 * rho**m * (m + 1 - m * rho) / (1 - rho)


def n_step_prob(chain: ChainSpec, s: ChainState, t: ChainState, n: int) -> Prob:
    """p^(n)(s, t) by exact forward propagation."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    dist: dict[ChainState, Prob] = {s: chain.one()}
    zero = chain.zero()
    for _ in range(n):
        nxt: dict[ChainState, Prob] = {}
        for u, mass in dist.items():
            for v, p in successors(chain, u):
                nxt[v] = nxt.get(v, zero) + mass * p
        dist = nxt
    return dist.get(t, zero)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Classification:
    irreducible: bool
    period: int | None
    positive_recurrent: bool | None
    mean_return: Mapping[str, Prob]


def _truncated_digraph(chain: ChainSpec) -> dict[ChainState, list[ChainState]]:
    """Support digraph on compact states and ray levels 1..2.

    Any cycle of the full chain can be deformed into this window: replacing an
    excursion of height a by height 1 shortens it by 2(a - 1), and both the
    height-1 and height-2 variants are in the window, so the gcd of cycle
    lengths (the period) and the strong connectivity verdict are unchanged.
    """
    nodes: list[ChainState] = [Compact(v) for v in chain.occupied]
    for r in chain.rays:
        nodes += [RayUp(r, 1), RayUp(r, 2), RayDown(r, 1), RayDown(r, 2)]
    node_set = set(nodes)
    return {
        u: [v for v, _ in successors(chain, u) if v in node_set] for u in nodes
    }


def _strongly_connected(adj: dict[ChainState, list[ChainState]]) -> bool:
    nodes = list(adj)
    if not nodes:
        return False

    def reach(start: ChainState, edges) -> set[ChainState]:
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in edges[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    radj: dict[ChainState, list[ChainState]] = {u: [] for u in nodes}
    for u, vs in adj.items():
        for v in vs:
            radj[v].append(u)
    return len(reach(nodes[0], adj)) == len(nodes) and len(reach(nodes[0], radj)) == len(nodes)


def _graph_period(adj: dict[ChainState, list[ChainState]]) -> int:
    # gcd of (depth[u] + 1 - depth[v]) over edges of a strongly connected graph
    start = next(iter(adj))
    depth = {start: 0}
    order = [start]
    while order:
        u = order.pop(0)
        for v in adj[u]:
            if v not in depth:
                depth[v] = depth[u] + 1
                order.append(v)
    g = 0
    for u, vs in adj.items():
        for v in vs:
            g = math.gcd(g, depth[u] + 1 - depth[v])
    return abs(g)


def compact_sojourn(chain: ChainSpec) -> tuple[dict[str, Prob], dict[tuple[str, str], Prob]]:
    """Expected sojourn steps strictly inside the compact block after each
    ray's excursions, and the embedded ray-to-ray cycle chain.

    Matrix mode: with Q the internal block and E the entry rows, the expected
    number of compact states visited is E (I - Q)^{-1} 1, which counts the
    state exited from as a visit; subtracting that final visit leaves the
    number of unit steps taken strictly inside the block. The cycle chain is
    E (I - Q)^{-1} R with R the exit block. Point mode: no interior steps and
    the cycle chain is the point routing.
    """
    rays = list(chain.rays)
    if not chain.states:
        s = {r: chain.zero() for r in rays}
        cyc = {k: p for k, p in chain.base_to_ray.items()}
        return s, cyc
    states = list(chain.states)
    n = len(states)
    si = {v: i for i, v in enumerate(states)}
    one, zero = chain.one(), chain.zero()
    iq = [[(one if i == j else zero) for j in range(n)] for i in range(n)]
    for (v, v2), p in chain.trans.items():
        iq[si[v]][si[v2]] -= p
    # visits[i] = expected compact states visited starting from state i
    try:
        visits = solve_linear([row[:] for row in iq], [one] * n)
    except SingularCompactBlock:
        raise SingularCompactBlock(
            "(I - Q) is singular: some compact sojourn never exits to a ray"
        ) from None
    sojourn: dict[str, Prob] = {}
    for r in rays:
        ev = sum(p * visits[si[v]] for (ray, v), p in chain.entries.items() if ray == r)
        sojourn[r] = ev - one  # steps = visits - the visit exited from
    # absorption probabilities: from state i, chance the eventual exit is ray r2
    cycle: dict[tuple[str, str], Prob] = {}
    for r2 in rays:
        rhs = [zero] * n
        for (v, r), p in chain.exits.items():
            if r == r2:
                rhs[si[v]] += p
        absorb = solve_linear([row[:] for row in iq], rhs)
        for r in rays:
            p = sum(pe * absorb[si[v]] for (ray, v), pe in chain.entries.items() if ray == r)
            if p != 0:
                cycle[(r, r2)] = p
    return sojourn, cycle


def classify(chain: ChainSpec, with_mean_return: bool = True) -> Classification:
    """Irreducibility, period, positive recurrence and Kac mean return times.

    Positive recurrence follows from rho < 1 (geometric excursion tails) plus
    a finite mean compact sojourn, which requires (I - Q) to be invertible;
    both are checked, not assumed. Mean return times are Kac's 1/pi(s) for the
    finite-block states. The pure-ray chain has period 2 (each excursion cycle
    has even length), so long-run frequencies are Cesaro limits there.
    """
    adj = _truncated_digraph(chain)
    irreducible = _strongly_connected(adj)
    if not irreducible:
        return Classification(False, None, None, {})
    period = _graph_period(adj)
    try:
        compact_sojourn(chain)
        positive = True
    except SingularCompactBlock:
        positive = False
    mean_return: dict[str, Prob] = {}
    if with_mean_return and positive:
        dist = stationary_distribution(chain)
        for s in _finite_states(chain):
            mean_return[state_id(s)] = 1 / dist.mass(s)
    return Classification(
        irreducible=True,
        period=period,
        positive_recurrent=positive,
        mean_return=mean_return,
    )


# ---------------------------------------------------------------------------
# excursion peak law via the chain itself


def peak_height_cdf(chain: ChainSpec, ray: str, n: int) -> Prob:
    """P(an excursion on `ray` has height <= n), from the transition data
    alone: condition on the level the ascent turns at.

    Backward recursion h_i = P(u_i -> d_i) + P(u_i -> u_{i+1}) h_{i+1} with
    h_n = P(u_n -> d_n); the start is h_1.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return chain.zero()
    h = transition_prob(chain, RayUp(ray, n), RayDown(ray, n))
    for i in range(n - 1, 0, -1):
        h = transition_prob(chain, RayUp(ray, i), RayDown(ray, i)) + transition_prob(
            chain, RayUp(ray, i), RayUp(ray, i + 1)
        ) * h
    return h
