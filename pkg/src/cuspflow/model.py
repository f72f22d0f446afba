"""Edge-indexed quotient models of (q+1)-regular trees.

A model is a finite description of a quotient graph: a compact block plus a
finite set of cusp rays.  Along a ray the edge indices alternate so that every
interior vertex has one ascending direction of index 1 and one descending
direction of index q; the universal cover is then the (q+1)-regular tree.  The
compact block is either a single vertex shared by all rays ("point" mode) or a
user-specified finite Markov block on named states ("matrix" mode).

Probabilities read from model files are kept exact as `fractions.Fraction`.
When no `delta` directive is given the critical exponent defaults to log q,
which makes rho = q e^{-2 delta} the exact rational 1/q; downstream modules
then compute in exact arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

from .errors import (
    DeltaTooSmall,
    DuplicateRay,
    ModelSyntaxError,
    UnknownEdge,
    UnknownState,
    UnknownVertex,
)

Prob = Union[Fraction, float]

__all__ = [
    "Prob",
    "OrientedEdge",
    "EdgeIndexedGraph",
    "RaySpec",
    "CompactSpec",
    "QuotientModel",
    "Violation",
    "check_delta",
    "rho_value",
    "parse_model",
    "serialize_model",
    "validate_model",
    "ray_graph",
    "model_graph",
    "admissible_successors",
    "structural_violations",
    "nagao_ray_violations",
]


def check_delta(q: int, delta: float | None) -> float:
    """Return the working value of delta, raising DeltaTooSmall at or below
    the convergence threshold (1/2) log q."""
    if q < 2:
        raise ValueError(f"q must be at least 2, got {q}")
    if delta is None:
        return math.log(q)
    if delta <= 0.5 * math.log(q):
        raise DeltaTooSmall(
            f"delta={delta} must exceed (1/2) log q = {0.5 * math.log(q):.6f}"
        )
    return float(delta)


def rho_value(q: int, delta: float | None) -> Prob:
    """rho = q e^{-2 delta}, the per-level continuation probability.

    Exact Fraction(1, q) in the lattice case delta = log q, float otherwise.
    """
    d = check_delta(q, delta)
    if delta is None or d == math.log(q):
        return Fraction(1, q)
    return q * math.exp(-2.0 * d)


# ---------------------------------------------------------------------------
# graph layer


@dataclass(frozen=True)
class OrientedEdge:
    label: str
    origin: str
    terminus: str


@dataclass(frozen=True)
class EdgeIndexedGraph:
    """Finite oriented graph with a reversal involution and positive indices.

    The index of an oriented edge e counts the lifts of e at any fixed lift of
    its origin vertex in the covering tree, so the covering tree is
    sum-of-indices regular at each vertex fiber.
    """

    vertices: frozenset[str]
    edges: Mapping[str, OrientedEdge]
    reverse: Mapping[str, str]
    index: Mapping[str, int]

    def edge(self, label: str) -> OrientedEdge:
        try:
            return self.edges[label]
        except KeyError:
            raise UnknownEdge(f"no oriented edge labeled {label!r}") from None

    def reverse_edge(self, label: str) -> OrientedEdge:
        return self.edge(self.reverse[label])

    def edges_from(self, vertex: str) -> list[str]:
        if vertex not in self.vertices:
            raise UnknownVertex(f"no vertex named {vertex!r}")
        return sorted(lab for lab, e in self.edges.items() if e.origin == vertex)


@dataclass(frozen=True)
class Violation:
    rule: str
    where: str
    detail: str


def structural_violations(graph: EdgeIndexedGraph) -> list[Violation]:
    """Check reversal pairing and index positivity of an edge-indexed graph."""
    out: list[Violation] = []
    for lab, e in graph.edges.items():
        if e.origin not in graph.vertices or e.terminus not in graph.vertices:
            out.append(Violation("unknown_vertex", lab, "edge endpoint not a vertex"))
        rev = graph.reverse.get(lab)
        if rev is None or rev not in graph.edges:
            out.append(Violation("reverse_pairing", lab, "missing reverse edge"))
            continue
        r = graph.edges[rev]
        if graph.reverse.get(rev) != lab or r.origin != e.terminus or r.terminus != e.origin:
            out.append(Violation("reverse_pairing", lab, "reversal is not an involution"))
        if graph.index.get(lab, 0) < 1:
            out.append(Violation("index_range", lab, "edge index must be a positive integer"))
    return out


def nagao_ray_violations(
    graph: EdgeIndexedGraph, q: int, vertex_path: Sequence[str]
) -> list[Violation]:
    """Check the alternating index pattern along a ray truncation.

    vertex_path lists the ray vertices from the attach point outward.  Interior
    ascending edges must have index 1 and every descending edge index q; the
    base ascending edge is unconstrained here (it belongs to the compact side).
    """
    out: list[Violation] = []
    by_pair = {(e.origin, e.terminus): lab for lab, e in graph.edges.items()}
    for j in range(len(vertex_path) - 1):
        lo, hi = vertex_path[j], vertex_path[j + 1]
        up = by_pair.get((lo, hi))
        down = by_pair.get((hi, lo))
        if up is None or down is None:
            out.append(Violation("nagao_index", f"{lo}-{hi}", "missing ray edge"))
            continue
        if j >= 1 and graph.index[up] != 1:
            out.append(
                Violation("nagao_index", up, f"interior up-edge has index {graph.index[up]}, expected 1")
            )
        if graph.index[down] != q:
            out.append(
                Violation("nagao_index", down, f"down-edge has index {graph.index[down]}, expected {q}")
            )
    return out


# ---------------------------------------------------------------------------
# model layer


@dataclass(frozen=True)
class RaySpec:
    """One cusp ray. up_index/down_index override the interior indices and
    exist so that malformed rays can be represented and then reported by
    validate_model; parsed models always carry the defaults."""

    ray_id: str
    attach: str
    up_index: int = 1
    down_index: int | None = None  # None means q


@dataclass(frozen=True)
class CompactSpec:
    """Compact block. kind is "point" or "matrix".

    In matrix mode the block is a vertex-level Markov description: `trans`
    maps (state, state) to internal one-step probabilities, `exits` maps
    (state, ray) to departure probabilities and `entries` maps (ray, state)
    to the distribution of the state reached when an excursion ends.  In
    point mode only `exits` may be populated, keyed by (attach_vertex, ray),
    overriding the uniform routing between rays.
    """

    kind: str = "point"
    states: tuple[str, ...] = ()
    trans: Mapping[tuple[str, str], Prob] = field(default_factory=dict)
    exits: Mapping[tuple[str, str], Prob] = field(default_factory=dict)
    entries: Mapping[tuple[str, str], Prob] = field(default_factory=dict)


@dataclass(frozen=True)
class QuotientModel:
    q: int
    delta: float | None  # None selects the lattice value log q
    rays: tuple[RaySpec, ...]
    compact: CompactSpec = field(default_factory=CompactSpec)

    @property
    def is_lattice(self) -> bool:
        return self.delta is None or self.delta == math.log(self.q)

    @property
    def delta_value(self) -> float:
        return math.log(self.q) if self.delta is None else float(self.delta)

    @property
    def rho(self) -> Prob:
        if self.is_lattice:
            return Fraction(1, self.q)
        return rho_value(self.q, self.delta)

    @property
    def ray_ids(self) -> tuple[str, ...]:
        return tuple(r.ray_id for r in self.rays)

    def ray(self, ray_id: str) -> RaySpec:
        for r in self.rays:
            if r.ray_id == ray_id:
                return r
        raise UnknownVertex(f"no ray named {ray_id!r}")

    @property
    def is_point(self) -> bool:
        return self.compact.kind == "point"

    def point_weights(self) -> dict[str, Prob]:
        """Routing distribution over rays at the point vertex: explicit exit
        lines if present, otherwise uniform."""
        if not self.is_point:
            raise ValueError("point_weights is only defined in point mode")
        if self.compact.exits:
            return {ray: p for (_, ray), p in sorted(self.compact.exits.items())}
        k = len(self.rays)
        return {r.ray_id: Fraction(1, k) for r in self.rays}


# ---------------------------------------------------------------------------
# parsing and serialization

_DIRECTIVES = ("q", "delta", "ray", "compact", "state", "trans", "exit", "entry")


def _parse_prob(tok: str, line: int) -> Fraction:
    try:
        p = Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ModelSyntaxError(line, f"malformed probability {tok!r}") from None
    if not 0 <= p <= 1:
        raise ModelSyntaxError(line, f"probability {tok} outside [0, 1]")
    return p


def parse_model(text: str) -> QuotientModel:
    """Parse the model-file grammar.

    Directives, one per line, with '#' starting a comment:

        q <int>                      required, q >= 2
        delta <float>                optional, default log q
        ray <ID> attach <VERTEX>     one per ray, at least one
        compact point|matrix         optional, default point
        state <VERTEX>               matrix mode
        trans <V1> <V2> <prob>       matrix mode, internal step
        exit <V> <RAY> <prob>        matrix (or point, V = attach vertex)
        entry <RAY> <V> <prob>       matrix mode

    Probabilities accept decimal or p/q literals and are kept exact.
    """
    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        rows.append((lineno, stripped.split()))

    q: int | None = None
    delta: float | None = None
    compact_kind: str | None = None
    rays: list[RaySpec] = []
    states: list[str] = []
    trans_rows: list[tuple[int, str, str, Fraction]] = []
    exit_rows: list[tuple[int, str, str, Fraction]] = []
    entry_rows: list[tuple[int, str, str, Fraction]] = []

    # first pass: declarations
    for lineno, toks in rows:
        head = toks[0]
        if head not in _DIRECTIVES:
            raise ModelSyntaxError(lineno, f"unknown directive {head!r}")
        if head == "q":
            if q is not None:
                raise ModelSyntaxError(lineno, "duplicate q directive")
            if len(toks) != 2:
                raise ModelSyntaxError(lineno, "usage: q <int>")
            try:
                q = int(toks[1])
            except ValueError:
                raise ModelSyntaxError(lineno, f"q must be an integer, got {toks[1]!r}") from None
            if q < 2:
                raise ModelSyntaxError(lineno, f"q must be at least 2, got {q}")
        elif head == "delta":
            if delta is not None:
                raise ModelSyntaxError(lineno, "duplicate delta directive")
            if len(toks) != 2:
                raise ModelSyntaxError(lineno, "usage: delta <float>")
            try:
                delta = float(toks[1])
            except ValueError:
                raise ModelSyntaxError(lineno, f"malformed delta {toks[1]!r}") from None
        elif head == "ray":
            if len(toks) != 4 or toks[2] != "attach":
                raise ModelSyntaxError(lineno, "usage: ray <ID> attach <VERTEX>")
            if any(r.ray_id == toks[1] for r in rays):
                raise DuplicateRay(f"line {lineno}: ray {toks[1]!r} declared twice")
            rays.append(RaySpec(ray_id=toks[1], attach=toks[3]))
        elif head == "compact":
            if compact_kind is not None:
                raise ModelSyntaxError(lineno, "duplicate compact directive")
            if len(toks) != 2 or toks[1] not in ("point", "matrix"):
                raise ModelSyntaxError(lineno, "usage: compact point|matrix")
            compact_kind = toks[1]
        elif head == "state":
            if len(toks) != 2:
                raise ModelSyntaxError(lineno, "usage: state <VERTEX>")
            if toks[1] in states:
                raise ModelSyntaxError(lineno, f"duplicate state {toks[1]!r}")
            states.append(toks[1])
        elif head == "trans":
            if len(toks) != 4:
                raise ModelSyntaxError(lineno, "usage: trans <V1> <V2> <prob>")
            trans_rows.append((lineno, toks[1], toks[2], _parse_prob(toks[3], lineno)))
        elif head == "exit":
            if len(toks) != 4:
                raise ModelSyntaxError(lineno, "usage: exit <V> <RAY> <prob>")
            exit_rows.append((lineno, toks[1], toks[2], _parse_prob(toks[3], lineno)))
        elif head == "entry":
            if len(toks) != 4:
                raise ModelSyntaxError(lineno, "usage: entry <RAY> <V> <prob>")
            entry_rows.append((lineno, toks[1], toks[2], _parse_prob(toks[3], lineno)))

    if q is None:
        raise ModelSyntaxError(0, "missing q directive")
    if not rays:
        raise ModelSyntaxError(0, "model declares no rays")
    check_delta(q, delta)
    kind = compact_kind or "point"
    ray_ids = {r.ray_id for r in rays}

    # second pass: resolve references now that declarations are known
    if kind == "point":
        if states:
            raise ModelSyntaxError(0, "state directives require compact matrix")
        if trans_rows:
            raise ModelSyntaxError(trans_rows[0][0], "trans requires compact matrix")
        if entry_rows:
            raise ModelSyntaxError(entry_rows[0][0], "entry requires compact matrix")
        attach = rays[0].attach
        exits: dict[tuple[str, str], Fraction] = {}
        for lineno, v, ray, p in exit_rows:
            if v != attach:
                raise UnknownVertex(
                    f"line {lineno}: point-mode exit vertex {v!r} is not the attach vertex {attach!r}"
                )
            if ray not in ray_ids:
                raise UnknownVertex(f"line {lineno}: exit references unknown ray {ray!r}")
            if (v, ray) in exits:
                raise ModelSyntaxError(lineno, f"duplicate exit for ray {ray!r}")
            exits[(v, ray)] = p
        compact = CompactSpec(kind="point", exits=exits)
    else:
        state_set = set(states)
        trans: dict[tuple[str, str], Fraction] = {}
        exits = {}
        entries: dict[tuple[str, str], Fraction] = {}
        for lineno, v1, v2, p in trans_rows:
            for v in (v1, v2):
                if v not in state_set:
                    raise UnknownState(f"line {lineno}: trans references unknown state {v!r}")
            if (v1, v2) in trans:
                raise ModelSyntaxError(lineno, f"duplicate trans {v1} {v2}")
            trans[(v1, v2)] = p
        for lineno, v, ray, p in exit_rows:
            if v not in state_set:
                raise UnknownState(f"line {lineno}: exit references unknown state {v!r}")
            if ray not in ray_ids:
                raise UnknownVertex(f"line {lineno}: exit references unknown ray {ray!r}")
            if (v, ray) in exits:
                raise ModelSyntaxError(lineno, f"duplicate exit {v} {ray}")
            exits[(v, ray)] = p
        for lineno, ray, v, p in entry_rows:
            if ray not in ray_ids:
                raise UnknownVertex(f"line {lineno}: entry references unknown ray {ray!r}")
            if v not in state_set:
                raise UnknownState(f"line {lineno}: entry references unknown state {v!r}")
            if (ray, v) in entries:
                raise ModelSyntaxError(lineno, f"duplicate entry {ray} {v}")
            entries[(ray, v)] = p
        for r in rays:
            if r.attach not in state_set:
                raise UnknownVertex(
                    f"ray {r.ray_id!r} attaches at {r.attach!r}, which is not a declared state"
                )
            if not any(ray == r.ray_id for (ray, _) in entries):
                # default: excursions on this ray re-enter at its attach vertex
                entries[(r.ray_id, r.attach)] = Fraction(1)
        compact = CompactSpec(
            kind="matrix",
            states=tuple(states),
            trans=trans,
            exits=exits,
            entries=entries,
        )

    return QuotientModel(q=q, delta=delta, rays=tuple(rays), compact=compact)


def _fmt_prob(p: Prob) -> str:
    if isinstance(p, Fraction):
        return str(p)  # "1/2" or "1"
    return repr(p)


def serialize_model(model: QuotientModel) -> str:
    """Render a model back to the file grammar. parse_model(serialize_model(m))
    reproduces m exactly for models whose probabilities are Fractions."""
    lines = [f"q {model.q}"]
    if model.delta is not None:
        lines.append(f"delta {model.delta!r}")
    for r in model.rays:
        lines.append(f"ray {r.ray_id} attach {r.attach}")
    lines.append(f"compact {model.compact.kind}")
    for s in model.compact.states:
        lines.append(f"state {s}")
    for (v1, v2), p in sorted(model.compact.trans.items()):
        lines.append(f"trans {v1} {v2} {_fmt_prob(p)}")
    for (v, ray), p in sorted(model.compact.exits.items()):
        lines.append(f"exit {v} {ray} {_fmt_prob(p)}")
    for (ray, v), p in sorted(model.compact.entries.items()):
        lines.append(f"entry {ray} {v} {_fmt_prob(p)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# validation


def validate_model(model: QuotientModel) -> list[Violation]:
    """Return all rule violations; an empty list means the model is usable."""
    out: list[Violation] = []
    q = model.q
    if q < 2:
        out.append(Violation("q_range", "q", f"q must be >= 2, got {q}"))
        return out
    if model.delta is not None and model.delta <= 0.5 * math.log(q):
        out.append(
            Violation(
                "delta_too_small",
                "delta",
                f"delta={model.delta} <= (1/2) log q; excursion tails would not be summable",
            )
        )
    if not model.rays:
        out.append(Violation("no_rays", "rays", "model declares no rays"))
        return out
    seen: set[str] = set()
    for r in model.rays:
        if r.ray_id in seen:
            out.append(Violation("duplicate_ray", r.ray_id, "ray id declared twice"))
        seen.add(r.ray_id)

    c = model.compact
    if c.kind == "point":
        attach = model.rays[0].attach
        for r in model.rays:
            if r.attach != attach:
                out.append(
                    Violation(
                        "point_attach_mismatch",
                        r.ray_id,
                        f"point mode requires a single attach vertex, got {r.attach!r} vs {attach!r}",
                    )
                )
        if c.states or c.trans or c.entries:
            out.append(Violation("point_extra_data", "compact", "point mode carries matrix data"))
        if c.exits:
            total = sum(c.exits.values())
            if total != 1:
                out.append(
                    Violation("point_exit", attach, f"exit probabilities sum to {total}, expected 1")
                )
            for (v, ray), p in c.exits.items():
                if v != attach:
                    out.append(Violation("point_exit", v, "exit vertex is not the attach point"))
                if ray not in model.ray_ids:
                    out.append(Violation("point_exit", ray, "exit references unknown ray"))
                if not 0 <= p <= 1:
                    out.append(Violation("probability_range", f"exit {v} {ray}", f"p={p}"))
    elif c.kind == "matrix":
        state_set = set(c.states)
        if not state_set:
            out.append(Violation("empty_matrix", "compact", "matrix mode declares no states"))
        for r in model.rays:
            if r.attach not in state_set:
                out.append(
                    Violation("unknown_attach", r.ray_id, f"attach vertex {r.attach!r} is not a state")
                )
        for (v1, v2), p in c.trans.items():
            if v1 not in state_set or v2 not in state_set:
                out.append(Violation("unknown_state", f"trans {v1} {v2}", "undeclared state"))
            if not 0 <= p <= 1:
                out.append(Violation("probability_range", f"trans {v1} {v2}", f"p={p}"))
        for (v, ray), p in c.exits.items():
            if v not in state_set:
                out.append(Violation("unknown_state", f"exit {v} {ray}", "undeclared state"))
            if ray not in model.ray_ids:
                out.append(Violation("unknown_ray", f"exit {v} {ray}", "undeclared ray"))
            if not 0 <= p <= 1:
                out.append(Violation("probability_range", f"exit {v} {ray}", f"p={p}"))
        # each state's outgoing row (internal plus departures) must be stochastic
        for v in c.states:
            row = sum(p for (v1, _), p in c.trans.items() if v1 == v) + sum(
                p for (v1, _), p in c.exits.items() if v1 == v
            )
            if row != 1:
                out.append(
                    Violation("stochasticity", v, f"outgoing probabilities sum to {row}, expected 1")
                )
        for ray_id in model.ray_ids:
            row = sum(p for (ray, _), p in c.entries.items() if ray == ray_id)
            if row != 1:
                out.append(
                    Violation(
                        "entry_distribution", ray_id, f"entry probabilities sum to {row}, expected 1"
                    )
                )
        # states never reached from any entry cannot occur in a trajectory
        reach = {v for (_, v), p in c.entries.items() if p > 0}
        frontier = list(reach)
        support = {(v1, v2) for (v1, v2), p in c.trans.items() if p > 0}
        while frontier:
            v = frontier.pop()
            for v1, v2 in support:
                if v1 == v and v2 not in reach:
                    reach.add(v2)
                    frontier.append(v2)
        for v in c.states:
            if v not in reach:
                out.append(Violation("unreachable_state", v, "no entry path reaches this state"))
    else:
        out.append(Violation("compact_kind", c.kind, "compact kind must be point or matrix"))

    # index pattern along each ray, checked on a short materialization
    if not any(v.rule in ("point_attach_mismatch", "unknown_attach", "compact_kind") for v in out):
        for r in model.rays:
            g = ray_graph(model, r.ray_id, depth=4)
            path = [r.attach] + [f"{r.ray_id}:{j}" for j in range(1, 5)]
            out.extend(nagao_ray_violations(g, q, path))
    return out


# ---------------------------------------------------------------------------
# materialization and admissibility


def ray_vertex(ray_id: str, level: int, attach: str) -> str:
    return attach if level == 0 else f"{ray_id}:{level}"


def up_label(ray_id: str, level: int) -> str:
    return f"{ray_id}:u{level}"


def down_label(ray_id: str, level: int) -> str:
    return f"{ray_id}:d{level}"


def ray_graph(model: QuotientModel, ray_id: str, depth: int) -> EdgeIndexedGraph:
    """Materialize one ray to `depth` levels as an edge-indexed graph.

    The base ascending edge carries index q+1 as in the one-ray quotient; with
    several rays or a matrix block this base index is a display convention
    only, since the compact dynamics are specified at the vertex level.
    """
    r = model.ray(ray_id)
    q = model.q
    down = q if r.down_index is None else r.down_index
    vertices = {r.attach}
    edges: dict[str, OrientedEdge] = {}
    reverse: dict[str, str] = {}
    index: dict[str, int] = {}
    for j in range(1, depth + 1):
        lo = ray_vertex(ray_id, j - 1, r.attach)
        hi = ray_vertex(ray_id, j, r.attach)
        vertices.add(hi)
        u, d = up_label(ray_id, j), down_label(ray_id, j)
        edges[u] = OrientedEdge(u, lo, hi)
        edges[d] = OrientedEdge(d, hi, lo)
        reverse[u], reverse[d] = d, u
        index[u] = q + 1 if j == 1 else r.up_index
        index[d] = down
    return EdgeIndexedGraph(
        vertices=frozenset(vertices), edges=edges, reverse=reverse, index=index
    )


def model_graph(model: QuotientModel, depth: int) -> EdgeIndexedGraph:
    """All rays materialized to `depth`, sharing attach vertices. Matrix-mode
    compact states appear as bare vertices; their dynamics are vertex-level
    and carry no oriented edges here."""
    vertices: set[str] = set(model.compact.states)
    edges: dict[str, OrientedEdge] = {}
    reverse: dict[str, str] = {}
    index: dict[str, int] = {}
    for r in model.rays:
        g = ray_graph(model, r.ray_id, depth)
        vertices |= g.vertices
        edges.update(g.edges)
        reverse.update(g.reverse)
        index.update(g.index)
    return EdgeIndexedGraph(
        vertices=frozenset(vertices), edges=edges, reverse=reverse, index=index
    )


def admissible_successors(graph: EdgeIndexedGraph, label: str) -> list[str]:
    """Oriented edges that may follow `label` in a geodesic projection.

    Every continuation out of the terminus is allowed except the reversal,
    which is allowed exactly when index(reverse(e)) > 1: at a lift, the
    reversal direction has index(reverse(e)) lifts of which one is the
    forbidden backtrack.
    """
    e = graph.edge(label)
    rev = graph.reverse[label]
    out = []
    for f in graph.edges_from(e.terminus):
        if f == rev and graph.index[rev] <= 1:
            continue
        out.append(f)
    return out
