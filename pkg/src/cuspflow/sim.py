"""Seeded Monte Carlo sampling of chain trajectories.

Two samplers with identical output laws:

    walk    step-by-step chain walk, one uniform per ascent decision
    direct  one uniform per excursion height via the inversion
            a = 1 + floor(log(1 - u) / log rho)

Reproducibility contract: trial i draws from the dedicated stream
Generator(PCG64(SeedSequence(master_seed, spawn_key=(i,)))), so outputs are a
pure function of (config, master_seed), independent of worker count and
chunking.  Within a trial the draw order is fixed: one draw for the starting
ray when several have positive stationary cycle mass, then per excursion the
height draw(s), then the routing draws toward the next excursion (entry
vertex, then one combined internal-step/exit draw per compact position); any
categorical with a single positive outcome consumes no draw.  The numpy ufuncs
np.log1p / np.log are the pinned height-inversion arithmetic for both scalar
and block paths (their results are length-independent, unlike mixing in
math.log1p); block draws may overshoot what a trial consumes, and the unused
tail is simply discarded, which cannot leak across trials because streams are
never shared.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import chain as _chain
from .errors import NotIrreducible
from .evt import LimitParams, center_level, n_of_t
from .excursion import Excursion, ExcursionTrace, cycle_law
from .model import QuotientModel

__all__ = [
    "RunConfig",
    "McResult",
    "trial_stream",
    "sample_height",
    "heights_from_uniforms",
    "sample_trajectory",
    "chain_walk_states",
    "run_monte_carlo",
    "c_gamma_mc",
]


@dataclass(frozen=True)
class RunConfig:
    """One Monte Carlo experiment: k excursions per trial (fixed_count) or a
    time budget t per trial (fixed_time)."""

    model: QuotientModel
    mode: str
    k: int | None = None
    t: float | None = None
    trials: int = 1
    master_seed: int = 0
    sampler: str = "walk"

    def __post_init__(self) -> None:
        if self.mode not in ("fixed_count", "fixed_time"):
            raise ValueError(f"mode must be fixed_count or fixed_time, got {self.mode!r}")
        if self.mode == "fixed_count":
            if self.k is None or self.k < 1:
                raise ValueError("fixed_count mode needs k >= 1")
            if self.t is not None:
                raise ValueError("fixed_count mode takes no time budget")
        else:
            if self.t is None or self.t < 1:
                raise ValueError("fixed_time mode needs t >= 1")
            if self.k is not None:
                raise ValueError("fixed_time mode takes no excursion count")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be nonnegative, got {self.master_seed}")
        if self.sampler not in ("walk", "direct"):
            raise ValueError(f"sampler must be walk or direct, got {self.sampler!r}")


def trial_stream(master_seed: int, trial: int) -> np.random.Generator:
    """The stream of trial `trial`: PCG64 seeded by spawn_key=(trial,)."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(trial,)))
    )


def sample_height(stream: np.random.Generator, rho: float) -> int:
    """One excursion height, P(a = j) = (1 - rho) rho^(j-1), from a single
    uniform by inversion; u = 0 maps to 1."""
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    u = stream.random()
    return 1 + int(np.floor(np.log1p(-u) / np.log(rho)))


def heights_from_uniforms(u: np.ndarray, rho: float) -> np.ndarray:
    """Vectorized inversion; elementwise identical to sample_height on the
    same uniforms."""
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    return 1 + np.floor(np.log1p(-u) / np.log(rho)).astype(np.int64)


# ---------------------------------------------------------------------------
# compiled routing tables (float weights, fixed outcome order)


@dataclass(frozen=True)
class _Routing:
    rays: tuple[str, ...]
    point: bool
    rho: float
    # (ray, weight) outcomes sorted by ray id; stationary cycle law
    initial: tuple[tuple[str, float], ...]
    # point mode: ray -> next-ray outcomes at the base descending edge
    ray_next: dict[str, tuple[tuple[str, float], ...]]
    # matrix mode: ray -> entry-vertex outcomes, vertex -> step outcomes
    entry: dict[str, tuple[tuple[str, float], ...]]
    steps: dict[str, tuple[tuple[tuple[str, str], float], ...]]
    # fast-path eligibility
    single_ray: bool
    det_gap: int | None  # constant compact sojourn when routing is draw-free


def _compile(model: QuotientModel) -> _Routing:
    ch = _chain.build_chain(model)
    nu = cycle_law(ch)
    initial = tuple((r, float(nu[r])) for r in sorted(nu) if float(nu[r]) > 0)
    ray_next: dict[str, tuple[tuple[str, float], ...]] = {}
    entry: dict[str, tuple[tuple[str, float], ...]] = {}
    steps: dict[str, tuple[tuple[tuple[str, str], float], ...]] = {}
    if model.is_point:
        for r in ch.rays:
            out = _chain.successors(ch, _chain.RayDown(r, 1))
            ray_next[r] = tuple((t.ray, float(p)) for t, p in out)
    else:
        for r in ch.rays:
            atoms = sorted(
                (v, float(p)) for (ray, v), p in ch.entries.items() if ray == r and p != 0
            )
            entry[r] = tuple(atoms)
        for v in ch.states:
            out = _chain.successors(ch, _chain.Compact(v))
            steps[v] = tuple(
                (("c", t.vertex) if isinstance(t, _chain.Compact) else ("r", t.ray), float(p))
                for t, p in out
            )
    single_ray = len(ch.rays) == 1
    det_gap: int | None = None
    if not model.is_point and single_ray and len(entry[ch.rays[0]]) == 1:
        pos = entry[ch.rays[0]][0][0]
        g = 0
        while g <= len(ch.states):
            out = steps[pos]
            if len(out) != 1:
                break
            (kind, target), _ = out[0]
            if kind == "r":
                det_gap = g
                break
            g += 1
            pos = target
    return _Routing(
        rays=ch.rays,
        point=model.is_point,
        rho=float(ch.rho),
        initial=initial,
        ray_next=ray_next,
        entry=entry,
        steps=steps,
        single_ray=single_ray,
        det_gap=det_gap,
    )


def _draw_index(stream: np.random.Generator, outcomes: Sequence[tuple[object, float]]) -> int:
    if len(outcomes) == 1:
        return 0
    u = stream.random()
    cum = 0.0
    for i, (_, w) in enumerate(outcomes):
        cum += w
        if u < cum:
            return i
    return len(outcomes) - 1


def _initial_ray(stream: np.random.Generator, routing: _Routing) -> str:
    if not routing.initial:
        raise NotIrreducible("no ray carries stationary cycle mass")
    return routing.initial[_draw_index(stream, routing.initial)][0]


def _gap_walk(
    stream: np.random.Generator, routing: _Routing, ray: str, remaining: int | None = None
) -> tuple[int, str | None, list[_chain.Compact] | None]:
    """Route from the end of an excursion on `ray` to the next departure.

    Point mode: zero compact steps, one optional ray draw.  Matrix mode: entry
    draw then combined step draws; with `remaining` set, stop after that many
    internal steps (budget exhausted, next ray None).  Returns
    (gap, next_ray, compact states visited)."""
    if routing.point:
        out = routing.ray_next[ray]
        return 0, out[_draw_index(stream, out)][0], []
    atoms = routing.entry[ray]
    pos = atoms[_draw_index(stream, atoms)][0]
    gap = 0
    visited: list[_chain.Compact] = []
    while True:
        out = routing.steps[pos]
        kind, target = out[_draw_index(stream, out)][0]
        if kind == "r":
            return gap, target, visited
        gap += 1
        visited.append(_chain.Compact(target))
        if remaining is not None and gap == remaining:
            return gap, None, visited
        pos = target


# ---------------------------------------------------------------------------
# scalar per-trial samplers (reference implementations)


def _walk_height(stream: np.random.Generator, rho: float) -> int:
    level = 1
    while stream.random() < rho:
        level += 1
    return level


def _trial_scalar(
    stream: np.random.Generator,
    config: RunConfig,
    routing: _Routing,
    record: bool = False,
) -> tuple[int, ExcursionTrace, list[_chain.ChainState] | None]:
    """One trial, drawing exactly per the documented order. record=True also
    emits the full per-step state path (walk sampler only)."""
    rho = routing.rho
    direct = config.sampler == "direct"
    path: list[_chain.ChainState] | None = [] if record else None
    excs: list[Excursion] = []
    ray = _initial_ray(stream, routing)
    h = 0
    t = 0
    gap_before = 0

    def full_excursion(a: int) -> None:
        nonlocal h, t
        excs.append(Excursion(ray, a, t, gap_before, True))
        h = max(h, a)
        if path is not None:
            path.extend(_chain.RayUp(ray, i) for i in range(1, a + 1))
            path.extend(_chain.RayDown(ray, i) for i in range(a, 0, -1))
        t += 2 * a

    if config.mode == "fixed_count":
        for n in range(config.k):
            a = sample_height(stream, rho) if direct else _walk_height(stream, rho)
            full_excursion(a)
            if n < config.k - 1:
                gap_before, nxt, visited = _gap_walk(stream, routing, ray)
                ray = nxt
                t += gap_before
                if path is not None:
                    path.extend(visited)
        return h, ExcursionTrace(tuple(excs), t), path

    t_int = int(math.floor(config.t))
    first = True
    while t < t_int:
        if not first:
            gap_before, nxt, visited = _gap_walk(stream, routing, ray, remaining=t_int - t)
            t += gap_before
            if path is not None:
                path.extend(visited)
            if nxt is None:
                break
            ray = nxt
        if direct:
            a = sample_height(stream, rho)
            if t + 2 * a <= t_int:
                full_excursion(a)
            else:
                s = t_int - t
                if s >= 1:
                    hp = min(a, s)
                    excs.append(Excursion(ray, hp, t, gap_before, False))
                    h = max(h, hp)
                    if path is not None:
                        path.extend(_chain.RayUp(ray, i) for i in range(1, hp + 1))
                        path.extend(_chain.RayDown(ray, i) for i in range(a, a - (s - hp), -1))
                t = t_int
                break
        else:
            # step-by-step: ascend while the budget lasts, then descend
            start = t
            level = 1
            t += 1
            if path is not None:
                path.append(_chain.RayUp(ray, 1))
            cut = t == t_int
            while not cut:
                if stream.random() < rho:
                    level += 1
                    t += 1
                    if path is not None:
                        path.append(_chain.RayUp(ray, level))
                    cut = t == t_int
                else:
                    break
            if cut:
                # mid-ascent stop: peak is wherever the walk got to
                excs.append(Excursion(ray, level, start, gap_before, False))
                h = max(h, level)
                break
            if t + level <= t_int:
                excs.append(Excursion(ray, level, start, gap_before, True))
                h = max(h, level)
                if path is not None:
                    path.extend(_chain.RayDown(ray, i) for i in range(level, 0, -1))
                t += level
            else:
                steps_down = t_int - t
                excs.append(Excursion(ray, level, start, gap_before, False))
                h = max(h, level)
                if path is not None:
                    path.extend(
                        _chain.RayDown(ray, i) for i in range(level, level - steps_down, -1)
                    )
                t = t_int
                break
        first = False
        gap_before = 0
    return h, ExcursionTrace(tuple(excs), t_int), path


def sample_trajectory(
    stream: np.random.Generator, config: RunConfig
) -> tuple[int, ExcursionTrace]:
    """One trial's max height and excursion trace."""
    h, trace, _ = _trial_scalar(stream, config, _compile(config.model))
    return h, trace


def chain_walk_states(
    stream: np.random.Generator, config: RunConfig
) -> tuple[list[_chain.ChainState], int, ExcursionTrace]:
    """Walk-sampler trial that also returns the per-step state path, for
    cross-checks against the excursion decomposition."""
    if config.sampler != "walk":
        raise ValueError("the state-path walker is defined for the walk sampler")
    h, trace, path = _trial_scalar(stream, config, _compile(config.model), record=True)
    return path if path is not None else [], h, trace


# ---------------------------------------------------------------------------
# block-drawing fast paths for the direct sampler (heights only)


def _fast_eligible(config: RunConfig, routing: _Routing) -> bool:
    if config.sampler != "direct" or not routing.single_ray:
        return False
    return routing.point or routing.det_gap is not None


def _direct_fast_height(
    stream: np.random.Generator, config: RunConfig, routing: _Routing
) -> int:
    rho = routing.rho
    if config.mode == "fixed_count":
        u = stream.random(config.k)
        # the inversion is nondecreasing in u, so max(height(u_i)) = height(max u_i)
        return 1 + int(np.floor(np.log1p(-float(u.max())) / np.log(rho)))
    t_int = int(math.floor(config.t))
    g = 0 if routing.point else routing.det_gap
    # virtual -g start makes every cycle gap-prefixed, including the first
    t = -g
    h = 0
    block = max(16, int(t_int * (1.0 - rho) / 2.0) + 16)
    while True:
        a = heights_from_uniforms(stream.random(block), rho)
        cs = t + np.cumsum(g + 2 * a)
        over = np.nonzero(cs > t_int)[0]
        if over.size == 0:
            h = max(h, int(a.max()))
            t = int(cs[-1])
            block = 256
            continue
        j = int(over[0])
        if j > 0:
            h = max(h, int(a[:j].max()))
        prev = int(cs[j - 1]) if j > 0 else t
        start = prev + g
        if start < t_int:
            h = max(h, min(int(a[j]), t_int - start))
        return h


# ---------------------------------------------------------------------------
# the Monte Carlo driver


@dataclass(frozen=True)
class McResult:
    heights: np.ndarray
    traces: tuple[ExcursionTrace, ...] | None
    summary: dict


def _run_chunk(
    config: RunConfig, lo: int, hi: int, keep_traces: bool
) -> tuple[np.ndarray, list[ExcursionTrace] | None]:
    routing = _compile(config.model)
    fast = not keep_traces and _fast_eligible(config, routing)
    heights = np.empty(hi - lo, dtype=np.int64)
    traces: list[ExcursionTrace] | None = [] if keep_traces else None
    for i in range(lo, hi):
        stream = trial_stream(config.master_seed, i)
        if fast:
            heights[i - lo] = _direct_fast_height(stream, config, routing)
        else:
            h, trace, _ = _trial_scalar(stream, config, routing)
            heights[i - lo] = h
            if traces is not None:
                traces.append(trace)
    return heights, traces


def run_monte_carlo(
    config: RunConfig,
    workers: int = 1,
    ys: Sequence[float] = (-1.0, 0.0, 1.0, 2.0, 3.0),
    keep_traces: bool = False,
) -> McResult:
    """All trials of an experiment, byte-identical for any worker count.

    The summary carries the centering level: n_of_t(T) in fixed_time mode,
    log_{1/rho}(k) in fixed_count mode, and the empirical CDF of the max
    height at thresholds floor(N + y)."""
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    model = config.model
    trials = config.trials
    if workers == 1 or trials == 1:
        heights, traces = _run_chunk(config, 0, trials, keep_traces)
    else:
        step = -(-trials // workers)
        spans = [(lo, min(lo + step, trials)) for lo in range(0, trials, step)]
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(len(spans)) as pool:
            parts = pool.starmap(
                _run_chunk, [(config, lo, hi, keep_traces) for lo, hi in spans]
            )
        heights = np.concatenate([p[0] for p in parts])
        traces = None
        if keep_traces:
            traces = []
            for p in parts:
                traces.extend(p[1])
    params = LimitParams.from_model(model)
    rho = float(params.rho)
    if config.mode == "fixed_time":
        center = n_of_t(params, float(config.t))
    else:
        center = math.log(config.k) / math.log(1.0 / rho)
    summary = {
        "schema_version": 1,
        "trials": trials,
        "mode": config.mode,
        "seed": config.master_seed,
        "sampler": config.sampler,
        "q": model.q,
        "delta": model.delta_value,
        "rho": rho,
        "c_gamma": float(params.c_gamma),
        "N": center,
        ("T" if config.mode == "fixed_time" else "k"): (
            float(config.t) if config.mode == "fixed_time" else config.k
        ),
        "cdf": [
            {
                "y": float(y),
                "empirical": float(np.count_nonzero(heights <= center_level(center + y)))
                / trials,
            }
            for y in ys
        ],
    }
    return McResult(
        heights=heights, traces=tuple(traces) if traces is not None else None, summary=summary
    )


def c_gamma_mc(
    model: QuotientModel, n_cycles: int, master_seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo estimate (mean, standard error) of the compact sojourn per
    cycle, by walking the gap chain only; heights never affect gaps.  Point
    mode has zero gaps by construction."""
    if n_cycles < 1:
        raise ValueError(f"n_cycles must be >= 1, got {n_cycles}")
    if model.is_point:
        return 0.0, 0.0
    routing = _compile(model)
    stream = np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed)))
    ray = _initial_ray(stream, routing)
    gaps = np.empty(n_cycles, dtype=np.int64)
    for i in range(n_cycles):
        g, nxt, _ = _gap_walk(stream, routing, ray)
        gaps[i] = g
        ray = nxt
    mean = float(gaps.mean())
    err = float(gaps.std(ddof=1) / math.sqrt(n_cycles)) if n_cycles > 1 else 0.0
    return mean, err
