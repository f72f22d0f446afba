"""Excursion decomposition of chain trajectories.

A trajectory splits into cusp excursions: a departure RayUp(r, 1), an ascent
to some peak level a, the forced descent back, ending with RayDown(r, 1).  A
complete excursion of height a occupies exactly 2a unit steps.  Between the
end of one excursion and the start of the next the walker takes gap_before
unit steps strictly inside the compact block (zero in point mode).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import chain as _chain
from .errors import InadmissiblePath, NotIrreducible
from .model import Prob, QuotientModel, rho_value

__all__ = [
    "Excursion",
    "ExcursionTrace",
    "height_under_time_cap",
    "expected_excursion_time",
    "decompose",
    "cycle_law",
    "c_gamma_exact",
]


@dataclass(frozen=True)
class Excursion:
    ray: str
    height: int
    start_time: int
    gap_before: int
    complete: bool = True


@dataclass(frozen=True)
class ExcursionTrace:
    """Excursions in trajectory order. total_time counts every unit step of
    the underlying trajectory, so

        total_time = sum over complete excursions of (2 height + gap_before)
                     + steps of an incomplete final excursion
                     + compact steps after the last excursion end
    """

    excursions: tuple[Excursion, ...]
    total_time: int


def height_under_time_cap(a: int, s: int) -> int:
    """Max level reached in the first s steps of an excursion of height a.
    The level profile is a tent, so this is min(a, s)."""
    if a < 1:
        raise ValueError(f"height must be at least 1, got {a}")
    if s < 0:
        raise ValueError(f"step budget must be nonnegative, got {s}")
    return min(a, s)


def expected_excursion_time(q: int, delta: float | None) -> Prob:
    """E[2 a] = 2 / (1 - rho) = 2 e^{2 delta} / (e^{2 delta} - q): twice the
    mean of the geometric height law P(a = k) = (1 - rho) rho^(k-1)."""
    rho = rho_value(q, delta)
    return 2 / (1 - rho)


def decompose(path: Sequence[_chain.ChainState], model: QuotientModel) -> ExcursionTrace:
    """Split an admissible trajectory into excursions.

    Raises InadmissiblePath naming the first offending step if consecutive
    states are not a positive-probability transition.  A final unfinished
    excursion is reported with complete=False and the peak reached so far.  A
    leading fragment that starts mid-excursion is not listed (its height is
    not observable) but still counts toward total_time.
    """
    ch = _chain.build_chain(model)
    exc: list[Excursion] = []
    gap = 0
    open_exc: dict | None = None
    prev: _chain.ChainState | None = None
    for i, s in enumerate(path):
        if prev is not None and _chain.transition_prob(ch, prev, s) == 0:
            raise InadmissiblePath(
                f"step {i}: {_chain.state_id(prev)} -> {_chain.state_id(s)} has probability 0"
            )
        prev = s
        if open_exc is None:
            if isinstance(s, _chain.RayUp) and s.level == 1:
                open_exc = {"ray": s.ray, "start": i, "peak": 1, "gap": gap}
                gap = 0
            elif isinstance(s, _chain.Compact):
                gap += 1
            # other ray states here belong to a leading fragment
        else:
            if isinstance(s, _chain.RayUp):
                open_exc["peak"] = max(open_exc["peak"], s.level)
            elif isinstance(s, _chain.RayDown) and s.level == 1:
                e = Excursion(
                    ray=open_exc["ray"],
                    height=open_exc["peak"],
                    start_time=open_exc["start"],
                    gap_before=open_exc["gap"],
                    complete=True,
                )
                if i - e.start_time + 1 != 2 * e.height:
                    raise InadmissiblePath(
                        f"excursion at step {e.start_time} spans {i - e.start_time + 1} "
                        f"steps but peaks at {e.height}"
                    )
                exc.append(e)
                open_exc = None
    if open_exc is not None:
        exc.append(
            Excursion(
                ray=open_exc["ray"],
                height=open_exc["peak"],
                start_time=open_exc["start"],
                gap_before=open_exc["gap"],
                complete=False,
            )
        )
    return ExcursionTrace(excursions=tuple(exc), total_time=len(path))


# ---------------------------------------------------------------------------
# the compact sojourn constant


def cycle_law(chain: _chain.ChainSpec) -> dict[str, Prob]:
    """Stationary law of the embedded ray-to-ray cycle chain: the ray visited
    by the n-th excursion, watched only at excursion starts."""
    _, cycle = _chain.compact_sojourn(chain)
    rays = list(chain.rays)
    if len(rays) == 1:
        return {rays[0]: chain.one()}
    n = len(rays)
    idx = {r: i for i, r in enumerate(rays)}
    one, zero = chain.one(), chain.zero()
    a = [[zero for _ in range(n)] for _ in range(n)]
    for (r, r2), p in cycle.items():
        a[idx[r2]][idx[r]] += p
    for i in range(n):
        a[i][i] -= one
    a[n - 1] = [one] * n
    b = [zero] * (n - 1) + [one]
    try:
        x = _chain.solve_linear(a, b)
    except _chain.SingularCompactBlock:
        raise NotIrreducible("embedded cycle chain has no unique stationary law") from None
    return {r: x[idx[r]] for r in rays}


def c_gamma_exact(model: QuotientModel) -> Prob:
    """Mean compact sojourn per excursion cycle, averaged over the stationary
    cycle law: C = sum_r nu_r s_r with s_r the expected number of unit steps
    strictly inside the block after an excursion on ray r. Zero in point
    mode."""
    ch = _chain.build_chain(model)
    if not ch.states:
        return ch.zero()
    sojourn, _ = _chain.compact_sojourn(ch)
    nu = cycle_law(ch)
    return sum(nu[r] * sojourn[r] for r in ch.rays)
