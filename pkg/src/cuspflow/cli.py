"""Command-line interface.

Subcommands: validate, stationary, classify, exact-evt, simulate,
evt-compare, c-gamma, check-measure.  Exit codes: 0 on success, 2 on input or
model errors, 3 when an --assert bound or a check-measure identity fails.

All file outputs are written atomically (temp file in the destination
directory, then rename).  CSV uses LF line endings and '.' decimals with
round-trip float repr; JSON reports carry schema_version 1.  Commands that
write a report also render a PNG figure next to it unless --no-plot is given.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import chain as _chain
from .errors import CuspflowError
from .evt import (
    LimitParams,
    empirical_cdf_compare,
    max_height_exact,
    n_of_t,
)
from .excursion import c_gamma_exact
from .figures import evt_report_figure, heights_figure
from .measure import (
    ball_shadow,
    check_markov_property,
    excursion_height_tail,
    random_admissible_path,
    shadow_ratio,
)
from .model import QuotientModel, check_delta, parse_model, rho_value, validate_model
from .sim import RunConfig, c_gamma_mc, run_monte_carlo

__all__ = ["main"]


# ---------------------------------------------------------------------------
# output helpers


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    """Round-trip cell formatting: ints bare, floats via repr."""
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv(rows, header: str) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(c) if not isinstance(c, str) else c for c in row))
    return "\n".join(lines) + "\n"


def _load_model(path: str) -> QuotientModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CuspflowError(f"{path}: {exc}") from None
    try:
        model = parse_model(text)
    except CuspflowError as exc:
        raise CuspflowError(f"{path}: {exc}") from None
    violations = validate_model(model)
    if violations:
        detail = "; ".join(f"{v.rule} at {v.where}: {v.detail}" for v in violations)
        raise CuspflowError(f"{path}: invalid model: {detail}")
    return model


# ---------------------------------------------------------------------------
# subcommands


def _cmd_validate(args) -> int:
    try:
        text = Path(args.model).read_text()
    except OSError as exc:
        raise CuspflowError(f"{args.model}: {exc}") from None
    model = parse_model(text)
    violations = validate_model(model)
    if violations:
        for v in violations:
            print(f"violation: {v.rule} at {v.where}: {v.detail}")
        return 2
    print(f"valid: q={model.q} delta={model.delta_value:.6f} rays={len(model.rays)}")
    return 0


def _cmd_stationary(args) -> int:
    model = _load_model(args.model)
    ch = _chain.build_chain(model)
    dist = _chain.stationary_distribution(ch)
    print(
        f"stationary: q={model.q} rays={len(ch.rays)}"
        f" total_mass={_fmt(dist.total_mass())} residual={_fmt(dist.residual)}"
    )
    for v in ch.occupied:
        print(f"pi c:{v} {_fmt(dist.compact_mass[v])}")
    for r in ch.rays:
        for i in range(1, args.depth + 1):
            print(f"pi u:{r}:{i} {_fmt(dist.mass(_chain.RayUp(r, i)))}")
            print(f"pi d:{r}:{i} {_fmt(dist.mass(_chain.RayDown(r, i)))}")
    return 0


def _cmd_classify(args) -> int:
    model = _load_model(args.model)
    cls = _chain.classify(_chain.build_chain(model))
    print(
        f"irreducible={cls.irreducible} period={cls.period}"
        f" positive_recurrent={cls.positive_recurrent}"
    )
    for key in sorted(cls.mean_return):
        print(f"mean_return {key} {_fmt(cls.mean_return[key])}")
    return 0


def _cmd_exact_evt(args) -> int:
    model = _load_model(args.model)
    value = max_height_exact(model, args.k, args.N)
    print(float(value))
    return 0


def _run_config(model: QuotientModel, args) -> RunConfig:
    if args.T is not None:
        return RunConfig(
            model=model,
            mode="fixed_time",
            t=args.T,
            trials=args.trials,
            master_seed=args.seed,
            sampler=args.sampler,
        )
    return RunConfig(
        model=model,
        mode="fixed_count",
        k=args.k,
        trials=args.trials,
        master_seed=args.seed,
        sampler=args.sampler,
    )


def _cmd_simulate(args) -> int:
    model = _load_model(args.model)
    config = _run_config(model, args)
    keep = args.trace is not None
    result = run_monte_carlo(config, workers=args.workers, keep_traces=keep)
    if args.trace is not None:
        rows = []
        for trial, trace in enumerate(result.traces):
            for n, exc in enumerate(trace.excursions, start=1):
                rows.append(
                    (trial, n, exc.ray, int(exc.height), int(exc.start_time), int(exc.gap_before))
                )
        _write_atomic(Path(args.trace), _csv(rows, "trial,n,ray,a_n,t_n,gap"))
    if args.out is not None:
        stem = Path(args.out).with_suffix("")
        csv_path = stem.with_suffix(".csv")
        json_path = stem.with_suffix(".json")
        rows = [(i, int(h)) for i, h in enumerate(result.heights)]
        _write_atomic(csv_path, _csv(rows, "trial,h"))
        _write_atomic(json_path, json.dumps(result.summary, indent=2) + "\n")
        wrote = [str(csv_path), str(json_path)]
        if not args.no_plot:
            png_path = stem.with_suffix(".png")
            heights_figure(result.heights, png_path)
            wrote.append(str(png_path))
        if args.trace is not None:
            wrote.append(str(args.trace))
        print("wrote " + " ".join(wrote))
    else:
        print(json.dumps(result.summary, indent=2))
    return 0


def _cmd_evt_compare(args) -> int:
    model = _load_model(args.model)
    params = LimitParams.from_model(model)
    ys = args.ys
    if args.T is not None:
        center = n_of_t(params, args.T)
        theoretical = "limit"
        tol = args.tol if args.tol is not None else 0.02
        k = None
    else:
        center = float(args.N)
        theoretical = "galambos"
        tol = args.tol if args.tol is not None else 0.005
        k = args.k
    config = _run_config(model, args)
    result = run_monte_carlo(config, workers=args.workers)
    report = empirical_cdf_compare(
        result.heights, params, center, ys, theoretical=theoretical, k=k
    )
    print(
        f"ks_distance={_fmt(report.ks_distance)} n_samples={report.n_samples}"
        f" N={_fmt(center)} theoretical={theoretical}"
    )
    if args.out is not None:
        out = Path(args.out)
        if out.suffix == ".json":
            payload = {
                "schema_version": 1,
                "ks_distance": float(report.ks_distance),
                "n_samples": report.n_samples,
                "N": float(center),
                "theoretical": theoretical,
                "params": {
                    "q": params.q,
                    "delta": check_delta(params.q, params.delta),
                    "rho": float(params.rho),
                    "c_gamma": float(params.c_gamma),
                },
                "rows": [
                    {
                        "y": float(r.y),
                        "empirical": float(r.empirical),
                        "theoretical": float(r.theoretical),
                        "abs_err": float(r.abs_err),
                    }
                    for r in report.rows
                ],
            }
            _write_atomic(out, json.dumps(payload, indent=2) + "\n")
        else:
            rows = [(r.y, r.empirical, r.theoretical, r.abs_err) for r in report.rows]
            _write_atomic(out, _csv(rows, "y,empirical,theoretical,abs_err"))
        wrote = [str(out)]
        if not args.no_plot:
            png_path = out.with_suffix(".png")
            evt_report_figure(report, png_path, center=float(center))
            wrote.append(str(png_path))
        print("wrote " + " ".join(wrote))
    if args.assert_bound:
        worst = max(r.abs_err for r in report.rows)
        if worst > tol:
            print(f"assert failed: max abs_err {worst!r} > tol {tol!r}", file=sys.stderr)
            return 3
        print(f"assert ok: max abs_err {worst!r} <= tol {tol!r}")
    return 0


def _cmd_c_gamma(args) -> int:
    model = _load_model(args.model)
    value = c_gamma_exact(model)
    if isinstance(value, Fraction):
        print(f"c_gamma = {float(value)!r} (exactly {value})")
    else:
        print(f"c_gamma = {float(value)!r}")
    if args.mc is not None:
        est, err = c_gamma_mc(model, args.mc, master_seed=args.seed)
        print(f"mc: estimate={est!r} stderr={err!r} cycles={args.mc}")
        if err > 0 and abs(est - float(value)) > 4 * err:
            print(
                f"assert failed: |mc - exact| = {abs(est - float(value))!r} > 4 stderr",
                file=sys.stderr,
            )
            return 3
    return 0


def _cmd_check_measure(args) -> int:
    model = _load_model(args.model)
    ch = _chain.build_chain(model)
    q = model.q
    failures: list[str] = []

    ok = all((q + 1) * q ** (d - 1) * ball_shadow(q, d) == 1 for d in range(1, 11))
    ok = ok and all(ball_shadow(q, d) == q * ball_shadow(q, d + 1) for d in range(1, 11))
    print(f"{'ok' if ok else 'FAIL'} shadow_normalization (d <= 10)")
    if not ok:
        failures.append("shadow_normalization")

    # height tail from the conformal series must match the chain recursion
    ray0 = ch.rays[0]
    worst = 0.0
    for n in range(1, 11):
        tail = excursion_height_tail(q, model.delta, n)
        via_chain = 1 - _chain.peak_height_cdf(ch, ray0, n)
        worst = max(worst, abs(float(tail - via_chain)))
    tol = 0.0 if ch.is_exact else 1e-12
    ok = worst <= tol
    print(f"{'ok' if ok else 'FAIL'} height_tail_vs_chain (n <= 10, worst {worst!r})")
    if not ok:
        failures.append("height_tail_vs_chain")

    # escaping-mass ratio against brute truncation of both geometric series
    rho = float(rho_value(q, model.delta))
    den = sum(rho**j for j in range(600))
    worst = 0.0
    for n in range(1, 11):
        num = sum(rho**j for j in range(n, n + 600))
        worst = max(worst, abs(float(shadow_ratio(q, model.delta, n)) - num / den))
    ok = worst <= 1e-12
    print(f"{'ok' if ok else 'FAIL'} shadow_ratio_series (n <= 10, worst {worst!r})")
    if not ok:
        failures.append("shadow_ratio_series")

    if model.is_point:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed)))
        worst_pair = (0.0, 0.0)
        for _ in range(args.cylinders):
            length = int(rng.integers(1, 9))
            path = random_admissible_path(ch, rng, length)
            pred, succ = check_markov_property(model, path)
            worst_pair = (
                max(worst_pair[0], float(pred)),
                max(worst_pair[1], float(succ)),
            )
        tol = 0.0 if ch.is_exact else 1e-12
        ok = worst_pair[0] <= tol and worst_pair[1] <= tol
        print(
            f"{'ok' if ok else 'FAIL'} markov_property"
            f" ({args.cylinders} cylinders, worst {worst_pair[0]!r}/{worst_pair[1]!r})"
        )
        if not ok:
            failures.append("markov_property")
    else:
        print("skipped markov_property (matrix block)")

    if failures:
        print("check-measure failed: " + ", ".join(failures), file=sys.stderr)
        return 3
    return 0


# ---------------------------------------------------------------------------
# parser


def _ys_list(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed y list: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty y list")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cuspflow",
        description="Excursion chains and extreme-value checks on quotient models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse a model file and report violations")
    p.add_argument("model")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("stationary", help="print the stationary law")
    p.add_argument("model")
    p.add_argument("--depth", type=int, default=40, help="ray levels to print")
    p.set_defaults(func=_cmd_stationary)

    p = sub.add_parser("classify", help="irreducibility, period, recurrence, Kac times")
    p.add_argument("model")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("exact-evt", help="exact P(max of k excursion heights <= N)")
    p.add_argument("model")
    p.add_argument("--k", type=int, required=True, help="number of excursions")
    p.add_argument("--N", type=int, required=True, help="height threshold")
    p.set_defaults(func=_cmd_exact_evt)

    p = sub.add_parser("simulate", help="seeded Monte Carlo trials of the max height")
    p.add_argument("model")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--T", type=float, help="continuous time budget per trial")
    group.add_argument("--k", type=int, help="completed excursions per trial")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--sampler", choices=("walk", "direct"), default="walk")
    p.add_argument("--out", help="report stem; writes .csv, .json and .png")
    p.add_argument("--trace", help="also write per-excursion rows to this CSV")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evt-compare", help="empirical vs theoretical CDF of max height")
    p.add_argument("model")
    p.add_argument("--T", type=float, help="time budget; compares against the limit law")
    p.add_argument("--k", type=int, help="excursion count; compares against the exact law")
    p.add_argument("--N", type=int, help="centering level (required with --k)")
    p.add_argument(
        "--ys",
        type=_ys_list,
        default=[-1.0, 0.0, 1.0, 2.0, 3.0],
        help="comma-separated offsets; use --ys=-1,0,1 for negative leads",
    )
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--sampler", choices=("walk", "direct"), default="direct")
    p.add_argument("--out", help="report path (.json for JSON, else CSV)")
    p.add_argument(
        "--assert",
        dest="assert_bound",
        action="store_true",
        help="exit 3 when max abs_err exceeds --tol",
    )
    p.add_argument("--tol", type=float, default=None, help="default 0.005 (--k) or 0.02 (--T)")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_evt_compare)

    p = sub.add_parser("c-gamma", help="mean compact-gap constant, exact and optional MC")
    p.add_argument("model")
    p.add_argument("--mc", type=int, default=None, help="estimate over this many cycles")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_c_gamma)

    p = sub.add_parser("check-measure", help="boundary-measure identities and Markov checks")
    p.add_argument("model")
    p.add_argument("--cylinders", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_check_measure)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.func is _cmd_evt_compare:
        if (args.T is None) == (args.k is None):
            parser.error("evt-compare needs exactly one of --T or --k")
        if args.k is not None and args.N is None:
            parser.error("evt-compare with --k also needs --N")
    try:
        return args.func(args)
    except CuspflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
