"""Matplotlib figures for the report-producing CLI paths.

Figures are built on bare Figure objects (no pyplot state) and rendered
through the Agg canvas into an in-memory buffer, then written atomically
(temp file + rename), so partial PNGs never appear on disk.
"""

from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .evt import EvtReport

__all__ = ["evt_report_figure", "heights_figure"]


def _atomic_save(fig: Figure, path: str | Path) -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=120)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(target.parent), prefix=target.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(buf.getvalue())
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def evt_report_figure(
    report: EvtReport, path: str | Path, center: float | None = None
) -> None:
    """Empirical vs theoretical CDF of the centered max height."""
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.subplots()
    ys = [r.y for r in report.rows]
    ax.plot(ys, [r.theoretical for r in report.rows], "-", color="#555555", label="theoretical")
    ax.plot(ys, [r.empirical for r in report.rows], "o", color="#c4401f", label="empirical")
    ax.set_xlabel("y")
    ax.set_ylabel("P(max height <= N + y)")
    ax.set_ylim(-0.05, 1.05)
    bits = [f"KS {report.ks_distance:.4g}", f"{report.n_samples} samples"]
    if center is not None:
        bits.append(f"N = {center:.4g}")
    ax.set_title(", ".join(bits), fontsize=10)
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    _atomic_save(fig, path)


def heights_figure(heights: np.ndarray, path: str | Path) -> None:
    """Histogram of per-trial max heights over integer bins."""
    h = np.asarray(heights)
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.subplots()
    lo, hi = int(h.min()), int(h.max())
    ax.hist(h, bins=np.arange(lo - 0.5, hi + 1.5), color="#3a6ea5", edgecolor="white")
    ax.set_xlabel("max height h")
    ax.set_ylabel("trials")
    ax.set_title(f"{h.size} trials, mean {h.mean():.3f}", fontsize=10)
    _atomic_save(fig, path)
