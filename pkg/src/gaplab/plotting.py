"""PNG figures for sweep and scaling summaries."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _as_float(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return float("nan")


def sweep_figure(header: list[str], rows: list[list], path: Path) -> Path:
    """Gap, certified constant and every bound column against the first parameter."""
    x_name = header[0]
    xs = [_as_float(r[0]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for col in range(header.index("exact_gap"), len(header)):
        name = header[col]
        if name == "passed":
            continue
        ys = [_as_float(r[col]) for r in rows]
        if all(y != y for y in ys):
            continue
        style = {"exact_gap": dict(color="k", lw=2, marker="o"),
                 "certified": dict(color="C3", ls="--", marker="s")}.get(name, dict(marker="."))
        ax.plot(xs, ys, label=name, **style)
    ax.axhline(0.0, color="0.7", lw=0.8)
    ax.set_xlabel(x_name.split(".")[-1])
    ax.set_ylabel("spectral gap / lower bound")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def scaling_figure(rows: list[dict], summary: dict, path: Path) -> Path:
    Ls = [r["L"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(Ls, [r["gap_L2"] for r in rows], "o-", color="k", label="gap * L^2")
    ax.axhspan(summary["c1"], summary["c2"], color="C0", alpha=0.15, label="observed band")
    ax.set_xlabel("L")
    ax.set_ylabel("gap * L^2")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
