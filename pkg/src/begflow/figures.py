"""Optional PNG rendering of trajectory tables.

Figures are a convenience layer over the CSV/JSONL output, never a
replacement for it; the delimited files remain the machine interface.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _series(rows: list[dict], key: str):
    """(t, value) pairs for rows where the column is populated."""
    ts, vs = [], []
    for row in rows:
        v = row.get(key, "")
        if v == "" or v is None:
            continue
        ts.append(float(row["t"]))
        vs.append(float(v))
    return ts, vs


def _plot_group(rows, keys, title, ylabel, path) -> bool:
    drew = False
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for key in keys:
        ts, vs = _series(rows, key)
        if ts:
            ax.plot(ts, vs, drawstyle="steps-post", label=key)
            drew = True
    if drew:
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
    plt.close(fig)
    return drew


def render_figures(rows: list[dict], outdir, prefix: str = "trajectory"
                   ) -> list[Path]:
    """Render side lengths, diagonal lengths, and energies to PNG files.

    Skips any figure whose columns are absent from the rows (continuum
    tables carry no energy breakdown, compare tables no lengths).
    """
    if not rows:
        raise ValueError("empty trajectory")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    groups = [
        ([f"P{i}" for i in range(1, 5)], "side lengths", "length",
         f"{prefix}_sides.png"),
        ([f"D{i}" for i in range(1, 5)], "diagonal lengths", "length",
         f"{prefix}_diagonals.png"),
        (["energy", "F"], "energy and implicit objective", "value",
         f"{prefix}_energy.png"),
    ]
    for keys, title, ylabel, fname in groups:
        if "t" not in rows[0]:
            continue
        path = outdir / fname
        if _plot_group(rows, keys, title, ylabel, path):
            written.append(path)
    return written
