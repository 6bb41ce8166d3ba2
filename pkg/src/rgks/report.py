"""Delimited logs, summary tables, and rendered figures for solver runs.

log.csv is the only machine-readable log: one row per basis vector added,
with the pinned header below.  Floats are written with shortest-round-trip
formatting so reruns of the same config produce byte-identical files.
Figures (PNG via the Agg backend) are rendered alongside the delimited
output as visual reports; they are not interaction surfaces.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .solvers import IterationRecord

LOG_HEADER = "iter,cycle,basis_k,lambda,objective,t1,rre,ssim,mv_a,mv_at,mv_psi,mv_psit,ms"


def _fmt(v: float) -> str:
    return repr(float(v))


def write_log_csv(path, records: list[IterationRecord]) -> None:
    lines = [LOG_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    str(r.it),
                    str(r.cycle),
                    str(r.basis_k),
                    _fmt(r.lam),
                    _fmt(r.objective),
                    _fmt(r.t1),
                    _fmt(r.rre),
                    _fmt(r.ssim),
                    str(r.mv_a),
                    str(r.mv_at),
                    str(r.mv_psi),
                    str(r.mv_psit),
                    _fmt(r.ms),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_log_csv(path) -> dict[str, np.ndarray]:
    text = Path(path).read_text().strip().splitlines()
    names = text[0].split(",")
    cols = {name: [] for name in names}
    for line in text[1:]:
        for name, val in zip(names, line.split(",")):
            cols[name].append(float(val))
    return {name: np.asarray(vals) for name, vals in cols.items()}


def write_summary_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("no summary rows")
    names = list(rows[0])
    lines = [",".join(names)]
    for row in rows:
        lines.append(",".join(_fmt(row[k]) if isinstance(row[k], float) else str(row[k]) for k in names))
    Path(path).write_text("\n".join(lines) + "\n")


def markdown_table(rows: list[dict]) -> str:
    if not rows:
        raise ValueError("no summary rows")
    names = list(rows[0])

    def cell(v):
        return f"{v:.4g}" if isinstance(v, float) else str(v)

    out = ["| " + " | ".join(names) + " |", "|" + "|".join(["---"] * len(names)) + "|"]
    for row in rows:
        out.append("| " + " | ".join(cell(row[k]) for k in names) + " |")
    return "\n".join(out) + "\n"


def _save(fig, path):
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)


def render_history_figure(records: list[IterationRecord], path) -> None:
    """Relative error / relative change / lambda per iteration, log scale."""
    it = [r.it for r in records]
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.4))
    rre = [r.rre for r in records]
    if np.any(np.isfinite(rre)):
        axes[0].semilogy(it, rre, "b.-", ms=3)
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("relative reconstruction error")
    axes[1].semilogy(it, [max(r.t1, 1e-300) for r in records], "k.-", ms=3)
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("relative change $T_1$")
    axes[2].semilogy(it, [max(r.lam, 1e-300) for r in records], "r.-", ms=3)
    axes[2].set_xlabel("iteration")
    axes[2].set_ylabel(r"$\lambda$")
    for ax in axes:
        ax.grid(True, which="both", alpha=0.3)
    fig.suptitle("convergence history")
    _save(fig, path)


def render_reconstruction_figure(x, x_true, n_x, n_y, path, n_t: int = 1, frame: int = 0) -> None:
    """Reconstruction, reference, and inverted-map error image side by side."""
    npix = n_x * n_y
    xr = np.asarray(x).ravel()[frame * npix:(frame + 1) * npix].reshape(n_y, n_x)
    xt = np.asarray(x_true).ravel()[frame * npix:(frame + 1) * npix].reshape(n_y, n_x)
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.6))
    lo, hi = float(xt.min()), float(xt.max())
    for ax, img, title, cmap, vlim in (
        (axes[0], xr, "reconstruction", "gray", (lo, hi)),
        (axes[1], xt, "reference", "gray", (lo, hi)),
        (axes[2], xr - xt, "error (inverted map)", "gray_r", None),
    ):
        im = ax.imshow(img, cmap=cmap, vmin=None if vlim is None else vlim[0],
                       vmax=None if vlim is None else vlim[1])
        ax.set_title(title + (f" (frame {frame})" if n_t > 1 else ""))
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(im, ax=ax, fraction=0.046)
    _save(fig, path)


def render_compare_figure(histories: dict[str, list[IterationRecord]], path) -> None:
    """Overlayed relative-error histories for several runs."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, records in histories.items():
        rre = [r.rre for r in records]
        if np.any(np.isfinite(rre)):
            ax.semilogy([r.it for r in records], rre, ".-", ms=3, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative reconstruction error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)
