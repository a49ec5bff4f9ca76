"""Report figures rendered next to the delimited outputs.

All renderers write PNG files via the Agg backend with fixed size/dpi, so
re-running a seeded command reproduces the images byte for byte.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .gauss import central_interval
from .gbn import Gbn
from .guards import branch_prob

_DPI = 110


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def save_probit_figure(path) -> None:
    """Decision curves and densities for the three reference uncertainties."""
    plt = _pyplot()
    cases = ((0.16, "0.4^2"), (math.pi, "pi"), (16.0, "4^2"))
    fig, (ax_cdf, ax_pdf) = plt.subplots(2, 1, figsize=(6.4, 6.0), dpi=_DPI)
    margins = np.linspace(-8.0, 8.0, 401)
    for s2, label in cases:
        probs = [branch_prob(d, s2) for d in margins]
        (line,) = ax_cdf.plot(margins, probs, label=f"sigma^2 = {label}")
        p1 = branch_prob(1.0, s2)
        ax_cdf.plot([1.0], [p1], "o", color=line.get_color(), ms=4)
        sigma = math.sqrt(s2)
        xs = np.linspace(-8.0, 8.0, 401)
        dens = np.exp(-0.5 * (xs / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
        ax_pdf.plot(xs, dens, color=line.get_color())
        iv = central_interval(p1, s2)
        if iv.kind == "bounded":
            mask = (xs >= iv.lo) & (xs <= iv.hi)
            ax_pdf.fill_between(xs[mask], dens[mask], color=line.get_color(), alpha=0.2)
    ax_cdf.axvline(1.0, color="0.6", lw=0.8, ls="--")
    ax_cdf.set_xlabel("margin diff(x, a)")
    ax_cdf.set_ylabel("P(first branch)")
    ax_cdf.legend(loc="lower right", fontsize=8)
    ax_pdf.set_xlabel("guard sample")
    ax_pdf.set_ylabel("density (shaded: decision interval at margin 1)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_trajectory_figure(path, reports: Sequence, world) -> None:
    """Every run's path over the parking spot, colored by success."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.8), dpi=_DPI)
    n_ok = 0
    for rep in reports:
        xs = [p[1] for p in rep.path]
        ys = [p[2] for p in rep.path]
        if rep.success:
            n_ok += 1
        ax.plot(xs, ys, color="tab:green" if rep.success else "tab:red",
                lw=0.6, alpha=0.35)
    spot = world.spot
    c, s = math.cos(spot.theta), math.sin(spot.theta)
    hl, hw = 0.5 * spot.length, 0.5 * spot.width
    corners = [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw), (-hl, -hw)]
    ax.plot(
        [spot.x + c * cx - s * cy for cx, cy in corners],
        [spot.y + s * cx + c * cy for cx, cy in corners],
        color="k", lw=1.2,
    )
    ax.plot([world.rover.x], [world.rover.y], "k^", ms=6)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"parking runs: {n_ok}/{len(reports)} parked")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_model_figure(path, model: Gbn) -> None:
    """Learned per-node variances and dependence coefficients."""
    plt = _pyplot()
    fig, (ax_var, ax_b) = plt.subplots(2, 1, figsize=(6.4, 5.0), dpi=_DPI, sharex=True)
    idx = np.arange(1, model.n + 1)
    ax_var.stem(idx, model.variances())
    ax_var.set_ylabel("variance")
    if model.n > 1:
        ax_b.stem(idx[1:], model.chain_coeffs())
    ax_b.axhline(0.0, color="0.7", lw=0.8)
    ax_b.set_ylabel("coefficient b(i, i-1)")
    ax_b.set_xticks(idx)
    ax_b.set_xticklabels(model.labels, rotation=30, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
