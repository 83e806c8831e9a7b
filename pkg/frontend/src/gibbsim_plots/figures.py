"""Figure rendering: one deterministic PNG per experiment kind.

Styling is pinned (figure size, dpi, no timestamps in metadata) so an
identical input directory always produces byte-identical image files.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schema import KINDS, Table, load_kind

_SAVE_KWARGS = dict(dpi=110, metadata={"Software": "gibbsim-plots"})


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    in_dir: str
    out_path: str
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def _empty(ax, message="samples: 0"):
    ax.text(0.5, 0.5, message, ha="center", va="center", transform=ax.transAxes)
    ax.set_xticks([])
    ax.set_yticks([])


def _hist_with_lowbin_inset(ax, values, bins, label, color):
    values = np.asarray(values, dtype=float)
    weights = np.full(len(values), 1.0 / len(values))
    counts, edges, _ = ax.hist(
        values, bins=bins, weights=weights, color=color, edgecolor="black", linewidth=0.4
    )
    ax.set_ylabel("fraction")
    ax.set_title(label, fontsize=9)
    # zoom into the lowest populated bin
    low = values[(values >= edges[0]) & (values <= edges[1])]
    if len(low):
        inset = ax.inset_axes([0.55, 0.45, 0.42, 0.45])
        inset.hist(
            low,
            bins=8,
            weights=np.full(len(low), 1.0 / len(values)),
            color=color,
            edgecolor="black",
            linewidth=0.3,
        )
        inset.set_title("lowest bin", fontsize=7)
        inset.tick_params(labelsize=6)


def _draw_dos(table: Table, axes):
    ax = axes[0]
    if not table.rows:
        _empty(ax)
        return
    sys_e = [r["eigenvalue"] for r in table.rows if r["part"] == "system"]
    bath_e = [r["eigenvalue"] for r in table.rows if r["part"] == "bath"]
    span = max(map(abs, sys_e + bath_e)) if (sys_e or bath_e) else 1.0
    bins = np.linspace(-span, span, 61)
    ax.hist(sys_e, bins=bins, histtype="step", color="tab:blue", label="system")
    ax.hist(bath_e, bins=bins, histtype="step", color="tab:red", label="bath")
    ax.set_xlabel("energy")
    ax.set_ylabel("count")
    ax.legend(fontsize=8)


def _draw_ensemble(table: Table, axes):
    if not table.rows:
        for ax in axes:
            _empty(ax)
        return
    specs = [
        ("d_bar", "time-averaged distance to Gibbs", np.linspace(0.0, 2.0, 41), "tab:blue"),
        ("r_d_bar", "population-sector rate", 40, "tab:orange"),
        ("r_nd_bar", "coherence-sector rate", 40, "tab:green"),
    ]
    for ax, (col, label, bins, color) in zip(axes, specs):
        _hist_with_lowbin_inset(ax, table.column(col), bins, label, color)
    axes[-1].set_xlabel("value")


def _draw_beta_sweep(table: Table, axes):
    if not table.rows:
        for ax in axes:
            _empty(ax)
        return
    betas = sorted({r["beta_prime"] for r in table.rows})
    series = {"d_bar": [], "r_d_bar": [], "r_nd_bar": []}
    medians = {k: [] for k in series}
    for b in betas:
        vals = {k: [] for k in series}
        for r in table.rows:
            if r["beta_prime"] == b:
                for k in series:
                    vals[k].append(r[k])
        for k in series:
            series[k].append(float(np.mean(vals[k])))
            medians[k].append(float(np.median(vals[k])))
    ax = axes[0]
    ax.plot(betas, series["d_bar"], "o-", color="tab:blue", label="mean")
    ax.plot(betas, medians["d_bar"], "s--", color="tab:cyan", label="median")
    ax.set_ylabel("distance to Gibbs")
    ax.legend(fontsize=8)
    ax = axes[1]
    ax.plot(betas, series["r_d_bar"], "o-", color="tab:orange", label="population mean")
    ax.plot(betas, medians["r_d_bar"], "s--", color="tab:red", label="population median")
    ax.plot(betas, series["r_nd_bar"], "o-", color="tab:green", label="coherence mean")
    ax.plot(betas, medians["r_nd_bar"], "s--", color="tab:olive", label="coherence median")
    ax.set_xlabel("scaled inverse temperature")
    ax.set_ylabel("scaled rate")
    ax.legend(fontsize=7)


def _draw_zeno(table: Table, axes):
    ax = axes[0]
    if not table.rows:
        _empty(ax)
        return
    samples = sorted({r["sample"] for r in table.rows})
    for s in samples:
        pts = [(r["t"], r["distance"]) for r in table.rows if r["sample"] == s]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", linewidth=0.8, markersize=3)
    ax.set_xlabel("interaction time t (lambda^2 t fixed)")
    ax.set_ylabel("fixed-point distance to maximal mixing")
    ax.set_yscale("log")
    ax.invert_xaxis()


def _draw_chain2(table: Table, axes):
    ax = axes[0]
    if not table.rows:
        _empty(ax)
        return
    blurred = [r for r in table.rows if r["m_bits"] > 0]
    ms = sorted({r["m_bits"] for r in blurred})
    dev_by_m = [[r["deviation_l1"] for r in blurred if r["m_bits"] == m] for m in ms]
    bnd_by_m = [
        [r["bound"] for r in blurred if r["m_bits"] == m and r["bound_valid"] == 1]
        for m in ms
    ]
    for i, m in enumerate(ms):
        ax.scatter([m] * len(dev_by_m[i]), dev_by_m[i], s=10, color="tab:blue",
                   label="realized shift" if i == 0 else None)
        if bnd_by_m[i]:
            ax.scatter([m + 0.12] * len(bnd_by_m[i]), bnd_by_m[i], s=10, marker="^",
                       color="tab:red", label="resolvent bound" if i == 0 else None)
    ax.set_yscale("log")
    ax.set_xlabel("register bits m")
    ax.set_ylabel("stationary-state shift (l1)")
    ax.legend(fontsize=8)


def _draw_correlate(table: Table, axes):
    if not table.rows:
        for ax in axes:
            _empty(ax)
        return
    ts = table.column("t")
    axes[0].plot(ts, table.column("im"), color="tab:blue", label="Im commutator")
    axes[0].plot(ts, table.column("re"), color="tab:gray", linewidth=0.8, label="Re commutator")
    axes[0].set_ylabel("correlator")
    axes[0].legend(fontsize=8)
    axes[1].plot(ts, table.column("prediction"), color="tab:green", label="first-order response")
    axes[1].plot(ts, table.column("residual"), color="tab:red", label="kick residual")
    axes[1].set_xlabel("time")
    axes[1].legend(fontsize=8)


_DRAWERS = {
    "dos": (_draw_dos, 1),
    "ensemble": (_draw_ensemble, 3),
    "beta-sweep": (_draw_beta_sweep, 2),
    "zeno": (_draw_zeno, 1),
    "chain2": (_draw_chain2, 1),
    "correlate": (_draw_correlate, 2),
}


def render(spec: FigureSpec) -> str:
    """Render one figure kind from the input directory; returns the out path.

    Never mutates inputs; identical inputs yield byte-identical files.
    """
    table = load_kind(spec.kind, spec.in_dir)
    drawer, n_axes = _DRAWERS[spec.kind]
    fig, axes = plt.subplots(
        n_axes, 1, figsize=(6.4, 2.6 * n_axes), squeeze=False, constrained_layout=True
    )
    axes = [a for row in axes for a in row]
    drawer(table, axes)
    fig.suptitle(spec.title or f"{spec.kind} ({len(table)} rows)", fontsize=10)
    fig.savefig(spec.out_path, **_SAVE_KWARGS)
    plt.close(fig)
    return spec.out_path
