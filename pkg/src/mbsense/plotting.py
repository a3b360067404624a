"""Figure rendering for the CLI report path.

Each known series gets a matplotlib figure written next to its CSV.
The CSV files remain the normative output; figures are a convenience
view and can be disabled with ``--no-figures``.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["render_figures"]


def _group(rows, index):
    grouped = {}
    for row in rows:
        grouped.setdefault(row[index], []).append(row)
    return grouped


def _plot_roc(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    for kind, pts in _group(rows, 0).items():
        pts = sorted(pts, key=lambda r: r[1])
        ax.plot([p[1] for p in pts], [p[2] for p in pts], marker="o", label=kind)
    ax.set_xlabel("probability of false alarm")
    ax.set_ylabel("probability of detection")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _plot_coop_roc(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    labeled = [(f"{rule} K={k_users}", qfa, qd)
               for rule, _, k_users, qfa, qd in rows]
    for label, pts in _group(labeled, 0).items():
        pts = sorted(pts, key=lambda r: r[1])
        ax.plot([p[1] for p in pts], [p[2] for p in pts], marker=".",
                label=label)
    ax.set_xlabel("fused false alarm probability")
    ax.set_ylabel("fused detection probability")
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=7)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _plot_throughput(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    for mode, pts in _group(rows, 0).items():
        pts = sorted(pts, key=lambda r: r[1])
        ax.plot([p[1] for p in pts], [p[3] / 1e6 for p in pts], marker="s",
                label=mode)
    ax.set_xlabel("accessed subchannels l")
    ax.set_ylabel("throughput R (Mbit/s)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _plot_tradeoff(rows, path):
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    taus = [r[0] * 1e3 for r in rows]
    axes[0].plot(taus, [r[3] / 1e6 for r in rows])
    axes[0].set_xlabel("sensing time (ms)")
    axes[0].set_ylabel("frame throughput C (Mbit/s)")
    axes[0].grid(True, alpha=0.4)
    axes[1].plot(taus, [r[2] for r in rows], label="P_FA")
    axes[1].plot(taus, [r[1] for r in rows], label="P_D")
    axes[1].set_xlabel("sensing time (ms)")
    axes[1].set_ylabel("probability")
    axes[1].grid(True, alpha=0.4)
    axes[1].legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _plot_tau_k(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot([r[0] for r in rows], [r[2] / 1e6 for r in rows], marker="o")
    ax.set_xlabel("vote count k")
    ax.set_ylabel("optimal throughput (Mbit/s)")
    ax.grid(True, alpha=0.4)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _plot_sampling_cost(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    for (k_users, n_bands), pts in _group([((r[0], r[1]), *r) for r in rows],
                                          0).items():
        pts = sorted(pts, key=lambda r: r[3])
        ax.plot([p[3] for p in pts], [p[4] / 1e6 for p in pts], marker="o",
                label=f"K={k_users}, M={n_bands}")
    ax.set_xlabel("spatial diversity")
    ax.set_ylabel("sampling cost (MHz)")
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _plot_edges(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    by_j = _group(rows, 1)
    js = sorted(by_j)
    means = [sum(r[5] for r in by_j[j]) / len(by_j[j]) for j in js]
    ax.plot(js, means, marker="o")
    ax.set_xlabel("number of scales J")
    ax.set_ylabel("mean edge error probability")
    ax.grid(True, alpha=0.4)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _plot_cs(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    for sparsity, pts in _group(rows, 0).items():
        pts = sorted(pts, key=lambda r: r[1])
        ax.plot([p[1] for p in pts], [p[2] for p in pts], marker="o",
                label=f"L={sparsity}")
    ax.set_xlabel("measurements O")
    ax.set_ylabel("exact recovery rate")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _plot_mb_metrics(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar([r[0] for r in rows], [r[1] for r in rows])
    ax.set_ylabel("aggregate probability")
    ax.tick_params(axis="x", rotation=20)
    ax.grid(True, axis="y", alpha=0.4)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _plot_waterfill(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    bands = [r[0] for r in rows]
    ax.bar(bands, [r[2] for r in rows], label="allocated power")
    ax.step(bands, [1.0 / r[1] for r in rows], where="mid", color="k",
            label="noise/gain floor")
    ax.set_xlabel("band")
    ax.set_ylabel("power (W)")
    ax.grid(True, axis="y", alpha=0.4)
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _plot_bandwidth(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot([r[0] for r in rows], [r[1] / 1e6 for r in rows], marker="o",
            label="R")
    ax.plot([r[0] for r in rows], [r[2] / 1e6 for r in rows], marker="s",
            label="C")
    ax.set_xlabel("accessed subchannels l")
    ax.set_ylabel("throughput (Mbit/s)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


_RENDERERS = {
    "roc": _plot_roc,
    "coop_roc": _plot_coop_roc,
    "throughput": _plot_throughput,
    "tradeoff": _plot_tradeoff,
    "tau_k": _plot_tau_k,
    "sampling_cost": _plot_sampling_cost,
    "edges": _plot_edges,
    "cs": _plot_cs,
    "mb_metrics": _plot_mb_metrics,
    "waterfill": _plot_waterfill,
    "bandwidth": _plot_bandwidth,
}


def render_figures(series: dict, outdir) -> list:
    """Render one PNG per known series; returns the written paths."""
    written = []
    for name, rows in series.items():
        renderer = _RENDERERS.get(name)
        if renderer is None or not rows:
            continue
        path = f"{outdir}/{name}.png"
        renderer(rows, path)
        written.append(path)
    return written
