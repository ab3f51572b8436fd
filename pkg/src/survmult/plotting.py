"""Heatmaps of multiplicity metrics over the (epsilon, delta) grid."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

METRIC_LABELS = {
    "ambiguity": "Ambiguity",
    "discrepancy": "Discrepancy",
    "obscurity": "Obscurity",
}

# fixed colour-scale endpoints so panels are comparable across subsets
VMIN, VMAX = 0.0, 1.0
CMAP = "viridis"

plt.rcParams.update({
    "svg.hashsalt": "survmult",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.titlesize": 10,
})


def metric_grid(report, metric):
    """``(eps_values, delta_values, matrix)`` with rows indexed by epsilon."""
    eps = sorted({r.epsilon for r in report.rows})
    deltas = sorted({r.delta for r in report.rows})
    mat = np.full((len(eps), len(deltas)), np.nan)
    for r in report.rows:
        mat[eps.index(r.epsilon), deltas.index(r.delta)] = getattr(r, metric)
    return eps, deltas, mat


def cell_color(value, cmap=CMAP):
    """RGBA colour a heatmap cell with this metric value receives."""
    norm = matplotlib.colors.Normalize(vmin=VMIN, vmax=VMAX)
    return matplotlib.colormaps[cmap](norm(value))


def plot_heatmap(report, metric, path, provenance=None):
    """Render one metric as an epsilon x delta heatmap and save it (SVG by suffix)."""
    eps, deltas, mat = metric_grid(report, metric)
    fig, ax = plt.subplots(figsize=(3.6, 3.0))
    im = ax.imshow(mat, cmap=CMAP, vmin=VMIN, vmax=VMAX, origin="lower", aspect="auto")
    ax.set_xticks(range(len(deltas)), [f"{d:g}" for d in deltas])
    ax.set_yticks(range(len(eps)), [f"{e:g}" for e in eps])
    ax.set_xlabel(r"conflict threshold $\delta$")
    ax.set_ylabel(r"Rashomon parameter $\varepsilon$")
    title = METRIC_LABELS.get(metric, metric)
    if report.dataset_id:
        title = f"{title} - {report.dataset_id}"
    ax.set_title(title)
    for i in range(len(eps)):
        for j in range(len(deltas)):
            v = mat[i, j]
            ax.text(j, i, f"{v:.2f}", ha="center", va="center", fontsize=7,
                    color="black" if v > 0.6 else "white")
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    fig.tight_layout()
    metadata = {"Date": None}
    if provenance:
        metadata["Description"] = provenance
    fig.savefig(path, metadata=metadata)
    plt.close(fig)
