"""Report figures written next to the text/CSV outputs."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "savefig.dpi": 150,
    # keep PNG bytes stable across runs
    "svg.hashsalt": "wafer2spike",
}

WAFER_COLORS = ("#f3e26b", "#f39c3d", "#c0392b")  # no die, pass, fail


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def training_curve(history, path):
    """Loss and training accuracy per epoch."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        epochs = [r.epoch for r in history]
        ax.plot(epochs, [r.loss for r in history], color="tab:blue", marker="o", ms=3)
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean cross-entropy", color="tab:blue")
        ax2 = ax.twinx()
        ax2.plot(epochs, [r.train_accuracy for r in history], color="tab:red", marker="s", ms=3)
        ax2.set_ylabel("train accuracy", color="tab:red")
        ax2.set_ylim(0, 1.02)
        return _save(fig, path)


def confusion_matrix(cm, class_names, path, normalize=True):
    cm = np.asarray(cm, dtype=float)
    shown = cm / np.maximum(cm.sum(axis=1, keepdims=True), 1) if normalize else cm
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 4.4))
        im = ax.imshow(shown, cmap="Blues", vmin=0, vmax=1 if normalize else None)
        ax.set_xticks(range(len(class_names)), class_names, rotation=45, ha="right")
        ax.set_yticks(range(len(class_names)), class_names)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        for i in range(cm.shape[0]):
            for j in range(cm.shape[1]):
                if cm[i, j]:
                    ax.text(j, i, int(cm[i, j]), ha="center", va="center", fontsize=6,
                            color="white" if shown[i, j] > 0.5 else "black")
        fig.colorbar(im, ax=ax, fraction=0.046)
        return _save(fig, path)


def energy_breakdown(report, path):
    """Per-layer energy in mJ, spiking and dense layers coloured apart."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        names = [l.layer for l in report.layers]
        colors = ["tab:green" if l.kind == "spiking" else "tab:gray" for l in report.layers]
        ax.bar(names, [l.mj for l in report.layers], color=colors)
        ax.set_ylabel("energy (mJ)")
        ax.set_title(f"{report.model}, T={report.T}, total {report.total_mj:.4f} mJ")
        return _save(fig, path)


def wafer_gallery(dataset, class_names, path, per_class=4):
    """A grid of example maps, one row per class."""
    from matplotlib.colors import ListedColormap

    rows = [[m for m in dataset if int(m.label) == c][:per_class] for c in range(len(class_names))]
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(len(class_names), per_class, figsize=(per_class * 1.1, len(class_names) * 1.1))
        axes = np.atleast_2d(axes)
        for c, row in enumerate(rows):
            for j in range(per_class):
                ax = axes[c, j]
                ax.set_axis_off()
                if j < len(row):
                    ax.imshow(row[j].cells, cmap=ListedColormap(WAFER_COLORS), vmin=0, vmax=2, interpolation="nearest")
            axes[c, 0].text(-2, row[0].cells.shape[0] / 2 if row else 0, class_names[c], ha="right", va="center", fontsize=7)
        return _save(fig, path)
