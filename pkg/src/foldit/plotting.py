import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}


def _smooth(values, window):
    if window <= 1 or len(values) < window:
        return np.asarray(values)
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


def plot_loss_log(log_csv, out_path, window=20):
    """Loss curves from ``train_log.csv``: weighted components and per-GAN adversarial terms."""
    with open(log_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return None
    cols = {k: np.array([float(r[k]) for r in rows]) for k in rows[0] if k != "epoch"}
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.2))
        for key in ("total", "adv", "T", "GT", "idt"):
            y = _smooth(cols[key], window)
            ax0.plot(cols["step"][len(cols["step"]) - len(y):], y, label=key, lw=1)
        ax0.set_xlabel("step")
        ax0.set_title("objective components")
        ax0.legend(ncol=2)
        for key in sorted(k for k in cols if k.startswith(("G_", "D_"))):
            y = _smooth(cols[key], window)
            ax1.plot(cols["step"][len(cols["step"]) - len(y):], y, label=key, lw=1,
                     ls="-" if key.startswith("G_") else "--")
        ax1.set_xlabel("step")
        ax1.set_title("adversarial terms")
        ax1.legend(ncol=2, fontsize=7)
        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)
    return out_path


def plot_metric_reports(reports, out_path):
    """Per-frame Dice and IoU traces, one line per report, mean +/- std in the legend."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.2), sharey=True)
        for ax, metric in zip(axes, ("dice", "iou")):
            for r in reports:
                values = getattr(r, metric)
                mean, std = np.mean(values), np.std(values)
                ax.plot(np.arange(len(values)), values, lw=1, label=f"{r.label}: {mean:.2f}±{std:.2f}")
            ax.set_ylim(0, 1.02)
            ax.set_xlabel("frame")
            ax.set_title(metric.upper() if metric == "iou" else metric.capitalize())
            ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)
    return out_path


def save_frame_strip(rows, out_path, titles=None):
    """Grid of uint8 frames: ``rows`` is a list of equal-length lists of HxWx3 arrays."""
    n_rows, n_cols = len(rows), max(len(r) for r in rows)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(n_rows, n_cols, figsize=(1.4 * n_cols, 1.4 * n_rows), squeeze=False)
        for i, row in enumerate(rows):
            for j in range(n_cols):
                ax = axes[i][j]
                ax.axis("off")
                if j < len(row):
                    ax.imshow(row[j], interpolation="nearest")
            if titles:
                axes[i][0].set_title(titles[i], fontsize=7, loc="left")
        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)
    return out_path
