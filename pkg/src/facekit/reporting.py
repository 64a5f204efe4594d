"""Training-report CSV export and optional matplotlib renderings.

The CSV is the contract output (`epoch,train_mse,val_mse`); the figure
writers are opt-in conveniences for the CLI's --plot flags and render
straight to files (Agg backend), never to a window.
"""

from __future__ import annotations

from .bpnn import TrainReport
from .detector import Detection
from .images import GrayImage


def train_report_csv(report: TrainReport) -> str:
    lines = ["epoch,train_mse,val_mse"]
    for epoch, (train_mse, val_mse) in enumerate(report.mse_curve, start=1):
        lines.append(f"{epoch},{train_mse!r},{val_mse!r}")
    return "\n".join(lines) + "\n"


def write_train_report_csv(report: TrainReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(train_report_csv(report))


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_train_curve(report: TrainReport, path) -> None:
    """Render the per-epoch MSE curve (log scale) to an image file."""
    plt = _pyplot()
    epochs = range(1, report.epochs_run + 1)
    train = [t for t, _ in report.mse_curve]
    val = [v for _, v in report.mse_curve]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(epochs, train, label="train")
    if any(v == v for v in val):  # NaN-free entries exist
        ax.semilogy(epochs, val, label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mse")
    ax.set_title(f"training curve (stop: {report.stop_reason})")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_detections(img: GrayImage, detections: list[Detection], path) -> None:
    """Render the image with detection boxes and scores to an image file."""
    plt = _pyplot()
    from matplotlib import patches

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(img.pixels, cmap="gray", vmin=0, vmax=255)
    for d in detections:
        r = d.rect
        ax.add_patch(
            patches.Rectangle((r.x - 0.5, r.y - 0.5), r.w, r.h, fill=False, edgecolor="red")
        )
        ax.text(r.x, r.y - 1, f"{d.part} {d.score:.3g}", color="red", fontsize=8)
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
