"""Matplotlib charts for experiment, ablation and dataset reports."""

from __future__ import annotations

import math
from io import BytesIO
from pathlib import Path
from typing import Dict, Sequence

import matplotlib

matplotlib.use("Agg")  # Non-interactive backend
import matplotlib.pyplot as plt  # noqa: E402

# Stable element ids so identical inputs give identical SVG bytes
matplotlib.rcParams["svg.hashsalt"] = "osfuse"

FIG_WIDTH_IN = 170 / 25.4
FIG_HEIGHT_IN = 70 / 25.4
COLORS = {"optical": "#1f77b4", "sar": "#d62728", "fused": "#2ca02c"}


def _figure():
    fig, ax = plt.subplots(figsize=(FIG_WIDTH_IN, FIG_HEIGHT_IN))
    ax.set_facecolor("white")
    fig.patch.set_facecolor("white")
    ax.grid(True, alpha=0.4, linestyle="-", linewidth=0.5)
    return fig, ax


def accuracy_curves(curves: Dict[str, Sequence[float]], title: str = "Held-out accuracy"):
    """One line per model kind, accuracy in percent against epoch."""
    fig, ax = _figure()
    for kind, values in curves.items():
        epochs = range(1, len(values) + 1)
        ax.plot(epochs, values, color=COLORS.get(kind), linewidth=1.5, label=kind)
    ax.axhline(50.0, color="#8b949e", linestyle="--", linewidth=1.0)
    ax.set_xlabel("Epoch", fontsize=10)
    ax.set_ylabel("Accuracy [%]", fontsize=11, fontweight="bold")
    ax.set_ylim(0, 100)
    ax.set_title(title, fontsize=11)
    ax.legend(fontsize=9, loc="lower right")
    fig.tight_layout()
    return fig


def bar_chart(values: Dict[str, float], ylabel: str, title: str, color: str = "#58a6ff"):
    fig, ax = _figure()
    names = list(values)
    ax.bar(range(len(names)), [values[n] for n in names], color=color)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, fontsize=9, rotation=20 if len(names) > 6 else 0)
    ax.set_ylabel(ylabel, fontsize=11, fontweight="bold")
    ax.set_title(title, fontsize=11)
    fig.tight_layout()
    return fig


def angle_histogram(edges: Sequence[float], counts: Sequence[int]):
    fig, ax = _figure()
    lows = [math.degrees(e) for e in edges[:-1]]
    width = math.degrees(edges[1] - edges[0]) if len(edges) > 1 else 5.0
    ax.bar(lows, counts, width=width, align="edge", color="#a371f7", edgecolor="white")
    ax.set_xlabel("Angle [deg]", fontsize=10)
    ax.set_ylabel("Instances", fontsize=11, fontweight="bold")
    ax.set_title("Angle distribution", fontsize=11)
    fig.tight_layout()
    return fig


def save_svg(fig, path: Path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None}, facecolor="white")
    plt.close(fig)
    return path


def png_buffer(fig, dpi: int = 200) -> BytesIO:
    """Render to PNG in memory for embedding in a PDF."""
    buf = BytesIO()
    fig.savefig(buf, format="png", dpi=dpi, bbox_inches="tight", facecolor="white", edgecolor="none")
    buf.seek(0)
    plt.close(fig)
    return buf
