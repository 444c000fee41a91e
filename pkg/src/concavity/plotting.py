"""Figures and overlays written next to the tabular outputs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image, PngImagePlugin

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import SweepTable  # noqa: E402

BLUE = (0, 0, 255)
RED = (255, 0, 0)


def plot_sweep(table: SweepTable, path: str | Path, title: str | None = None, metadata: dict | None = None) -> None:
    thetas = [r.theta for r in table.rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(thetas, [r.f1 for r in table.rows], "o-", color="k", label="F1")
    ax.plot(thetas, [r.precision for r in table.rows], "s--", color="tab:blue", ms=4, label="precision")
    ax.plot(thetas, [r.recall for r in table.rows], "^--", color="tab:red", ms=4, label="recall")
    ax.set_xlabel(r"matching threshold $\theta$ (px)")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1.02)
    ax.set_xticks(thetas)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right", frameon=False)
    ax.set_title(title or f"MED {table.med_mean:.3f} px, STD {table.med_std:.3f} px")
    fig.tight_layout()
    meta = {"Software": "concavity"}
    if metadata:
        meta["Description"] = json.dumps(metadata, sort_keys=True)
    fig.savefig(path, dpi=100, metadata=meta)
    plt.close(fig)


def disk_offsets(radius: float = 1.5) -> list[tuple[int, int]]:
    r = int(np.ceil(radius))
    return [(dc, dr) for dr in range(-r, r + 1) for dc in range(-r, r + 1) if dc * dc + dr * dr <= radius * radius]


def overlay(mask: np.ndarray, gt=(), pred=(), radius: float = 1.5) -> np.ndarray:
    """RGB image: object white on black, ground truth blue and detections red.

    Each point is drawn as a disk of pixels around the pixel containing it;
    detections are drawn last.
    """
    rgb = np.repeat((np.asarray(mask, dtype=bool).astype(np.uint8) * 255)[..., None], 3, axis=2)
    h, w = rgb.shape[:2]
    offs = disk_offsets(radius)
    for pts, color in ((gt, BLUE), (pred, RED)):
        for x, y in pts:
            c0, r0 = int(np.floor(x)), int(np.floor(y))
            for dc, dr in offs:
                c, r = c0 + dc, r0 + dr
                if 0 <= r < h and 0 <= c < w:
                    rgb[r, c] = color
    return rgb


def save_rgb(rgb: np.ndarray, path: str | Path, metadata: dict | None = None) -> None:
    info = PngImagePlugin.PngInfo()
    if metadata:
        info.add_text("concavity", json.dumps(metadata, sort_keys=True))
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG", pnginfo=info)
