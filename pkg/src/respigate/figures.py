"""Matplotlib renderings of signals, agreement, and gating results.

Rendering is best-effort reporting: figures accompany the CSV/JSON outputs
but nothing downstream depends on them. The Agg backend is forced so the
CLI works headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import RespiratorySignal
from .gating import BeatSelection, Heartbeat

_DPI = 110


def _zscore(values: np.ndarray) -> np.ndarray:
    centered = values - values.mean()
    scale = centered.std()
    return centered / scale if scale > 0 else centered


def save_signal_overview(
    signals: Sequence[RespiratorySignal], frame_interval: float, path
) -> Path:
    """Grid of corrected respiratory traces, one panel per slice."""
    path = Path(path)
    cols = 2 if len(signals) > 1 else 1
    rows = (len(signals) + cols - 1) // cols
    fig, axes = plt.subplots(
        rows, cols, figsize=(9, 1.6 * rows + 0.8), sharex=True, squeeze=False
    )
    for ax in axes.ravel():
        ax.set_visible(False)
    for k, signal in enumerate(signals):
        ax = axes[k // cols][k % cols]
        ax.set_visible(True)
        t = np.arange(signal.values.shape[0]) * frame_interval
        ax.plot(t, signal.values, lw=0.9, color="tab:blue")
        ax.set_ylabel(f"slice {signal.slice_index}", fontsize=8)
        ax.tick_params(labelsize=7)
    for ax in axes[-1]:
        if ax.get_visible():
            ax.set_xlabel("time [s]", fontsize=8)
    fig.suptitle("Corrected respiratory signals", fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.97))
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_agreement_figure(
    signals: Sequence[RespiratorySignal],
    references: Sequence[np.ndarray],
    per_slice_r: Sequence[float],
    frame_interval: float,
    path,
) -> Path:
    """Z-scored signal/reference overlays plus a per-slice correlation bar."""
    path = Path(path)
    n = len(signals)
    fig = plt.figure(figsize=(9, 1.5 * n + 2.2))
    grid = fig.add_gridspec(n + 1, 1, height_ratios=[1] * n + [1.4])
    for k, (signal, ref, r) in enumerate(zip(signals, references, per_slice_r)):
        ax = fig.add_subplot(grid[k])
        t = np.arange(signal.values.shape[0]) * frame_interval
        ax.plot(t, _zscore(signal.values), lw=0.9, color="tab:blue", label="extracted")
        ax.plot(t, _zscore(np.asarray(ref)), lw=0.9, ls="--", color="tab:red",
                label="reference")
        ax.set_ylabel(f"slice {signal.slice_index}\nr={r:.3f}", fontsize=7)
        ax.tick_params(labelsize=7)
        if k == 0:
            ax.legend(fontsize=7, loc="upper right", ncol=2)

    ax = fig.add_subplot(grid[-1])
    indices = [s.slice_index for s in signals]
    colors = ["tab:green" if r > 0 else "tab:red" for r in per_slice_r]
    ax.bar([str(i) for i in indices], list(per_slice_r), color=colors)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_ylim(-1.05, 1.05)
    ax.set_xlabel("slice", fontsize=8)
    ax.set_ylabel("Pearson r", fontsize=8)
    ax.tick_params(labelsize=7)
    fig.suptitle("Extracted signal vs reference", fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.98))
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_gating_figure(
    signal: RespiratorySignal,
    beats: Sequence[Heartbeat],
    selection: BeatSelection,
    frame_interval: float,
    path,
) -> Path:
    """One slice's trace with beat boundaries and the chosen EE/EI spans."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(9, 3))
    t = np.arange(signal.values.shape[0]) * frame_interval
    ax.plot(t, signal.values, lw=1.0, color="tab:blue")
    for beat in beats:
        ax.axvline((beat.start_frame - 1) * frame_interval, color="0.8", lw=0.6)
    for beat, color, label in (
        (selection.ee, "tab:green", "EE"),
        (selection.ei, "tab:orange", "EI"),
    ):
        ax.axvspan(
            (beat.start_frame - 1) * frame_interval,
            (beat.end_frame - 1) * frame_interval,
            color=color,
            alpha=0.3,
            label=label,
        )
    ax.set_xlabel("time [s]", fontsize=9)
    ax.set_ylabel("corrected signal", fontsize=9)
    ax.set_title(f"Beat selection, slice {signal.slice_index}", fontsize=11)
    ax.legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
