"""Agreement between extracted signals and reference traces.

The reference comes from phantom ground truth — either the exact per-slice
waveform or, to mimic a region-of-interest measurement, the area-weighted
mean displacement over a rectangle. Agreement is summarized per slice by
Pearson correlation; a positive coefficient means the sign resolution got
that slice right. The odd-slice experiment reruns the whole sign pipeline
on every second slice to probe robustness to doubled slice gaps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import RespiratorySignal, SignalStage, SliceStack
from .errors import DimensionMismatch, NoGroundTruth, RoiOutOfBounds, ValidationError
from .phantom import GroundTruth
from .preprocess import FilterSpec
from .signcorrect import correct_signs, pearson


@dataclass(frozen=True)
class Roi:
    """Half-open pixel rectangle [top, bottom) x [left, right)."""

    top: int
    bottom: int
    left: int
    right: int

    def __post_init__(self) -> None:
        if self.top < 0 or self.left < 0:
            raise RoiOutOfBounds("ROI indices must be nonnegative")
        if self.bottom <= self.top or self.right <= self.left:
            raise RoiOutOfBounds("ROI must have positive extent")

    def check_within(self, height: int, width: int) -> None:
        if self.bottom > height or self.right > width:
            raise RoiOutOfBounds(
                f"ROI [{self.top}:{self.bottom}, {self.left}:{self.right}] "
                f"exceeds {height}x{width} image"
            )


@dataclass(frozen=True)
class AgreementReport:
    slice_indices: tuple[int, ...]
    per_slice_r: tuple[float, ...]
    mean_r: float
    min_r: float
    max_r: float
    all_positive: bool

    def as_dict(self) -> dict:
        return {
            "slice_indices": list(self.slice_indices),
            "per_slice_r": list(self.per_slice_r),
            "mean_r": self.mean_r,
            "min_r": self.min_r,
            "max_r": self.max_r,
            "all_positive": self.all_positive,
        }

    @classmethod
    def from_correlations(
        cls, slice_indices: Sequence[int], per_slice_r: Sequence[float]
    ) -> "AgreementReport":
        r = [float(v) for v in per_slice_r]
        if not r:
            raise ValidationError("empty correlation list")
        return cls(
            slice_indices=tuple(int(i) for i in slice_indices),
            per_slice_r=tuple(r),
            mean_r=float(np.mean(r)),
            min_r=min(r),
            max_r=max(r),
            all_positive=all(v > 0.0 for v in r),
        )


def roi_reference(gt: GroundTruth, roi: Roi, slice_index: int) -> np.ndarray:
    """Mean SI displacement over the ROI, per frame, from the analytic field.

    Pixels covered fractionally by moving tissue contribute that fraction of
    the waveform, so a half-moving ROI yields half the amplitude.
    """
    if gt is None:
        raise NoGroundTruth("no ground truth available for a reference trace")
    models = [f for f in gt.fields if f.slice_index == slice_index]
    if not models:
        raise ValidationError(f"ground truth has no slice {slice_index}")
    model = models[0]
    roi.check_within(model.height, model.width)
    fraction = model.moving_fraction()[roi.top : roi.bottom, roi.left : roi.right]
    weight = float(fraction.mean())
    return weight * gt.resp_trace[slice_index - 1]


def agreement(
    signals: Sequence[RespiratorySignal], references: Sequence[np.ndarray]
) -> AgreementReport:
    """Per-slice Pearson correlation of corrected signals against references."""
    if len(signals) != len(references):
        raise DimensionMismatch(
            f"{len(signals)} signals vs {len(references)} references"
        )
    if not signals:
        raise ValidationError("nothing to evaluate")
    for s in signals:
        if s.stage is not SignalStage.GLOBALLY_CORRECTED:
            raise ValidationError(f"slice {s.slice_index}: expected corrected signal")
    correlations = [pearson(s.values, ref) for s, ref in zip(signals, references)]
    return AgreementReport.from_correlations(
        [s.slice_index for s in signals], correlations
    )


def odd_slice_experiment(
    stack: SliceStack,
    gt: GroundTruth,
    spec: FilterSpec | None = None,
) -> tuple[AgreementReport, AgreementReport]:
    """Agreement on the full stack versus on slices 1, 3, 5, ... only.

    Doubling the slice gap weakens the neighbor correlations the sign chain
    relies on; the paired reports show whether sign resolution survives it.
    """
    full_signals, _ = correct_signs(stack, spec)
    full = agreement(
        full_signals, [gt.resp_trace[s.slice_index - 1] for s in full_signals]
    )
    odd_stack = stack.odd_slices()
    odd_signals, _ = correct_signs(odd_stack, spec)
    odd = agreement(
        odd_signals, [gt.resp_trace[s.slice_index - 1] for s in odd_signals]
    )
    return full, odd


def render_table(reports: dict[str, AgreementReport]) -> str:
    """Fixed-width text table: one row per run with mean and range of r."""
    header = f"{'Run':<12} {'Mean':>7} {'Range':>17} {'All +':>6}"
    lines = [header, "-" * len(header)]
    for name, rep in reports.items():
        rng = f"{rep.min_r:.3f} - {rep.max_r:.3f}"
        lines.append(
            f"{name:<12} {rep.mean_r:>7.3f} {rng:>17} {'yes' if rep.all_positive else 'NO':>6}"
        )
    return "\n".join(lines) + "\n"
