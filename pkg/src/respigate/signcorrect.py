"""Two-step resolution of the per-slice sign ambiguity.

An eigendecomposition fixes each slice's motion trace only up to an
arbitrary +-1, so the extracted traces of a stack may be inverted slice by
slice. Step one makes the signs mutually consistent: adjacent slices image
nearly the same anatomy, so their second spatial modes correlate strongly,
and the sign of that correlation says whether a slice is flipped relative
to its neighbor. Chaining the pairwise signs references every slice to the
first. Step two pins the one remaining global sign to physiology: the
mass-center position of each slice along the superior-inferior axis rises
and falls with breathing, and the slice whose trace agrees best (largest
|correlation|) with its mass-center curve decides the sign applied to all.

Both steps are invariant to the signs the eigensolver happened to produce:
flipping any subset of input traces (together with their spatial modes)
leaves the corrected output bit-identical.
"""

from __future__ import annotations

import math
import warnings
from typing import Sequence

import numpy as np

from .core import (
    CoMCurve,
    RespiratorySignal,
    SignalStage,
    SignReport,
    SiOrientation,
    SliceSeries,
    SliceStack,
    validate_stack,
)
from .errors import (
    AllCurvesDegenerate,
    DegenerateCurveWarning,
    DimensionMismatch,
    NegativeIntensityWarning,
    SingleSlice,
    ValidationError,
    WeakLinkWarning,
    ZeroCorrelation,
    ZeroMass,
    ZeroVariance,
)
from .pca import decompose_series
from .preprocess import FilterSpec, lowpass_temporal

# |r| between neighboring spatial modes below this is flagged as a weak
# chain link; it is a diagnostic, not an error.
DEFAULT_WEAK_LINK_THRESHOLD = 0.2


def pearson(x, y) -> float:
    """Product-moment correlation of two equal-length 1-D vectors.

    Antisymmetric under negation of either argument, bit-exactly: the
    sign-correction algebra relies on pearson(-x, y) == -pearson(x, y).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch(f"length mismatch {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValidationError("need at least 2 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("correlation of a constant vector is undefined")
    return float(dx @ dy) / math.sqrt(sxx * syy)


def _sign(value: float) -> int:
    # Exact zero keeps the current sign; callers decide whether that is fatal.
    return -1 if value < 0.0 else 1


def chain_signs(
    eigen_images: Sequence[np.ndarray],
    v2s: Sequence[RespiratorySignal],
    weak_link_threshold: float = DEFAULT_WEAK_LINK_THRESHOLD,
) -> tuple[list[RespiratorySignal], np.ndarray]:
    """Make trace signs consistent across slices via neighbor-mode correlation.

    Slice 1 is the reference; slice j+1 is multiplied by the cumulative
    product of the signs of the neighbor correlations r_1..r_j, computed
    between the second spatial modes of adjacent slices over all pixels.
    Returns the chained traces and the J-1 neighbor correlations.
    """
    count = len(v2s)
    if len(eigen_images) != count:
        raise DimensionMismatch("one spatial mode per trace required")
    if count == 0:
        raise ValidationError("no slices")
    if count == 1:
        raise SingleSlice("chained sign correction is defined for >= 2 slices")
    for s in v2s:
        if s.stage is not SignalStage.RAW_V2:
            raise ValidationError(f"slice {s.slice_index}: expected raw trace")

    pairwise_r = np.empty(count - 1, dtype=np.float64)
    for j in range(count - 1):
        pairwise_r[j] = pearson(eigen_images[j], eigen_images[j + 1])
        if abs(pairwise_r[j]) < weak_link_threshold:
            warnings.warn(
                f"weak neighbor link between slices {v2s[j].slice_index} and "
                f"{v2s[j + 1].slice_index}: |r|={abs(pairwise_r[j]):.3f}",
                WeakLinkWarning,
                stacklevel=2,
            )

    chained = [v2s[0].advanced(v2s[0].values, SignalStage.CHAIN_CORRECTED)]
    sign = 1
    for j in range(count - 1):
        sign *= _sign(pairwise_r[j])
        values = v2s[j + 1].values if sign == 1 else -v2s[j + 1].values
        chained.append(v2s[j + 1].advanced(values, SignalStage.CHAIN_CORRECTED))
    return chained, pairwise_r


def clamp_nonnegative(series: SliceSeries) -> SliceSeries:
    """Zero out negative intensities without the warning com_curve would emit.

    For use after filtering a magnitude image, where a zero-phase FIR is
    expected to undershoot slightly below zero near the noise floor; the
    mass-center result is identical to letting com_curve clamp.
    """
    if series.frames.min() >= 0.0:
        return series
    return series.with_frames(np.maximum(series.frames, 0.0))


def com_curve(series: SliceSeries, filter_spec: FilterSpec | None = None) -> CoMCurve:
    """Per-frame mass median of the series projected onto the SI axis.

    The projection sums intensity over the non-SI axis; the curve value for
    a frame is the 1-based SI index where cumulative mass first comes
    closest to half the total (ties to the smallest index). Negative
    intensities are clamped to zero with a warning. When pixel index runs
    superior, the reported index is flipped so that larger values always
    mean mass moved inferior.

    Pass filter_spec to low-pass the series first; leave it None when the
    series is already filtered.
    """
    if filter_spec is not None:
        series = lowpass_temporal(series, filter_spec)
    frames = series.frames
    if frames.min() < 0.0:
        warnings.warn(
            f"slice {series.slice_index}: negative intensities clamped to 0 "
            "for mass-center projection",
            NegativeIntensityWarning,
            stacklevel=2,
        )
        frames = np.maximum(frames, 0.0)
    # (L, n) projection: sum over the non-SI image axis.
    axis = 1 if series.si_axis.value == "rows" else 0
    projection = frames.sum(axis=axis)
    total = projection.sum(axis=0)
    if (total == 0.0).any():
        bad = int(np.argmax(total == 0.0)) + 1
        raise ZeroMass(f"slice {series.slice_index}: frame {bad} has zero mass")
    cumulative = np.cumsum(projection, axis=0)
    indices = np.argmin(np.abs(cumulative - 0.5 * total), axis=0)
    values = indices.astype(np.float64) + 1.0
    length = projection.shape[0]
    if series.si_orientation is SiOrientation.INCREASING_SUPERIOR:
        values = (length + 1.0) - values
    return CoMCurve(slice_index=series.slice_index, values=values, axis_length=length)


def global_sign(
    chain_corrected: Sequence[RespiratorySignal],
    com_curves: Sequence[CoMCurve],
    pairwise_r: np.ndarray | None = None,
) -> tuple[list[RespiratorySignal], SignReport]:
    """Apply one overall sign so the traces follow the mass-center curves.

    Correlates every chained trace with its slice's curve, picks the slice
    with the largest |correlation|, and multiplies every trace by that
    correlation's sign. Constant curves score 0 with a warning and sit out
    the vote. Never flips slices individually.
    """
    count = len(chain_corrected)
    if len(com_curves) != count:
        raise DimensionMismatch("one mass-center curve per trace required")
    if count == 0:
        raise ValidationError("no slices")
    for s in chain_corrected:
        if s.stage is not SignalStage.CHAIN_CORRECTED:
            raise ValidationError(f"slice {s.slice_index}: expected chained trace")

    report_warnings: list[str] = []
    com_s = np.empty(count, dtype=np.float64)
    eligible = np.ones(count, dtype=bool)
    for j, (sig, curve) in enumerate(zip(chain_corrected, com_curves)):
        if np.ptp(curve.values) == 0.0:
            com_s[j] = 0.0
            eligible[j] = False
            message = (
                f"slice {sig.slice_index}: constant mass-center curve "
                "excluded from global sign vote"
            )
            warnings.warn(message, DegenerateCurveWarning, stacklevel=2)
            report_warnings.append(message)
            continue
        com_s[j] = pearson(sig.values, curve.values)

    if not eligible.any():
        raise AllCurvesDegenerate("every mass-center curve is constant")
    magnitudes = np.where(eligible, np.abs(com_s), -1.0)
    chosen = int(np.argmax(magnitudes))
    if com_s[chosen] == 0.0:
        raise ZeroCorrelation(
            "best mass-center correlation is exactly zero; sign undecidable"
        )
    applied = _sign(com_s[chosen])

    corrected = [
        s.advanced(s.values if applied == 1 else -s.values, SignalStage.GLOBALLY_CORRECTED)
        for s in chain_corrected
    ]
    if pairwise_r is None:
        pairwise_r = np.empty(0, dtype=np.float64)
    report = SignReport(
        pairwise_r=pairwise_r,
        com_s=com_s,
        chosen_slice=chosen + 1,
        applied_global_sign=applied,
        per_slice_chain_sign=_chain_sign_vector(pairwise_r, count),
        warnings=tuple(report_warnings),
    )
    return corrected, report


def _chain_sign_vector(pairwise_r: np.ndarray, count: int) -> np.ndarray:
    signs = np.ones(count, dtype=np.float64)
    running = 1
    for j in range(min(len(pairwise_r), count - 1)):
        running *= _sign(float(pairwise_r[j]))
        signs[j + 1] = running
    return signs


def apply_sign_correction(
    eigen_images: Sequence[np.ndarray],
    v2s: Sequence[RespiratorySignal],
    com_curves: Sequence[CoMCurve],
    weak_link_threshold: float = DEFAULT_WEAK_LINK_THRESHOLD,
) -> tuple[list[RespiratorySignal], SignReport]:
    """Chain then globally align already-extracted traces."""
    chained, pairwise_r = chain_signs(eigen_images, v2s, weak_link_threshold)
    return global_sign(chained, com_curves, pairwise_r)


def correct_signs(
    stack: SliceStack,
    spec: FilterSpec | None = None,
    weak_link_threshold: float = DEFAULT_WEAK_LINK_THRESHOLD,
) -> tuple[list[RespiratorySignal], SignReport]:
    """Full per-stack pipeline: filter, decompose, chain, globally align.

    The mass-center curves are computed from the same filtered frames the
    decomposition sees, so cardiac-band jitter does not enter the vote.
    """
    validate_stack(stack)
    if len(stack) == 1:
        raise SingleSlice("sign correction is defined for >= 2 slices")
    spec = spec or FilterSpec()

    modes: list[np.ndarray] = []
    raw: list[RespiratorySignal] = []
    curves: list[CoMCurve] = []
    for series in stack:
        filtered = lowpass_temporal(series, spec)
        basis, signal = decompose_series(filtered)
        modes.append(basis.eigen_images[1])
        raw.append(signal)
        curves.append(com_curve(clamp_nonnegative(filtered)))
    return apply_sign_correction(modes, raw, curves, weak_link_threshold)
