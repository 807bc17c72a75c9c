"""Heartbeat segmentation and end-expiration / end-inspiration selection.

Triggers (simulated R-waves) cut each slice's frames into beats; each beat
gets a respiratory score — the mean of the corrected trace over its frames
— and the extreme-scoring beats are picked as the end-expiration and
end-inspiration representatives. A stability filter rejects beats whose
within-beat trace range exceeds the signal's interquartile range, i.e.
beats that straddle a breath transition instead of sitting on a plateau.

Every comparison here is exactly antisymmetric under negating the signal,
so flipping the trace and swapping the convention label selects the same
physical beats bit-for-bit.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import RespiratorySignal, SignalStage
from .errors import (
    AllBeatsTransitional,
    BeatTieWarning,
    TooFewBeats,
    TooFewTriggers,
    ValidationError,
)


class BeatConvention(enum.Enum):
    """Which score extreme is labeled end-expiration.

    A label mapping, not physiology: it depends on the orientation the
    mass-center curves impose on the corrected signal (larger = inferior).
    """

    MAX_IS_EE = "max_is_ee"
    MIN_IS_EE = "min_is_ee"


@dataclass(frozen=True)
class Heartbeat:
    slice_index: int
    start_frame: int  # 1-based, inclusive
    end_frame: int  # 1-based, inclusive
    resp_score: float | None = None

    def __post_init__(self) -> None:
        if self.start_frame < 1 or self.end_frame < self.start_frame:
            raise ValidationError(
                f"bad beat span [{self.start_frame}, {self.end_frame}]"
            )

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1

    def values(self, signal: RespiratorySignal) -> np.ndarray:
        if self.end_frame > signal.values.shape[0]:
            raise ValidationError(
                f"beat end {self.end_frame} past signal length "
                f"{signal.values.shape[0]}"
            )
        return signal.values[self.start_frame - 1 : self.end_frame]


@dataclass(frozen=True)
class BeatSelection:
    """Outcome of select_beats for one slice."""

    ee: Heartbeat
    ei: Heartbeat
    scores: tuple[float, ...]
    eligible: tuple[bool, ...]
    iqr: float
    tied: bool


def segment_heartbeats(
    triggers: Sequence[int], n_frames: int, slice_index: int = 0
) -> list[Heartbeat]:
    """Beat k spans [trigger_k, trigger_{k+1} - 1]; partial edges discarded."""
    trig = [int(t) for t in triggers]
    if len(trig) < 2:
        raise TooFewTriggers("need at least 2 triggers to form a beat")
    if any(b <= a for a, b in zip(trig, trig[1:])):
        raise ValidationError("triggers must be strictly increasing")
    if trig[0] < 1 or trig[-1] > n_frames:
        raise ValidationError(f"triggers must lie in [1, {n_frames}]")
    return [
        Heartbeat(slice_index=slice_index, start_frame=a, end_frame=b - 1)
        for a, b in zip(trig, trig[1:])
    ]


def _rank_iqr(values: np.ndarray) -> float:
    """Interquartile range from rank-selected (not interpolated) quartiles.

    The lower quartile takes the floor rank and the upper the ceil rank, so
    negating the input maps each quartile to exactly minus the other and the
    range is reproduced bit-for-bit — interpolated quantiles would break
    that symmetry in the last ulp.
    """
    ordered = np.sort(values)
    m = ordered.shape[0] - 1
    q25 = ordered[m // 4]
    q75 = ordered[-(m // 4) - 1]
    return float(q75 - q25)


def select_beats(
    signal: RespiratorySignal,
    beats: Sequence[Heartbeat],
    convention: BeatConvention = BeatConvention.MAX_IS_EE,
    stability_check: bool = True,
) -> BeatSelection:
    """Pick the end-expiration and end-inspiration beats for one slice.

    Scores each beat by the mean corrected-trace value over its frames and
    returns the extremes (ties to the earlier beat). With stability_check,
    beats whose trace range exceeds the whole signal's interquartile range
    sit out; if that rejects everything, AllBeatsTransitional is raised.
    """
    if signal.stage is not SignalStage.GLOBALLY_CORRECTED:
        raise ValidationError("gating requires a globally corrected signal")
    if len(beats) < 2:
        raise TooFewBeats("need at least 2 beats to pick both extremes")

    scored = []
    ranges = np.empty(len(beats), dtype=np.float64)
    scores = np.empty(len(beats), dtype=np.float64)
    for i, beat in enumerate(beats):
        segment = beat.values(signal)
        scores[i] = segment.mean()
        ranges[i] = np.max(segment) - np.min(segment)
        scored.append(replace(beat, resp_score=float(scores[i])))

    iqr = _rank_iqr(signal.values)
    if stability_check:
        eligible = ranges <= iqr
        if not eligible.any():
            raise AllBeatsTransitional(
                f"slice {signal.slice_index}: every beat's range exceeds the "
                f"signal IQR {iqr:.3g}"
            )
    else:
        eligible = np.ones(len(beats), dtype=bool)

    pool = np.flatnonzero(eligible)
    hi = int(pool[np.argmax(scores[pool])])
    lo = int(pool[np.argmin(scores[pool])])
    if convention is BeatConvention.MAX_IS_EE:
        ee, ei = hi, lo
    else:
        ee, ei = lo, hi

    tied = ee == ei
    if tied:
        warnings.warn(
            f"slice {signal.slice_index}: EE and EI resolve to the same beat "
            f"(frames {scored[ee].start_frame}-{scored[ee].end_frame})",
            BeatTieWarning,
            stacklevel=2,
        )
    return BeatSelection(
        ee=scored[ee],
        ei=scored[ei],
        scores=tuple(float(s) for s in scores),
        eligible=tuple(bool(e) for e in eligible),
        iqr=iqr,
        tied=tied,
    )
