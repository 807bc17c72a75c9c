"""Domain types shared across the pipeline.

A slice is stored as an (H, W, n) tensor of n frames. Every decomposition
works on the flattened (M, n) pixel-by-frame matrix with M = H*W; the
flattening is row-major over rows then columns, fixed package-wide so that
spatial modes of neighboring slices stay pixel-wise comparable.

All types are immutable after construction. Constructors take ownership of
the arrays they are given and mark them read-only; pass a copy if you need
to keep mutating the original.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyStack,
    NonFiniteData,
    ValidationError,
)


class SiAxis(enum.Enum):
    """Image axis that runs superior-inferior."""

    ROWS = "rows"
    COLS = "cols"


class SiOrientation(enum.Enum):
    """Patient direction of increasing pixel index along the SI axis."""

    INCREASING_INFERIOR = "increasing_inferior"
    INCREASING_SUPERIOR = "increasing_superior"


class SignalStage(enum.Enum):
    """Processing stage of a per-slice respiratory trace."""

    RAW_V2 = "raw_v2"
    CHAIN_CORRECTED = "chain_corrected"
    GLOBALLY_CORRECTED = "globally_corrected"


_STAGE_ORDER = {
    SignalStage.RAW_V2: 0,
    SignalStage.CHAIN_CORRECTED: 1,
    SignalStage.GLOBALLY_CORRECTED: 2,
}


def _own_array(arr, dtype=np.float64) -> np.ndarray:
    out = np.asarray(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SliceSeries:
    """One slice's image time series plus acquisition metadata.

    frames: (H, W, n) intensities, converted to float64 on construction
    (Gram-matrix conditioning requires full precision regardless of the
    input dtype).
    frame_interval: seconds between consecutive frames.
    """

    slice_index: int
    frames: np.ndarray
    frame_interval: float
    si_axis: SiAxis = SiAxis.ROWS
    si_orientation: SiOrientation = SiOrientation.INCREASING_INFERIOR

    def __post_init__(self):
        object.__setattr__(self, "frames", _own_array(self.frames))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.frames.shape[0] * self.frames.shape[1]

    @property
    def si_length(self) -> int:
        """Pixel count along the superior-inferior axis."""
        return self.frames.shape[0 if self.si_axis is SiAxis.ROWS else 1]

    def as_matrix(self) -> np.ndarray:
        """Flattened (M, n) pixel-by-frame view, row-major over H then W."""
        h, w, n = self.frames.shape
        return self.frames.reshape(h * w, n)

    def frame_times(self) -> np.ndarray:
        """Frame acquisition times in seconds; frame 1 is t = 0."""
        return np.arange(self.n_frames, dtype=np.float64) * self.frame_interval

    def with_frames(self, frames: np.ndarray) -> "SliceSeries":
        """Same metadata, new pixel data."""
        return SliceSeries(
            slice_index=self.slice_index,
            frames=frames,
            frame_interval=self.frame_interval,
            si_axis=self.si_axis,
            si_orientation=self.si_orientation,
        )


def matrix_to_frames(matrix: np.ndarray, height: int, width: int) -> np.ndarray:
    """Inverse of SliceSeries.as_matrix; exact round-trip."""
    return matrix.reshape(height, width, matrix.shape[1])


@dataclass(frozen=True)
class SliceStack:
    """Ordered slices; list order is the spatial adjacency order."""

    slices: tuple

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(self.slices))

    def __len__(self) -> int:
        return len(self.slices)

    def __iter__(self):
        return iter(self.slices)

    def __getitem__(self, i):
        return self.slices[i]

    def odd_slices(self) -> "SliceStack":
        """Substack of positions 1, 3, 5, ... (doubled inter-slice gap)."""
        return SliceStack(self.slices[0::2])


@dataclass(frozen=True)
class EigenBasis:
    """Leading temporal modes of one slice.

    vectors: (k, n) unit-norm temporal modes, eigenvalue-descending.
    eigenvalues: (k,) nonnegative, descending.
    eigen_images: (k, M) spatial projections of the series onto each mode,
    or None until populated.
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray
    eigen_images: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "vectors", _own_array(self.vectors))
        object.__setattr__(self, "eigenvalues", _own_array(self.eigenvalues))
        if self.eigen_images is not None:
            object.__setattr__(self, "eigen_images", _own_array(self.eigen_images))

    @property
    def k(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class RespiratorySignal:
    """Per-slice respiratory trace at a known correction stage.

    values inherits unit norm from the temporal mode it came from; sign
    flips preserve it.
    """

    slice_index: int
    values: np.ndarray
    stage: SignalStage

    def __post_init__(self):
        object.__setattr__(self, "values", _own_array(self.values))

    def advanced(self, values: np.ndarray, stage: SignalStage) -> "RespiratorySignal":
        """New signal one stage further along; rejects stage skips/reversals."""
        if _STAGE_ORDER[stage] != _STAGE_ORDER[self.stage] + 1:
            raise ValidationError(
                f"invalid stage transition {self.stage.value} -> {stage.value}"
            )
        return RespiratorySignal(self.slice_index, values, stage)


@dataclass(frozen=True)
class CoMCurve:
    """Per-frame mass-median position along the SI axis, in pixel indices.

    Values are 1-based indices in [1, axis_length] and increase toward the
    patient-inferior direction regardless of image orientation.
    """

    slice_index: int
    values: np.ndarray
    axis_length: int

    def __post_init__(self):
        object.__setattr__(self, "values", _own_array(self.values))


@dataclass(frozen=True)
class SignReport:
    """Outcome of the two-step sign correction.

    pairwise_r: neighbor correlations r over the J-1 adjacent slice pairs.
    com_s: per-slice correlation s between the chained trace and the
    mass-center curve (0.0 marks curves excluded as constant).
    chosen_slice: 1-based position of the slice whose |s| won the vote.
    per_slice_chain_sign: cumulative neighbor-sign product applied to each
    slice in step one.
    """

    pairwise_r: np.ndarray
    com_s: np.ndarray
    chosen_slice: int
    applied_global_sign: int
    per_slice_chain_sign: np.ndarray
    warnings: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "pairwise_r", _own_array(self.pairwise_r))
        object.__setattr__(self, "com_s", _own_array(self.com_s))
        object.__setattr__(
            self, "per_slice_chain_sign", _own_array(self.per_slice_chain_sign)
        )
        object.__setattr__(self, "warnings", tuple(self.warnings))


def _validate_series(s: SliceSeries) -> None:
    if s.frames.ndim != 3:
        raise DimensionMismatch(
            f"slice {s.slice_index}: frames must be (H, W, n), got {s.frames.shape}"
        )
    h, w, n = s.frames.shape
    if h < 1 or w < 1:
        raise DimensionMismatch(f"slice {s.slice_index}: empty image plane {h}x{w}")
    if n < 2:
        raise ValidationError(f"slice {s.slice_index}: needs >= 2 frames, got {n}")
    if not np.isfinite(s.frame_interval) or s.frame_interval <= 0:
        raise ValidationError(
            f"slice {s.slice_index}: frame_interval must be positive and finite"
        )
    if not np.isfinite(s.frames).all():
        raise NonFiniteData(f"slice {s.slice_index}: non-finite intensity")


def validate_stack(stack: SliceStack) -> SliceStack:
    """Check every stack invariant; return the stack unchanged if all hold.

    Accepts single-slice stacks (they are rejected later, by chain
    correction, with a dedicated error). Idempotent.
    """
    if len(stack) == 0:
        raise EmptyStack("stack has no slices")
    for s in stack:
        if not isinstance(s, SliceSeries):
            raise ValidationError(f"stack entries must be SliceSeries, got {type(s)!r}")
        _validate_series(s)
    first = stack[0]
    for s in stack:
        if s.frames.shape != first.frames.shape:
            raise DimensionMismatch(
                f"slice {s.slice_index} shape {s.frames.shape} differs from "
                f"slice {first.slice_index} shape {first.frames.shape}"
            )
        if s.si_axis is not first.si_axis or s.si_orientation is not first.si_orientation:
            raise DimensionMismatch(
                f"slice {s.slice_index}: SI axis/orientation metadata differs; "
                "spatial modes would not be pixel-wise comparable"
            )
    return stack
