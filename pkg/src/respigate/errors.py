"""Exception hierarchy and warning categories.

Three error families map onto the CLI exit codes: contract violations in
inputs or configuration (exit 2), structurally valid data that carries no
usable signal (exit 3), and file-level problems (exit 4).
"""


class RespigateError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(RespigateError):
    """Input data or configuration violates a documented contract."""


class DimensionMismatch(ValidationError):
    """Array shapes or slice geometries are inconsistent."""


class EmptyStack(ValidationError):
    """A stack with zero slices was supplied."""


class NonFiniteData(ValidationError):
    """NaN or infinity found where finite values are required."""


class ConfigInvalid(ValidationError):
    """A configuration object fails its own consistency rules."""


class CutoffAboveNyquist(ValidationError):
    """Requested low-pass cutoff at or above the sampling Nyquist rate."""


class SeriesTooShort(ValidationError):
    """Too few frames for the requested filter length."""


class NonSymmetricInput(ValidationError):
    """Matrix expected to be symmetric is not, beyond tolerance."""


class SingleSlice(ValidationError):
    """Neighbor-chained sign correction needs at least two slices."""


class TooFewTriggers(ValidationError):
    """Fewer than two trigger events; no complete beat can be formed."""


class TooFewBeats(ValidationError):
    """Beat selection needs at least two segmented beats."""


class RoiOutOfBounds(ValidationError):
    """Region of interest extends outside the image or is empty."""


class NoGroundTruth(ValidationError):
    """Operation requires synthetic ground truth that is not available."""


class DegenerateDataError(RespigateError):
    """Data is well-formed but degenerate for the requested operation."""


class DegenerateSpectrum(DegenerateDataError):
    """Second eigenvalue is negligible; no motion component to extract."""


class ZeroVariance(DegenerateDataError):
    """Correlation of a constant input is undefined."""


class ZeroMass(DegenerateDataError):
    """A frame has zero total intensity; its mass center is undefined."""


class ZeroCorrelation(DegenerateDataError):
    """Best available correlation is exactly zero; sign is undecidable."""


class AllCurvesDegenerate(DegenerateDataError):
    """Every mass-center curve is constant; global sign is undecidable."""


class AllBeatsTransitional(DegenerateDataError):
    """The stability filter rejected every candidate beat."""


class ConvergenceFailure(DegenerateDataError):
    """Eigensolver failed to converge or produced residuals above bound."""


class IoFailure(RespigateError):
    """Reading or writing a data product failed."""


class MissingMetadata(IoFailure):
    """Stack metadata file absent, unreadable, or referencing absent files."""


class ShapeMismatchWithMetadata(IoFailure):
    """Tensor file dimensions disagree with the metadata sidecar."""


class UnsupportedDType(IoFailure):
    """Tensor file is not 64-bit float."""


class RespigateWarning(UserWarning):
    """Base class for diagnostics that do not stop a run."""


class WeakLinkWarning(RespigateWarning):
    """Neighbor-slice correlation below the configured threshold."""


class DegenerateCurveWarning(RespigateWarning):
    """A constant mass-center curve was excluded from the global sign vote."""


class NegativeIntensityWarning(RespigateWarning):
    """Negative intensities clamped to zero before mass-center projection."""


class BeatTieWarning(RespigateWarning):
    """Beat selection hit a tie; earliest beat used."""
