"""Respiratory self-gating for multi-slice real-time cine MRI series.

Extracts a per-slice respiratory motion signal as the second temporal
eigenvector of each slice's pixel-by-frame matrix (after temporal low-pass
filtering), resolves the per-slice sign ambiguity by chaining neighbor
eigen-image correlations and anchoring the remaining global sign to
center-of-mass curves, and uses the corrected signals to pick
end-expiration / end-inspiration heartbeats.
"""

from .core import (
    CoMCurve,
    EigenBasis,
    RespiratorySignal,
    SiAxis,
    SignalStage,
    SignReport,
    SiOrientation,
    SliceSeries,
    SliceStack,
    matrix_to_frames,
    validate_stack,
)
from .errors import (
    AllBeatsTransitional,
    AllCurvesDegenerate,
    ConfigInvalid,
    CutoffAboveNyquist,
    DegenerateDataError,
    DegenerateSpectrum,
    DimensionMismatch,
    IoFailure,
    NoGroundTruth,
    RespigateError,
    RespigateWarning,
    RoiOutOfBounds,
    SingleSlice,
    TooFewBeats,
    TooFewTriggers,
    ValidationError,
    WeakLinkWarning,
    ZeroCorrelation,
    ZeroMass,
    ZeroVariance,
)
from .evaluate import (
    AgreementReport,
    Roi,
    agreement,
    odd_slice_experiment,
    render_table,
    roi_reference,
)
from .gating import (
    BeatConvention,
    BeatSelection,
    Heartbeat,
    segment_heartbeats,
    select_beats,
)
from .io import (
    RunManifest,
    read_ground_truth,
    read_signals,
    read_stack,
    read_triggers,
    sha256_file,
    write_ground_truth,
    write_signals,
    write_stack,
    write_triggers,
)
from .pca import (
    decompose_series,
    eigen_images,
    extract_v2,
    gram_matrix,
    top_eigenvectors,
)
from .phantom import (
    GroundTruth,
    PhantomConfig,
    generate_phantom,
    resp_waveform,
    simulate_triggers,
)
from .preprocess import FilterMode, FilterSpec, design_taps, lowpass_temporal
from .signcorrect import (
    apply_sign_correction,
    chain_signs,
    clamp_nonnegative,
    com_curve,
    correct_signs,
    global_sign,
    pearson,
)

__version__ = "0.1.0"

__all__ = [
    "AgreementReport",
    "AllBeatsTransitional",
    "AllCurvesDegenerate",
    "BeatConvention",
    "BeatSelection",
    "CoMCurve",
    "ConfigInvalid",
    "CutoffAboveNyquist",
    "DegenerateDataError",
    "DegenerateSpectrum",
    "DimensionMismatch",
    "EigenBasis",
    "FilterMode",
    "FilterSpec",
    "GroundTruth",
    "Heartbeat",
    "IoFailure",
    "NoGroundTruth",
    "PhantomConfig",
    "RespigateError",
    "RespigateWarning",
    "RespiratorySignal",
    "Roi",
    "RoiOutOfBounds",
    "RunManifest",
    "SiAxis",
    "SiOrientation",
    "SignReport",
    "SignalStage",
    "SingleSlice",
    "SliceSeries",
    "SliceStack",
    "TooFewBeats",
    "TooFewTriggers",
    "ValidationError",
    "WeakLinkWarning",
    "ZeroCorrelation",
    "ZeroMass",
    "ZeroVariance",
    "agreement",
    "apply_sign_correction",
    "chain_signs",
    "clamp_nonnegative",
    "com_curve",
    "correct_signs",
    "decompose_series",
    "design_taps",
    "eigen_images",
    "extract_v2",
    "generate_phantom",
    "global_sign",
    "gram_matrix",
    "lowpass_temporal",
    "matrix_to_frames",
    "odd_slice_experiment",
    "pearson",
    "read_ground_truth",
    "read_signals",
    "read_stack",
    "read_triggers",
    "render_table",
    "resp_waveform",
    "roi_reference",
    "segment_heartbeats",
    "select_beats",
    "sha256_file",
    "simulate_triggers",
    "top_eigenvectors",
    "validate_stack",
    "write_ground_truth",
    "write_signals",
    "write_stack",
    "write_triggers",
    "__version__",
]
