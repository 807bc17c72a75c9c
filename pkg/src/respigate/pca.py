"""Leading temporal modes of a slice series via its frame Gram matrix.

With M pixels >> n frames, the n x n Gram matrix route is far cheaper than
decomposing the full pixel-by-frame matrix and yields the same temporal
modes: eigenvectors of the Gram matrix are the right singular vectors of
the series. The series is decomposed as-is, without mean-centering, so the
first mode tracks the temporal average and the second the dominant motion
left after low-pass filtering.

The sign of each returned mode is whatever the eigensolver produced; it is
explicitly arbitrary, and resolving it across slices is the job of
`signcorrect`.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .core import (
    EigenBasis,
    RespiratorySignal,
    SignalStage,
    SliceSeries,
    SliceStack,
    validate_stack,
)
from .errors import (
    ConvergenceFailure,
    DegenerateSpectrum,
    DimensionMismatch,
    NonSymmetricInput,
    ValidationError,
)
from .preprocess import FilterSpec, lowpass_temporal

# lambda_2 below this fraction of lambda_1 means no usable motion mode.
DEGENERATE_EIGENVALUE_RATIO = 1e-12

_SYMMETRY_RTOL = 1e-9
_RESIDUAL_RTOL = 1e-8


def gram_matrix(series: SliceSeries) -> np.ndarray:
    """Frame-by-frame Gram matrix of the flattened series; (n, n) PSD."""
    mat = series.as_matrix()
    g = mat.T @ mat
    # dgemm is not exactly symmetric; make it so before eigh.
    return 0.5 * (g + g.T)


def top_eigenvectors(gram: np.ndarray, k: int) -> EigenBasis:
    """Leading k unit eigenvectors of a symmetric PSD matrix, descending.

    Residuals ||G v - lambda v|| are checked against 1e-8 * lambda_1;
    negative eigenvalues within tolerance are clamped to zero.
    """
    gram = np.asarray(gram, dtype=np.float64)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got {gram.shape}")
    n = gram.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k={k} outside [1, {n}]")
    scale = np.abs(gram).max()
    if np.abs(gram - gram.T).max() > _SYMMETRY_RTOL * max(scale, 1.0):
        raise NonSymmetricInput("matrix asymmetry exceeds tolerance")
    sym = 0.5 * (gram + gram.T)
    try:
        eigvals, eigvecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    order = np.argsort(eigvals)[::-1][:k]
    values = eigvals[order]
    vectors = eigvecs[:, order].T
    lead = values[0] if values[0] > 0 else 0.0
    residual = np.abs(sym @ vectors.T - vectors.T * values[None, :]).max()
    if residual > _RESIDUAL_RTOL * max(lead, 1.0):
        raise ConvergenceFailure(
            f"eigenpair residual {residual:.3e} above bound"
        )
    return EigenBasis(vectors=vectors, eigenvalues=np.maximum(values, 0.0))


def eigen_images(series: SliceSeries, basis: EigenBasis) -> EigenBasis:
    """Populate the (k, M) spatial projections of the series onto each mode."""
    mat = series.as_matrix()
    if basis.vectors.shape[1] != mat.shape[1]:
        raise DimensionMismatch(
            f"mode length {basis.vectors.shape[1]} != frame count {mat.shape[1]}"
        )
    return replace(basis, eigen_images=basis.vectors @ mat.T)


def decompose_series(series: SliceSeries, k: int = 2) -> tuple[EigenBasis, RespiratorySignal]:
    """Modes and raw motion trace of one (already filtered) slice.

    The caller is responsible for low-pass filtering; `extract_v2` is the
    frontend that handles it. Raises DegenerateSpectrum when the second
    eigenvalue is negligible against the first.
    """
    if k < 2:
        raise ValidationError("need k >= 2 to isolate a motion mode")
    basis = top_eigenvectors(gram_matrix(series), k)
    lead = basis.eigenvalues[0]
    if lead <= 0.0 or basis.eigenvalues[1] <= DEGENERATE_EIGENVALUE_RATIO * lead:
        raise DegenerateSpectrum(
            f"slice {series.slice_index}: second eigenvalue "
            f"{basis.eigenvalues[1]:.3e} is negligible vs {lead:.3e}"
        )
    basis = eigen_images(series, basis)
    signal = RespiratorySignal(
        slice_index=series.slice_index,
        values=basis.vectors[1],
        stage=SignalStage.RAW_V2,
    )
    return basis, signal


def extract_v2(
    stack: SliceStack, spec: FilterSpec | None = None, k: int = 2
) -> list[tuple[EigenBasis, RespiratorySignal]]:
    """Filter each slice and return its modes plus raw motion trace."""
    validate_stack(stack)
    spec = spec or FilterSpec()
    out = []
    for series in stack:
        out.append(decompose_series(lowpass_temporal(series, spec), k))
    return out
