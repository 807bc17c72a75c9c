"""Temporal low-pass filtering of a slice series.

Pixel time courses are filtered with a Hamming-windowed-sinc FIR applied
symmetrically (zero phase) under mirror-reflection padding, so breathing-band
content keeps its timing while cardiac-band content is suppressed. Zero phase
matters: downstream stages compare traces across slices and against
mass-center curves, and any group delay would bias those correlations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps
from scipy.fft import next_fast_len

from .core import SliceSeries
from .errors import ConfigInvalid, CutoffAboveNyquist, SeriesTooShort

# Empirical Hamming main-lobe width: transition band ~ 3.3 / numtaps of the
# sampling rate. Stopband floor for Hamming is ~53 dB and not tunable.
_HAMMING_TRANSITION_FACTOR = 3.3
_HAMMING_STOPBAND_DB = 53.0

# Chunk rows so spectra never hold more than ~50 MB at once.
_FILTER_CHUNK_ROWS = 8192


class FilterMode(enum.Enum):
    ZERO_PHASE_FIR = "zero_phase_fir"


@dataclass(frozen=True)
class FilterSpec:
    """Low-pass design parameters.

    cutoff_hz sits at the half-amplitude point; the transition band extends
    transition_width_hz/2 to either side of it.
    """

    cutoff_hz: float = 0.8
    transition_width_hz: float = 0.4
    min_stopband_atten_db: float = 40.0
    mode: FilterMode = FilterMode.ZERO_PHASE_FIR

    def validate(self, frame_interval: float) -> None:
        nyquist = 0.5 / frame_interval
        if not (0.0 < self.cutoff_hz < nyquist):
            raise CutoffAboveNyquist(
                f"cutoff {self.cutoff_hz} Hz outside (0, {nyquist:.4g}) Hz"
            )
        if self.transition_width_hz <= 0.0:
            raise ConfigInvalid("transition_width_hz must be positive")
        if self.min_stopband_atten_db > _HAMMING_STOPBAND_DB:
            raise ConfigInvalid(
                f"Hamming window cannot exceed ~{_HAMMING_STOPBAND_DB:.0f} dB "
                f"stopband attenuation (requested {self.min_stopband_atten_db})"
            )
        if self.mode is not FilterMode.ZERO_PHASE_FIR:
            raise ConfigInvalid(f"unsupported filter mode {self.mode}")


def design_taps(spec: FilterSpec, frame_interval: float) -> np.ndarray:
    """Odd-length symmetric FIR taps with unit DC gain."""
    spec.validate(frame_interval)
    fs = 1.0 / frame_interval
    numtaps = int(np.ceil(_HAMMING_TRANSITION_FACTOR * fs / spec.transition_width_hz))
    if numtaps % 2 == 0:
        numtaps += 1
    numtaps = max(numtaps, 3)
    taps = sps.firwin(numtaps, spec.cutoff_hz, window="hamming", fs=fs)
    # firwin's window evaluation is palindromic only to the last ulp;
    # averaging with the mirror makes the linear-phase property exact.
    return 0.5 * (taps + taps[::-1])


def _filter_rows(mat: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Centered convolution of each row with symmetric taps, mirror-padded.

    FFT-based; per-row results are independent of the chunking, so the
    output is bit-identical however the rows are batched.
    """
    half = (len(taps) - 1) // 2
    n = mat.shape[1]
    fft_len = next_fast_len(n + 2 * half + len(taps) - 1)
    taps_spec = np.fft.rfft(taps, fft_len)
    out = np.empty_like(mat)
    for lo in range(0, mat.shape[0], _FILTER_CHUNK_ROWS):
        hi = min(lo + _FILTER_CHUNK_ROWS, mat.shape[0])
        padded = np.pad(mat[lo:hi], ((0, 0), (half, half)), mode="reflect")
        spec_rows = np.fft.rfft(padded, fft_len, axis=1)
        spec_rows *= taps_spec
        full = np.fft.irfft(spec_rows, fft_len, axis=1)
        out[lo:hi] = full[:, len(taps) - 1 : len(taps) - 1 + n]
    return out


def lowpass_temporal(series: SliceSeries, spec: FilterSpec) -> SliceSeries:
    """Filter every pixel's time course; shape and metadata unchanged."""
    taps = design_taps(spec, series.frame_interval)
    half = (len(taps) - 1) // 2
    if series.n_frames <= half:
        raise SeriesTooShort(
            f"{series.n_frames} frames < filter half-length {half} + 1"
        )
    h, w, n = series.frames.shape
    filtered = _filter_rows(series.as_matrix(), taps)
    return series.with_frames(filtered.reshape(h, w, n))
