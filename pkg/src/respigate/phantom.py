"""Synthetic multi-slice cine stacks with analytically known motion.

Each slice shows a bright half-plane ("liver") whose upper boundary
translates along the superior-inferior axis with a cos^{2p} breathing
waveform, and a disk ("heart") that rides the same translation while its
radius oscillates at the cardiac frequency. Sub-pixel motion is rendered
by linear interpolation of the edge profile, so mass-center curves are
smooth and, for sub-pixel amplitudes, the noiseless series has provably
tiny rank. Truncated Gaussian noise models a magnitude image.

Every random choice (per-slice breathing phases, per-slice noise) derives
from a single integer seed through numpy's SeedSequence spawning, so equal
seeds give bit-identical stacks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import SiAxis, SiOrientation, SliceSeries, SliceStack
from .errors import ConfigInvalid

LIVER_INTENSITY = 1.0
HEART_INTENSITY = 0.8

# Rest-position geometry as fractions of the image dimensions, plus small
# per-slice offsets so adjacent slices resemble but do not equal each other.
_LIVER_BOUNDARY_FRAC = 0.60
_HEART_ROW_FRAC = 0.35
_HEART_RADIUS_FRAC = 0.12
_BOUNDARY_STEP_PX = 0.5
_HEART_COL_STEP_PX = 0.3

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhantomConfig:
    """Knobs for one synthetic stack; defaults mimic a real-time cine protocol."""

    n_slices: int = 10
    height: int = 192
    width: int = 160
    n_frames: int = 240
    frame_interval: float = 0.042  # seconds
    resp_freq_hz: float = 0.25
    resp_amplitude_px: float = 8.0
    resp_shape_exponent: int = 2  # p in cos^{2p}; larger p = longer exhale plateau
    phase_offsets_rad: tuple[float, ...] | None = None  # None = random per slice
    cardiac_freq_hz: float = 1.2
    cardiac_amplitude_px: float = 3.0
    noise_sigma: float = 0.05  # intensity units; peak intensity is 1.0
    seed: int = 0

    def validate(self) -> "PhantomConfig":
        if self.n_slices < 1:
            raise ConfigInvalid("n_slices must be >= 1")
        if self.height < 8 or self.width < 8:
            raise ConfigInvalid("image must be at least 8x8")
        if self.n_frames < 2:
            raise ConfigInvalid("need at least 2 frames")
        if not (math.isfinite(self.frame_interval) and self.frame_interval > 0):
            raise ConfigInvalid("frame_interval must be positive and finite")
        if not (0.0 < self.resp_freq_hz < 0.8):
            raise ConfigInvalid("resp_freq_hz must lie in (0, 0.8)")
        if self.resp_freq_hz >= self.cardiac_freq_hz:
            raise ConfigInvalid("resp_freq_hz must be below cardiac_freq_hz")
        if self.resp_amplitude_px < 0 or self.cardiac_amplitude_px < 0:
            raise ConfigInvalid("amplitudes must be nonnegative")
        if self.noise_sigma < 0:
            raise ConfigInvalid("noise_sigma must be nonnegative")
        if self.resp_shape_exponent < 1:
            raise ConfigInvalid("resp_shape_exponent must be a positive integer")
        if self.n_frames * self.frame_interval < 1.0 / self.resp_freq_hz:
            raise ConfigInvalid("series must cover at least one respiratory period")
        if self.phase_offsets_rad is not None:
            if len(self.phase_offsets_rad) != self.n_slices:
                raise ConfigInvalid("phase_offsets_rad must have one entry per slice")
            if not all(math.isfinite(p) for p in self.phase_offsets_rad):
                raise ConfigInvalid("phase offsets must be finite")
        self._check_geometry()
        return self

    def _check_geometry(self) -> None:
        """Moving structures must stay inside the image and apart from each other.

        The 6-pixel margin keeps the renderer's shifted bounding boxes strictly
        interior, so its array slices never truncate at an image edge.
        """
        dmax = self.max_abs_displacement()
        margin = 6.0
        b_low = self._boundary_row(0) - dmax - margin
        b_high = self._boundary_row(self.n_slices - 1) + dmax + margin
        if b_low < 0 or b_high > self.height:
            raise ConfigInvalid("liver boundary leaves the image; shrink amplitudes")
        reach = self._heart_radius() + self.cardiac_amplitude_px + margin
        row_lo = self._heart_row() - reach - dmax
        row_hi = self._heart_row() + reach + dmax
        if row_lo < 0:
            raise ConfigInvalid("heart disk leaves the top of the image")
        if row_hi > self._boundary_row(0) - dmax - margin:
            raise ConfigInvalid("heart disk would overlap the liver; shrink it")
        cols = [self._heart_col(j) for j in (0, self.n_slices - 1)]
        if min(cols) - reach < 0 or max(cols) + reach > self.width:
            raise ConfigInvalid("heart disk leaves the image laterally")

    def max_abs_displacement(self) -> float:
        off = _waveform_offset(self.resp_shape_exponent)
        return self.resp_amplitude_px * max(off, 1.0 - off)

    def _boundary_row(self, j: int) -> float:
        return round(_LIVER_BOUNDARY_FRAC * self.height) + 0.5 + _BOUNDARY_STEP_PX * j

    def _heart_row(self) -> float:
        return _HEART_ROW_FRAC * self.height

    def _heart_col(self, j: int) -> float:
        center = 0.5 * self.width
        return center + _HEART_COL_STEP_PX * (j - (self.n_slices - 1) / 2.0)

    def _heart_radius(self) -> float:
        return _HEART_RADIUS_FRAC * min(self.height, self.width)


@dataclass(frozen=True)
class DisplacementModel:
    """Closed-form description of what moves in one slice (rest positions)."""

    slice_index: int
    height: int
    width: int
    boundary_row: float
    heart_center_row: float
    heart_center_col: float
    heart_radius: float

    def moving_fraction(self) -> np.ndarray:
        """(H, W) map of the fraction of each pixel occupied by moving tissue."""
        rows = np.arange(self.height, dtype=np.float64)
        cols = np.arange(self.width, dtype=np.float64)
        liver = np.clip(rows + 1.0 - self.boundary_row, 0.0, 1.0)
        rr, cc = np.meshgrid(rows, cols, indexing="ij")
        dist = np.hypot(rr - self.heart_center_row, cc - self.heart_center_col)
        disk = np.clip(self.heart_radius + 0.5 - dist, 0.0, 1.0)
        return np.clip(liver[:, None] + disk, 0.0, 1.0)


@dataclass(frozen=True)
class GroundTruth:
    """Everything the generator knows that the extractor must rediscover."""

    resp_trace: np.ndarray  # (J, n) true SI displacement, pixels, + = inferior
    trigger_frames: tuple[tuple[int, ...], ...]  # per-slice simulated R-waves
    fields: tuple[DisplacementModel, ...]
    frame_interval: float = field(default=0.042)


def _waveform_offset(p: int) -> float:
    # Time average of cos^{2p}: central binomial coefficient over 4^p.
    return math.comb(2 * p, p) / 4.0**p


def canonical_phase(phase: float) -> float:
    """Reduce a phase to (-pi, pi] and quantize so 2*pi shifts are exact no-ops."""
    return float(np.float32(math.remainder(phase, _TWO_PI)))


def resp_waveform(t, cfg: PhantomConfig, phase: float):
    """Breathing displacement in pixels at time(s) t; zero time average.

    A * (cos^{2p}(pi*f*t + phase) - offset), the standard plateaued breathing
    model; positive values mean inferior motion.
    """
    t = np.asarray(t, dtype=np.float64)
    p = cfg.resp_shape_exponent
    base = np.cos(math.pi * cfg.resp_freq_hz * t + phase) ** (2 * p)
    return cfg.resp_amplitude_px * (base - _waveform_offset(p))


def _slice_phases(cfg: PhantomConfig, entropy: np.random.SeedSequence) -> np.ndarray:
    if cfg.phase_offsets_rad is not None:
        raw = np.asarray(cfg.phase_offsets_rad, dtype=np.float64)
    else:
        rng = np.random.Generator(np.random.PCG64(entropy))
        raw = rng.uniform(0.0, _TWO_PI, cfg.n_slices)
    return np.array([canonical_phase(p) for p in raw], dtype=np.float64)


def simulate_triggers(cfg: PhantomConfig) -> tuple[tuple[int, ...], ...]:
    """Frame indices nearest each multiple of the cardiac period, per slice.

    1-based, strictly increasing; a series shorter than one beat still gets
    the k=0 trigger at frame 1.
    """
    period_frames = 1.0 / (cfg.cardiac_freq_hz * cfg.frame_interval)
    indices: list[int] = []
    k = 0
    while True:
        frame = round(k * period_frames) + 1
        if frame > cfg.n_frames:
            break
        if not indices or frame > indices[-1]:
            indices.append(frame)
        k += 1
    one = tuple(indices)
    return tuple(one for _ in range(cfg.n_slices))


def _render_slice(
    cfg: PhantomConfig, j: int, displacement: np.ndarray
) -> np.ndarray:
    """Noiseless (H, W, n) frames for zero-based slice j."""
    h, w, n = cfg.height, cfg.width, cfg.n_frames
    frames = np.empty((h, w, n), dtype=np.float64)

    # Liver half-plane: per-row coverage is the linearly interpolated edge
    # profile of a boundary at boundary_row + displacement.
    b0 = cfg._boundary_row(j)
    rows = np.arange(h, dtype=np.float64)
    liver = np.clip(rows[:, None] + 1.0 - (b0 + displacement[None, :]), 0.0, 1.0)
    frames[:] = LIVER_INTENSITY * liver[:, None, :]

    # Heart disk: antialiased template at the rest center for the current
    # radius, then shifted along SI by integer rows + a linear blend for the
    # sub-pixel remainder.
    cy, cx = cfg._heart_row(), cfg._heart_col(j)
    r0 = cfg._heart_radius()
    reach = r0 + cfg.cardiac_amplitude_px + 2.0
    top = int(math.floor(cy - reach))
    bot = int(math.ceil(cy + reach)) + 1
    left = max(int(math.floor(cx - reach)), 0)
    right = min(int(math.ceil(cx + reach)) + 1, w)
    rr, cc = np.meshgrid(
        np.arange(top, bot, dtype=np.float64),
        np.arange(left, right, dtype=np.float64),
        indexing="ij",
    )
    dist = np.hypot(rr - cy, cc - cx)
    times = np.arange(n, dtype=np.float64) * cfg.frame_interval
    radius = r0 + cfg.cardiac_amplitude_px * np.sin(
        _TWO_PI * cfg.cardiac_freq_hz * times
    )
    whole = np.floor(displacement).astype(np.int64)
    frac = displacement - whole
    for i in range(n):
        cover = HEART_INTENSITY * np.clip(radius[i] + 0.5 - dist, 0.0, 1.0)
        k = int(whole[i])
        frames[top + k : bot + k, left:right, i] += (1.0 - frac[i]) * cover
        frames[top + k + 1 : bot + k + 1, left:right, i] += frac[i] * cover
    return frames


def generate_phantom(cfg: PhantomConfig) -> tuple[SliceStack, GroundTruth]:
    """Build the stack and its ground truth; deterministic given cfg.seed."""
    cfg.validate()
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_slices + 1)
    phases = _slice_phases(cfg, children[0])
    times = np.arange(cfg.n_frames, dtype=np.float64) * cfg.frame_interval

    slices = []
    traces = np.empty((cfg.n_slices, cfg.n_frames), dtype=np.float64)
    models = []
    for j in range(cfg.n_slices):
        displacement = resp_waveform(times, cfg, float(phases[j]))
        traces[j] = displacement
        frames = _render_slice(cfg, j, displacement)
        if cfg.noise_sigma > 0.0:
            rng = np.random.Generator(np.random.PCG64(children[j + 1]))
            frames += rng.normal(0.0, cfg.noise_sigma, frames.shape)
            np.maximum(frames, 0.0, out=frames)
        slices.append(
            SliceSeries(
                slice_index=j + 1,
                frames=frames,
                frame_interval=cfg.frame_interval,
                si_axis=SiAxis.ROWS,
                si_orientation=SiOrientation.INCREASING_INFERIOR,
            )
        )
        models.append(
            DisplacementModel(
                slice_index=j + 1,
                height=cfg.height,
                width=cfg.width,
                boundary_row=cfg._boundary_row(j),
                heart_center_row=cfg._heart_row(),
                heart_center_col=cfg._heart_col(j),
                heart_radius=cfg._heart_radius(),
            )
        )

    truth = GroundTruth(
        resp_trace=traces,
        trigger_frames=simulate_triggers(cfg),
        fields=tuple(models),
        frame_interval=cfg.frame_interval,
    )
    truth.resp_trace.setflags(write=False)
    return SliceStack(slices=tuple(slices)), truth
