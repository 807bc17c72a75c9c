"""On-disk formats: tensor stacks, signal CSVs, reports, run manifests.

A stack directory holds one NPY v1.0 float64 tensor per slice plus a
stack.json sidecar carrying the timing and axis metadata; signals go to one
CSV per slice (frame, time_s, value at fixed precision) described by a
signals.json sidecar, with the sign-resolution audit trail in
signreport.json. Everything is written with sorted keys and fixed float
formatting so identical inputs produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    CoMCurve,
    RespiratorySignal,
    SignalStage,
    SignReport,
    SiAxis,
    SiOrientation,
    SliceSeries,
    SliceStack,
    validate_stack,
)
from .errors import (
    IoFailure,
    MissingMetadata,
    ShapeMismatchWithMetadata,
    UnsupportedDType,
    ValidationError,
)
from .phantom import DisplacementModel, GroundTruth

STACK_META = "stack.json"
SIGNALS_META = "signals.json"
SIGN_REPORT = "signreport.json"
TRUTH_META = "truth.json"
TRUTH_TRACE = "resp_trace.npy"
TRIGGERS_CSV = "triggers.csv"
MANIFEST = "manifest.json"

_FLOAT_FMT = "%.9f"


def _dump_json(payload, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_json(path: Path):
    if not path.is_file():
        raise MissingMetadata(f"missing {path.name} in {path.parent}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise IoFailure(f"{path}: invalid JSON ({exc})") from None


def _slice_filename(index: int) -> str:
    return f"slice_{index:03d}.npy"


def write_stack(stack: SliceStack, directory) -> Path:
    """Write one NPY per slice plus stack.json; returns the directory."""
    validate_stack(stack)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for series in stack:
        name = _slice_filename(series.slice_index)
        with open(directory / name, "wb") as fh:
            np.lib.format.write_array(
                fh, np.ascontiguousarray(series.frames), version=(1, 0)
            )
        h, w, n = series.frames.shape
        entries.append(
            {
                "index": series.slice_index,
                "file": name,
                "height": h,
                "width": w,
                "n_frames": n,
            }
        )
    first = stack[0]
    _dump_json(
        {
            "format": "respigate-stack",
            "version": 1,
            "frame_interval": first.frame_interval,
            "si_axis": first.si_axis.value,
            "si_orientation": first.si_orientation.value,
            "slices": entries,
        },
        directory / STACK_META,
    )
    return directory


def read_stack(directory) -> SliceStack:
    """Load and validate a stack directory written by write_stack."""
    directory = Path(directory)
    meta = _load_json(directory / STACK_META)
    try:
        interval = float(meta["frame_interval"])
        axis = SiAxis(meta["si_axis"])
        orientation = SiOrientation(meta["si_orientation"])
        entries = meta["slices"]
    except (KeyError, ValueError) as exc:
        raise MissingMetadata(f"stack.json incomplete or malformed: {exc}") from None
    if not entries:
        raise MissingMetadata("stack.json lists no slices")

    slices = []
    for entry in entries:
        try:
            name = entry["file"]
            expected = (entry["height"], entry["width"], entry["n_frames"])
            index = int(entry["index"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MissingMetadata(f"stack.json slice entry malformed: {exc}") from None
        path = directory / name
        if not path.is_file():
            raise MissingMetadata(f"metadata lists {name} but it is absent")
        try:
            frames = np.load(path, allow_pickle=False)
        except ValueError as exc:
            raise IoFailure(f"{path.name}: not a readable NPY file ({exc})") from None
        if frames.dtype != np.float64:
            raise UnsupportedDType(f"{path.name}: dtype {frames.dtype}, need float64")
        if frames.ndim != 3 or frames.shape != expected:
            raise ShapeMismatchWithMetadata(
                f"{path.name}: shape {frames.shape}, metadata says {expected}"
            )
        slices.append(
            SliceSeries(
                slice_index=index,
                frames=np.ascontiguousarray(frames),
                frame_interval=interval,
                si_axis=axis,
                si_orientation=orientation,
            )
        )
    return validate_stack(SliceStack(slices=tuple(slices)))


def write_signals(
    signals: Sequence[RespiratorySignal],
    report: SignReport,
    directory,
    frame_interval: float,
) -> Path:
    """One CSV per corrected signal (9-decimal fixed point) plus the reports."""
    if not signals:
        raise ValidationError("no signals to write")
    for s in signals:
        if s.stage is not SignalStage.GLOBALLY_CORRECTED:
            raise ValidationError(f"slice {s.slice_index}: signal not corrected yet")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    entries = []
    for s in signals:
        name = f"signals_slice_{s.slice_index:03d}.csv"
        with open(directory / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "time_s", "value"])
            for i, value in enumerate(s.values):
                writer.writerow(
                    [i + 1, _FLOAT_FMT % (i * frame_interval), _FLOAT_FMT % value]
                )
        entries.append({"index": s.slice_index, "file": name})
    _dump_json(
        {
            "format": "respigate-signals",
            "version": 1,
            "frame_interval": frame_interval,
            "stage": SignalStage.GLOBALLY_CORRECTED.value,
            "slices": entries,
        },
        directory / SIGNALS_META,
    )
    _dump_json(
        {
            "pairwise_r": list(report.pairwise_r),
            "com_s": list(report.com_s),
            "chosen_slice": report.chosen_slice,
            "applied_global_sign": report.applied_global_sign,
            "per_slice_chain_sign": list(report.per_slice_chain_sign),
            "warnings": list(report.warnings),
        },
        directory / SIGN_REPORT,
    )
    return directory


def read_signals(directory) -> tuple[list[RespiratorySignal], SignReport, float]:
    """Inverse of write_signals (values quantized to the written precision)."""
    directory = Path(directory)
    meta = _load_json(directory / SIGNALS_META)
    try:
        interval = float(meta["frame_interval"])
        entries = meta["slices"]
    except (KeyError, ValueError) as exc:
        raise MissingMetadata(f"signals.json incomplete: {exc}") from None

    signals = []
    for entry in entries:
        try:
            name, index = entry["file"], int(entry["index"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MissingMetadata(f"signals.json entry malformed: {exc}") from None
        path = directory / name
        if not path.is_file():
            raise MissingMetadata(f"metadata lists {name} but it is absent")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["frame", "time_s", "value"]:
            raise IoFailure(f"{path.name}: unexpected CSV header")
        try:
            values = np.array([float(r[2]) for r in rows[1:]], dtype=np.float64)
        except (IndexError, ValueError) as exc:
            raise IoFailure(f"{path.name}: malformed row ({exc})") from None
        signals.append(
            RespiratorySignal(
                slice_index=index,
                values=values,
                stage=SignalStage.GLOBALLY_CORRECTED,
            )
        )

    raw = _load_json(directory / SIGN_REPORT)
    try:
        report = SignReport(
            pairwise_r=np.array(raw["pairwise_r"], dtype=np.float64),
            com_s=np.array(raw["com_s"], dtype=np.float64),
            chosen_slice=int(raw["chosen_slice"]),
            applied_global_sign=int(raw["applied_global_sign"]),
            per_slice_chain_sign=np.array(
                raw["per_slice_chain_sign"], dtype=np.float64
            ),
            warnings=tuple(raw["warnings"]),
        )
    except KeyError as exc:
        raise MissingMetadata(f"signreport.json missing key {exc}") from None
    return signals, report, interval


def write_ground_truth(gt: GroundTruth, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / TRUTH_TRACE, "wb") as fh:
        np.lib.format.write_array(
            fh, np.ascontiguousarray(gt.resp_trace), version=(1, 0)
        )
    _dump_json(
        {
            "format": "respigate-truth",
            "version": 1,
            "frame_interval": gt.frame_interval,
            "trigger_frames": [list(t) for t in gt.trigger_frames],
            "fields": [
                {
                    "slice_index": f.slice_index,
                    "height": f.height,
                    "width": f.width,
                    "boundary_row": f.boundary_row,
                    "heart_center_row": f.heart_center_row,
                    "heart_center_col": f.heart_center_col,
                    "heart_radius": f.heart_radius,
                }
                for f in gt.fields
            ],
        },
        directory / TRUTH_META,
    )
    return directory


def read_ground_truth(directory) -> GroundTruth:
    directory = Path(directory)
    meta = _load_json(directory / TRUTH_META)
    trace_path = directory / TRUTH_TRACE
    if not trace_path.is_file():
        raise MissingMetadata(f"missing {TRUTH_TRACE} in {directory}")
    trace = np.load(trace_path, allow_pickle=False)
    if trace.dtype != np.float64:
        raise UnsupportedDType(f"{TRUTH_TRACE}: dtype {trace.dtype}, need float64")
    try:
        gt = GroundTruth(
            resp_trace=trace,
            trigger_frames=tuple(tuple(int(i) for i in t) for t in meta["trigger_frames"]),
            fields=tuple(DisplacementModel(**f) for f in meta["fields"]),
            frame_interval=float(meta["frame_interval"]),
        )
    except (KeyError, TypeError) as exc:
        raise MissingMetadata(f"truth.json incomplete: {exc}") from None
    gt.resp_trace.setflags(write=False)
    return gt


def write_triggers(trigger_frames: Sequence[Sequence[int]], path) -> Path:
    """CSV of slice_index, frame_index rows (slices are 1-based)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slice_index", "frame_index"])
        for j, frames in enumerate(trigger_frames, start=1):
            for frame in frames:
                writer.writerow([j, int(frame)])
    return path


def read_triggers(path) -> dict[int, list[int]]:
    path = Path(path)
    if not path.is_file():
        raise MissingMetadata(f"trigger file {path} not found")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["slice_index", "frame_index"]:
        raise IoFailure(f"{path.name}: expected header slice_index,frame_index")
    triggers: dict[int, list[int]] = {}
    for row in rows[1:]:
        try:
            j, frame = int(row[0]), int(row[1])
        except (IndexError, ValueError) as exc:
            raise IoFailure(f"{path.name}: malformed row {row} ({exc})") from None
        triggers.setdefault(j, []).append(frame)
    return triggers


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Audit record of one CLI run; written even when the run fails."""

    command: str
    version: str
    config: dict = field(default_factory=dict)
    input_checksums: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    timings_ms: dict = field(default_factory=dict)
    error: str | None = None

    def add_warning(self, message: str) -> None:
        if message not in self.warnings:
            self.warnings.append(message)

    def checksum_inputs(self, paths: Sequence) -> None:
        for p in paths:
            p = Path(p)
            if p.is_file():
                self.input_checksums[p.name] = sha256_file(p)

    def write(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        payload = {
            "command": self.command,
            "version": self.version,
            "config": self.config,
            "input_checksums": self.input_checksums,
            "warnings": self.warnings,
            "timings_ms": self.timings_ms,
            "error": self.error,
        }
        _dump_json(payload, directory / MANIFEST)
        return directory / MANIFEST


class StageTimer:
    """Accumulates wall-clock stage durations into a manifest."""

    def __init__(self, manifest: RunManifest, stage: str):
        self._manifest = manifest
        self._stage = stage

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        elapsed = (time.perf_counter() - self._start) * 1000.0
        self._manifest.timings_ms[self._stage] = round(elapsed, 3)
        return False
