import hashlib
import json

import numpy as np
import pytest

from respigate import (
    GroundTruth,
    IoFailure,
    RespiratorySignal,
    SignalStage,
    SignReport,
    ValidationError,
    generate_phantom,
    read_ground_truth,
    read_signals,
    read_stack,
    read_triggers,
    write_ground_truth,
    write_signals,
    write_stack,
    write_triggers,
)
from respigate.errors import (
    MissingMetadata,
    ShapeMismatchWithMetadata,
    UnsupportedDType,
)
from respigate.io import RunManifest, StageTimer, sha256_file


@pytest.fixture(scope="module")
def phantom(small_phantom_config):
    return generate_phantom(small_phantom_config)


def _report(n_slices=2):
    return SignReport(
        pairwise_r=np.linspace(0.9, 0.95, n_slices - 1),
        com_s=np.linspace(0.8, 0.9, n_slices),
        chosen_slice=1,
        applied_global_sign=-1,
        per_slice_chain_sign=np.ones(n_slices),
        warnings=("something mild",),
    )


def _signals(n_slices=2, n=40, seed=41):
    rng = np.random.default_rng(seed)
    return [
        RespiratorySignal(j + 1, rng.standard_normal(n), SignalStage.GLOBALLY_CORRECTED)
        for j in range(n_slices)
    ]


# ------------------------------------------------------------------ stack

def test_stack_round_trip_bit_exact(phantom, tmp_path):
    stack, _ = phantom
    write_stack(stack, tmp_path / "stack")
    loaded = read_stack(tmp_path / "stack")
    assert len(loaded) == len(stack)
    for a, b in zip(stack, loaded):
        assert np.array_equal(a.frames, b.frames)
        assert a.slice_index == b.slice_index
        assert a.frame_interval == b.frame_interval
        assert a.si_axis is b.si_axis
        assert a.si_orientation is b.si_orientation


def test_read_stack_requires_metadata(tmp_path):
    with pytest.raises(MissingMetadata):
        read_stack(tmp_path)


def test_read_stack_incomplete_metadata(phantom, tmp_path):
    stack, _ = phantom
    d = write_stack(stack, tmp_path / "s")
    meta = json.loads((d / "stack.json").read_text())
    del meta["frame_interval"]
    (d / "stack.json").write_text(json.dumps(meta))
    with pytest.raises(MissingMetadata):
        read_stack(d)


def test_read_stack_missing_slice_file(phantom, tmp_path):
    stack, _ = phantom
    d = write_stack(stack, tmp_path / "s")
    next(d.glob("slice_*.npy")).unlink()
    with pytest.raises(MissingMetadata):
        read_stack(d)


def test_read_stack_shape_mismatch(phantom, tmp_path):
    stack, _ = phantom
    d = write_stack(stack, tmp_path / "s")
    meta = json.loads((d / "stack.json").read_text())
    meta["slices"][0]["height"] += 1
    (d / "stack.json").write_text(json.dumps(meta))
    with pytest.raises(ShapeMismatchWithMetadata):
        read_stack(d)


def test_read_stack_rejects_float32(phantom, tmp_path):
    stack, _ = phantom
    d = write_stack(stack, tmp_path / "s")
    target = sorted(d.glob("slice_*.npy"))[0]
    np.save(target, stack[0].frames.astype(np.float32))
    with pytest.raises(UnsupportedDType):
        read_stack(d)


def test_read_stack_garbage_npy(phantom, tmp_path):
    stack, _ = phantom
    d = write_stack(stack, tmp_path / "s")
    sorted(d.glob("slice_*.npy"))[0].write_bytes(b"not an array at all")
    with pytest.raises(IoFailure):
        read_stack(d)


def test_written_npy_is_version_1(phantom, tmp_path):
    stack, _ = phantom
    d = write_stack(stack, tmp_path / "s")
    with open(sorted(d.glob("slice_*.npy"))[0], "rb") as fh:
        magic = fh.read(8)
    assert magic == b"\x93NUMPY\x01\x00"


# ---------------------------------------------------------------- signals

def test_signals_round_trip(tmp_path):
    signals = _signals()
    report = _report()
    d = write_signals(signals, report, tmp_path / "sig", frame_interval=0.042)
    loaded, loaded_report, interval = read_signals(d)
    assert interval == 0.042
    for a, b in zip(signals, loaded):
        assert a.slice_index == b.slice_index
        assert b.stage is SignalStage.GLOBALLY_CORRECTED
        # CSV quantizes to 9 decimals
        assert np.allclose(a.values, b.values, rtol=0, atol=5e-10)
    assert np.array_equal(loaded_report.pairwise_r, report.pairwise_r)
    assert np.array_equal(loaded_report.com_s, report.com_s)
    assert loaded_report.chosen_slice == report.chosen_slice
    assert loaded_report.applied_global_sign == report.applied_global_sign
    assert loaded_report.warnings == report.warnings


def test_signals_write_read_write_is_stable(tmp_path):
    # Quantization happens exactly once: rewriting what was read back
    # reproduces every byte.
    signals = _signals(n_slices=3, n=77)
    report = _report(3)
    first = write_signals(signals, report, tmp_path / "a", frame_interval=0.042)
    loaded, loaded_report, interval = read_signals(first)
    second = write_signals(loaded, loaded_report, tmp_path / "b", interval)
    for f in sorted(first.iterdir()):
        assert (second / f.name).read_bytes() == f.read_bytes()


def test_write_signals_rejects_uncorrected(tmp_path):
    raw = [RespiratorySignal(1, np.arange(5.0), SignalStage.RAW_V2)]
    with pytest.raises(ValidationError):
        write_signals(raw, _report(1), tmp_path, 0.042)
    with pytest.raises(ValidationError):
        write_signals([], _report(1), tmp_path, 0.042)


def test_read_signals_bad_header(tmp_path):
    d = write_signals(_signals(), _report(), tmp_path / "sig", 0.042)
    bad = next(d.glob("signals_slice_*.csv"))
    bad.write_text("wrong,header,here\n1,0.0,0.5\n")
    with pytest.raises(IoFailure):
        read_signals(d)


# ----------------------------------------------------------- ground truth

def test_ground_truth_round_trip(phantom, tmp_path):
    _, gt = phantom
    d = write_ground_truth(gt, tmp_path / "truth")
    loaded = read_ground_truth(d)
    assert np.array_equal(loaded.resp_trace, gt.resp_trace)
    assert loaded.trigger_frames == gt.trigger_frames
    assert loaded.fields == gt.fields
    assert loaded.frame_interval == gt.frame_interval
    with pytest.raises(ValueError):
        loaded.resp_trace[0, 0] = 1.0


def test_read_ground_truth_missing_trace(phantom, tmp_path):
    _, gt = phantom
    d = write_ground_truth(gt, tmp_path / "truth")
    (d / "resp_trace.npy").unlink()
    with pytest.raises(MissingMetadata):
        read_ground_truth(d)


# --------------------------------------------------------------- triggers

def test_triggers_round_trip(tmp_path):
    path = write_triggers([(1, 21, 41), (1, 21)], tmp_path / "triggers.csv")
    assert read_triggers(path) == {1: [1, 21, 41], 2: [1, 21]}


def test_read_triggers_errors(tmp_path):
    with pytest.raises(MissingMetadata):
        read_triggers(tmp_path / "absent.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("frame,slice\n1,2\n")
    with pytest.raises(IoFailure):
        read_triggers(bad)
    malformed = tmp_path / "malformed.csv"
    malformed.write_text("slice_index,frame_index\n1,notanumber\n")
    with pytest.raises(IoFailure):
        read_triggers(malformed)


# --------------------------------------------------------------- manifest

def test_sha256_known_vector(tmp_path):
    # FIPS 180-2 test vector for "abc"
    p = tmp_path / "abc.txt"
    p.write_bytes(b"abc")
    assert (
        sha256_file(p)
        == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    )


def test_manifest_write_and_dedupe(tmp_path):
    m = RunManifest(command="extract", version="0.1.0", config={"cutoff_hz": 0.8})
    m.add_warning("weak link")
    m.add_warning("weak link")
    m.add_warning("another")
    data_file = tmp_path / "input.bin"
    data_file.write_bytes(b"\x00" * 16)
    m.checksum_inputs([data_file, tmp_path / "not-there.bin"])
    with StageTimer(m, "decompose"):
        pass
    path = m.write(tmp_path / "out")
    payload = json.loads(path.read_text())
    assert payload["warnings"] == ["weak link", "another"]
    assert payload["input_checksums"] == {
        "input.bin": hashlib.sha256(b"\x00" * 16).hexdigest()
    }
    assert payload["error"] is None
    assert payload["timings_ms"]["decompose"] >= 0.0
    assert path.read_text().endswith("\n")


def test_manifest_records_error(tmp_path):
    m = RunManifest(command="gate", version="0.1.0")
    m.error = "DegenerateSpectrum: flat"
    payload = json.loads(m.write(tmp_path).read_text())
    assert payload["error"] == "DegenerateSpectrum: flat"
