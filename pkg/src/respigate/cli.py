"""Command-line pipeline: phantom -> extract -> gate / evaluate.

Every run writes a manifest.json next to its outputs recording the tool
version, the effective configuration, input checksums, captured warnings,
and stage timings — also when the run fails, with the error recorded.
Exit codes: 0 success, 2 invalid input/configuration, 3 degenerate data,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .core import SignReport
from .errors import (
    ConfigInvalid,
    DegenerateDataError,
    IoFailure,
    ValidationError,
)
from .evaluate import AgreementReport, Roi, agreement, odd_slice_experiment, render_table, roi_reference
from .gating import BeatConvention, segment_heartbeats, select_beats
from .io import (
    MANIFEST,
    RunManifest,
    StageTimer,
    read_ground_truth,
    read_signals,
    read_stack,
    read_triggers,
    write_ground_truth,
    write_signals,
    write_stack,
    write_triggers,
)
from .pca import decompose_series
from .phantom import PhantomConfig, generate_phantom
from .preprocess import FilterSpec, lowpass_temporal
from .signcorrect import (
    DEFAULT_WEAK_LINK_THRESHOLD,
    apply_sign_correction,
    clamp_nonnegative,
    com_curve,
)

log = logging.getLogger("respigate")


def _setup_logging() -> None:
    level = os.environ.get("RESPIGATE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _filter_spec(args: argparse.Namespace) -> FilterSpec:
    return FilterSpec(
        cutoff_hz=args.cutoff_hz,
        transition_width_hz=args.transition_width_hz,
    )


def _parse_roi(text: str) -> Roi:
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigInvalid("--roi expects TOP:BOTTOM:LEFT:RIGHT")
    try:
        top, bottom, left, right = (int(p) for p in parts)
    except ValueError:
        raise ConfigInvalid("--roi parts must be integers") from None
    return Roi(top=top, bottom=bottom, left=left, right=right)


def _load_phantom_config(args: argparse.Namespace) -> PhantomConfig:
    merged: dict = {}
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise IoFailure(f"config file {path} not found")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise IoFailure(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise ConfigInvalid("phantom config must be a JSON object")
        merged.update(loaded)
    if args.seed is not None:
        merged["seed"] = args.seed
    if "phase_offsets_rad" in merged and merged["phase_offsets_rad"] is not None:
        merged["phase_offsets_rad"] = tuple(merged["phase_offsets_rad"])
    valid = {f for f in PhantomConfig.__dataclass_fields__}
    unknown = set(merged) - valid
    if unknown:
        raise ConfigInvalid(f"unknown phantom config keys: {sorted(unknown)}")
    return PhantomConfig(**merged)


def _cmd_phantom(args: argparse.Namespace, manifest: RunManifest) -> None:
    cfg = _load_phantom_config(args)
    manifest.config["phantom"] = {
        k: (list(v) if isinstance(v, tuple) else v)
        for k, v in cfg.__dict__.items()
    }
    with StageTimer(manifest, "generate"):
        stack, truth = generate_phantom(cfg)
    out = Path(args.out)
    with StageTimer(manifest, "write"):
        write_stack(stack, out / "stack")
        write_ground_truth(truth, out / "truth")
        write_triggers(truth.trigger_frames, out / "triggers.csv")
    log.info("phantom written to %s", out)


def _extract_pipeline(
    stack, spec: FilterSpec, threshold: float, dump_dir: Path | None
):
    modes, raws, curves = [], [], []
    for series in stack:
        filtered = lowpass_temporal(series, spec)
        basis, raw = decompose_series(filtered)
        modes.append(basis.eigen_images[1])
        raws.append(raw)
        curves.append(com_curve(clamp_nonnegative(filtered)))
        if dump_dir is not None:
            h, w, _ = series.frames.shape
            name = dump_dir / f"eigen_slice_{series.slice_index:03d}.npy"
            with open(name, "wb") as fh:
                np.lib.format.write_array(
                    fh,
                    np.ascontiguousarray(basis.eigen_images.reshape(-1, h, w)),
                    version=(1, 0),
                )
    return apply_sign_correction(modes, raws, curves, threshold)


def _cmd_extract(args: argparse.Namespace, manifest: RunManifest) -> None:
    in_dir = Path(args.in_dir)
    out = Path(args.out)
    manifest.checksum_inputs(sorted(in_dir.glob("*")))
    with StageTimer(manifest, "read"):
        stack = read_stack(in_dir)
    spec = _filter_spec(args)
    spec.validate(stack[0].frame_interval)
    dump_dir = None
    if args.dump_eigen:
        dump_dir = out
        dump_dir.mkdir(parents=True, exist_ok=True)
    with StageTimer(manifest, "extract"):
        signals, report = _extract_pipeline(
            stack, spec, args.weak_link_threshold, dump_dir
        )
    with StageTimer(manifest, "write"):
        write_signals(signals, report, out, stack[0].frame_interval)
    if not args.no_figures:
        from .figures import save_signal_overview

        with StageTimer(manifest, "figures"):
            save_signal_overview(
                signals, stack[0].frame_interval, out / "signals_overview.png"
            )
    log.info(
        "extracted %d signals; global sign %+d from slice %d",
        len(signals),
        report.applied_global_sign,
        report.chosen_slice,
    )


def _cmd_gate(args: argparse.Namespace, manifest: RunManifest) -> None:
    in_dir = Path(args.in_dir)
    out = Path(args.out)
    manifest.checksum_inputs(sorted(in_dir.glob("*")) + [Path(args.triggers)])
    with StageTimer(manifest, "read"):
        signals, _, frame_interval = read_signals(in_dir)
        triggers = read_triggers(args.triggers)
    convention = (
        BeatConvention.MAX_IS_EE
        if args.convention == "max-is-ee"
        else BeatConvention.MIN_IS_EE
    )
    entries = []
    figure_jobs = []
    with StageTimer(manifest, "gate"):
        for signal in signals:
            if signal.slice_index not in triggers:
                raise ValidationError(f"no triggers for slice {signal.slice_index}")
            beats = segment_heartbeats(
                triggers[signal.slice_index],
                signal.values.shape[0],
                signal.slice_index,
            )
            selection = select_beats(
                signal,
                beats,
                convention=convention,
                stability_check=not args.no_stability_check,
            )
            entries.append(
                {
                    "slice_index": signal.slice_index,
                    "EE": [selection.ee.start_frame, selection.ee.end_frame],
                    "EI": [selection.ei.start_frame, selection.ei.end_frame],
                    "scores": list(selection.scores),
                    "eligible": list(selection.eligible),
                    "iqr": selection.iqr,
                    "tied": selection.tied,
                }
            )
            figure_jobs.append((signal, beats, selection))
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "convention": convention.value,
        "stability_check": not args.no_stability_check,
        "slices": entries,
    }
    (out / "gating.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    if not args.no_figures:
        from .figures import save_gating_figure

        with StageTimer(manifest, "figures"):
            for signal, beats, selection in figure_jobs:
                save_gating_figure(
                    signal,
                    beats,
                    selection,
                    frame_interval,
                    out / f"gating_slice_{signal.slice_index:03d}.png",
                )
    log.info("gated %d slices", len(entries))


def _cmd_evaluate(args: argparse.Namespace, manifest: RunManifest) -> None:
    in_dir = Path(args.in_dir)
    gt_dir = Path(args.gt)
    report_path = Path(args.out)
    manifest.checksum_inputs(sorted(in_dir.glob("*")) + sorted(gt_dir.glob("*")))
    with StageTimer(manifest, "read"):
        signals, _, frame_interval = read_signals(in_dir)
        truth = read_ground_truth(gt_dir)

    with StageTimer(manifest, "evaluate"):
        references = []
        for signal in signals:
            if signal.slice_index > truth.resp_trace.shape[0]:
                raise ValidationError(
                    f"ground truth has no slice {signal.slice_index}"
                )
            if args.roi is not None:
                references.append(
                    roi_reference(truth, _parse_roi(args.roi), signal.slice_index)
                )
            else:
                references.append(truth.resp_trace[signal.slice_index - 1])
        full = agreement(signals, references)
        reports: dict[str, AgreementReport] = {"full": full}
        if args.odd_slices:
            if args.stack is None:
                raise ConfigInvalid("--odd-slices requires --stack <dir>")
            stack = read_stack(args.stack)
            exp_full, exp_odd = odd_slice_experiment(stack, truth, _filter_spec(args))
            reports["stack-full"] = exp_full
            reports["stack-odd"] = exp_odd

    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(
        json.dumps(
            {name: rep.as_dict() for name, rep in reports.items()},
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    table = render_table(reports)
    report_path.with_suffix(".txt").write_text(table)
    sys.stdout.write(table)
    if not args.no_figures:
        from .figures import save_agreement_figure

        with StageTimer(manifest, "figures"):
            save_agreement_figure(
                signals,
                references,
                full.per_slice_r,
                frame_interval,
                report_path.parent / "agreement.png",
            )


def _add_filter_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--cutoff-hz",
        type=float,
        default=0.8,
        help="low-pass cutoff in Hz (default 0.8)",
    )
    sub.add_argument(
        "--transition-width-hz",
        type=float,
        default=0.4,
        help="filter transition band width in Hz (default 0.4)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="respigate",
        description="Respiratory self-gating for multi-slice real-time cine series.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("phantom", help="generate a synthetic stack + ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON file overriding phantom defaults")
    p.add_argument("--seed", type=int, help="seed override")
    p.set_defaults(func=_cmd_phantom)

    p = subs.add_parser("extract", help="extract corrected respiratory signals")
    p.add_argument("--in", dest="in_dir", required=True, help="stack directory")
    p.add_argument("--out", required=True, help="output directory")
    _add_filter_flags(p)
    p.add_argument(
        "--weak-link-threshold",
        type=float,
        default=DEFAULT_WEAK_LINK_THRESHOLD,
        help="warn when neighbor eigen-image |r| falls below this",
    )
    p.add_argument(
        "--dump-eigen",
        action="store_true",
        help="also write per-slice eigen images as NPY",
    )
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=_cmd_extract)

    p = subs.add_parser("gate", help="select EE/EI heartbeats per slice")
    p.add_argument("--in", dest="in_dir", required=True, help="signals directory")
    p.add_argument("--triggers", required=True, help="trigger CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--convention",
        choices=["max-is-ee", "min-is-ee"],
        default="max-is-ee",
        help="which score extreme is labeled EE",
    )
    p.add_argument(
        "--no-stability-check",
        action="store_true",
        help="keep beats that span breath transitions",
    )
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=_cmd_gate)

    p = subs.add_parser("evaluate", help="compare signals against ground truth")
    p.add_argument("--in", dest="in_dir", required=True, help="signals directory")
    p.add_argument("--gt", required=True, help="ground-truth directory")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--roi", help="reference ROI as TOP:BOTTOM:LEFT:RIGHT")
    p.add_argument(
        "--odd-slices",
        action="store_true",
        help="also rerun extraction on odd slices only (needs --stack)",
    )
    p.add_argument("--stack", help="stack directory for --odd-slices")
    _add_filter_flags(p)
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=_cmd_evaluate)
    return parser


def _manifest_dir(args: argparse.Namespace) -> Path:
    if args.command == "evaluate":
        return Path(args.out).parent
    return Path(args.out)


def _echo_args(args: argparse.Namespace) -> dict:
    skip = {"func", "command"}
    return {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k not in skip
    }


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _setup_logging()
    manifest = RunManifest(
        command=args.command, version=__version__, config={"args": _echo_args(args)}
    )
    status = 0
    error: BaseException | None = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            with StageTimer(manifest, "total"):
                args.func(args, manifest)
        except ValidationError as exc:
            status, error = 2, exc
        except DegenerateDataError as exc:
            status, error = 3, exc
        except IoFailure as exc:
            status, error = 4, exc
        except OSError as exc:
            status, error = 4, exc
    for w in caught:
        manifest.add_warning(f"{w.category.__name__}: {w.message}")
    if error is not None:
        manifest.error = f"{type(error).__name__}: {error}"
    try:
        manifest.write(_manifest_dir(args))
    except OSError as exc:  # cannot even write the manifest
        print(f"error: failed to write manifest: {exc}", file=sys.stderr)
        status = status or 4
    if error is not None:
        print(f"error: {manifest.error}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
