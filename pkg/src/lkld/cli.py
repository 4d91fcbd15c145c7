"""Batch command-line front end emitting plot-ready CSV/JSON.

Exit codes: 0 on success, 1 on domain errors (bad values, malformed or
unreadable inputs), 2 on usage errors. File outputs are written atomically
(temp file + rename) so a failed run never leaves a partial file. All
floating output uses 9 significant digits except the label-uncertainty
records CSV, whose format is pinned at 6.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

from ._util import fmt_sig, worker_count, write_text_atomic
from . import calibration, distributions, label_uncertainty, synth_trainer

RANGE_TOL = 1e-12


def parse_range(raw: str) -> list[float]:
    """Parse ``start:stop:step`` into a grid: start included, stop excluded."""
    parts = raw.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must be start:stop:step, got {raw!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ValueError(f"range values must be numbers: {raw!r}") from exc
    if not (step > 0.0 and math.isfinite(step)):
        raise ValueError(f"range step must be > 0, got {step}")
    if stop <= start:
        raise ValueError(f"range stop must exceed start, got {raw!r}")
    values: list[float] = []
    k = 0
    while True:
        v = start + k * step
        if v >= stop - RANGE_TOL:
            break
        values.append(v)
        k += 1
    return values


def parse_anchors(raw: str) -> tuple[float, float, float]:
    parts = raw.split(",")
    if len(parts) != 3:
        raise ValueError(f"anchors must be three comma-separated values, got {raw!r}")
    try:
        a, b, c = (float(p) for p in parts)
    except ValueError as exc:
        raise ValueError(f"anchor values must be numbers: {raw!r}") from exc
    return a, b, c


def _check_input(path: str) -> None:
    if not os.path.isfile(path):
        raise ValueError(f"input file not found: {path}")
    if not os.access(path, os.R_OK):
        raise ValueError(f"input file not readable: {path}")


def _check_output(path: str | None) -> None:
    if path is None:
        return
    directory = os.path.dirname(os.path.abspath(path)) or "."
    if not os.path.isdir(directory):
        raise ValueError(f"output directory does not exist: {directory}")
    if not os.access(directory, os.W_OK):
        raise ValueError(f"output directory not writable: {directory}")


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        write_text_atomic(path, text)


def _read_json(path: str) -> object:
    _check_input(path)
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def _round_sig(value: float) -> float:
    return float(fmt_sig(value))


def cmd_loss_eval(args: argparse.Namespace) -> int:
    _check_output(args.output)
    pred = distributions.LaplaceParams(args.pred_location, args.pred_scale)
    if args.loss == "nll":
        if args.label_scale is not None:
            raise ValueError("--label-scale only applies to --loss kld")
        grad = distributions.nll_loss(args.label_location, pred)
    elif args.loss == "kld0":
        if args.label_scale is not None:
            raise ValueError("--label-scale only applies to --loss kld")
        grad = distributions.kld_loss_zero_label_scale(args.label_location, pred)
    else:
        if args.label_scale is None:
            raise ValueError("--loss kld requires --label-scale")
        label = distributions.LaplaceParams(args.label_location, args.label_scale)
        grad = distributions.kld_loss(label, pred)
    text = (
        "value,d_location,d_scale\n"
        f"{fmt_sig(grad.value)},{fmt_sig(grad.d_location)},{fmt_sig(grad.d_scale)}\n"
    )
    _emit(text, args.output)
    return 0


def cmd_grad_check(args: argparse.Namespace) -> int:
    _check_output(args.output)
    result = distributions.gradient_check(
        args.loss,
        samples=args.samples,
        seed=args.seed,
        step=args.step,
        rtol=args.rtol,
        atol=args.atol,
    )
    _emit(result.to_csv(), args.output)
    if not result.passed:
        print(
            f"error: {result.failures} of {result.samples} gradient samples "
            f"exceeded tolerance for loss {args.loss}",
            file=sys.stderr,
        )
        return 1
    return 0


def cmd_surface(args: argparse.Namespace) -> int:
    _check_output(args.output)
    grid = distributions.surface_grid(
        args.loss,
        args.label_scale if args.label_scale is not None else 0.0,
        parse_range(args.error),
        parse_range(args.scale),
    )
    _emit(grid.to_csv(), args.output)
    return 0


def _mappings_from_args(args: argparse.Namespace):
    default = label_uncertainty.fit_mapping(*parse_anchors(args.anchors))
    per_class = {}
    for entry in args.class_anchors or []:
        cls, _, anchor_part = entry.partition(":")
        if not cls or not anchor_part:
            raise ValueError(f"--class-anchors must be CLASS:B0,B0.5,B1 , got {entry!r}")
        per_class[cls] = label_uncertainty.fit_mapping(*parse_anchors(anchor_part))
    return default, per_class


def cmd_labelunc(args: argparse.Namespace) -> int:
    _check_output(args.output)
    default, per_class = _mappings_from_args(args)
    for mapping in [default, *per_class.values()]:
        if mapping.linear:
            print(
                "note: equally spaced anchors degrade the exponential fit; "
                "using linear interpolation through the anchors",
                file=sys.stderr,
            )
    doc = _read_json(args.tracks)
    tracks = label_uncertainty.tracks_from_json(doc)
    records = label_uncertainty.evaluate_tracks(
        tracks, mapping=default, per_class=per_class, max_workers=worker_count()
    )
    _emit(label_uncertainty.records_to_csv(records), args.output)
    return 0


def cmd_fit_map(args: argparse.Namespace) -> int:
    _check_output(args.output)
    mapping = label_uncertainty.fit_mapping(*parse_anchors(args.anchors))
    if mapping.linear:
        print(
            "note: equally spaced anchors degrade the exponential fit; "
            "using linear interpolation through the anchors",
            file=sys.stderr,
        )
    roundtrip = max(
        abs(label_uncertainty.map_iou(mapping, x) - anchor)
        for x, anchor in zip((0.0, 0.5, 1.0), mapping.anchors)
    )
    payload = {
        "alpha": _round_sig(mapping.alpha),
        "beta": _round_sig(mapping.beta),
        "gamma": _round_sig(mapping.gamma),
        "anchors": [_round_sig(a) for a in mapping.anchors],
        "linear": mapping.linear,
        "roundtrip_max_abs_err": _round_sig(roundtrip),
    }
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.output)
    return 0


def cmd_iou_hist(args: argparse.Namespace) -> int:
    _check_output(args.output)
    _check_input(args.records)
    with open(args.records, "r", encoding="utf-8") as handle:
        text = handle.read()
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise ValueError("records CSV is empty")
    header = lines[0].split(",")
    if "iou" not in header:
        raise ValueError("records CSV must have an 'iou' column")
    iou_col = header.index("iou")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        try:
            iou_value = float(cells[iou_col])
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: bad iou cell: {exc}") from exc
        records.append(
            label_uncertainty.LabelUncertaintyRecord(
                label_id="", class_name="", iou=iou_value, scale_b=1.0, n_points=0, n_sweeps=1
            )
        )
    bins = label_uncertainty.iou_histogram(records, args.bins)
    _emit(label_uncertainty.histogram_to_csv(bins), args.output)
    return 0


def cmd_calib(args: argparse.Namespace) -> int:
    _check_output(args.output)
    _check_input(args.records)
    with open(args.records, "r", encoding="utf-8") as handle:
        records = calibration.records_from_csv(handle.read())
    grid = parse_range(args.grid) if args.grid else calibration.DEFAULT_GRID
    workers = worker_count()
    pooled = calibration.calibration_report(records, grid, max_workers=workers)
    _emit(calibration.report_to_csv(pooled), args.output)
    if args.per_class and args.output is not None:
        stem, ext = os.path.splitext(args.output)
        for cls in sorted({r.class_name for r in records}):
            subset = [r for r in records if r.class_name == cls]
            report = calibration.calibration_report(subset, grid, max_workers=workers)
            safe = cls.replace(os.sep, "_") or "unlabeled"
            write_text_atomic(f"{stem}.{safe}{ext}", calibration.report_to_csv(report))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    _check_output(args.output)
    config = synth_trainer.config_from_dict(_read_json(args.config))
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    _, report = synth_trainer.train(config)
    _emit(synth_trainer.train_report_to_csv(config, report), args.output)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    _check_output(args.output)
    doc = _read_json(args.config)
    if not isinstance(doc, dict) or "modes" not in doc:
        raise ValueError("compare config must be an object with 'config' and 'modes'")
    base = synth_trainer.config_from_dict(doc.get("config", {}))
    if args.seed is not None:
        base = dataclasses.replace(base, seed=args.seed)
    modes = doc["modes"]
    if not isinstance(modes, list) or not modes:
        raise ValueError("'modes' must be a non-empty list")
    configs = [
        dataclasses.replace(base, label_scale=synth_trainer._mode_from_dict(mode))
        for mode in modes
    ]
    rows = synth_trainer.compare(configs)
    _emit(synth_trainer.comparison_to_csv(base, rows), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lkld",
        description="Laplace regression losses, label-uncertainty geometry, and calibration tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("loss-eval", help="evaluate one loss with its gradients")
    p.add_argument("--loss", choices=["nll", "kld", "kld0"], required=True)
    p.add_argument("--label-location", type=float, required=True)
    p.add_argument("--label-scale", type=float, default=None)
    p.add_argument("--pred-location", type=float, required=True)
    p.add_argument("--pred-scale", type=float, required=True)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_loss_eval)

    p = sub.add_parser("grad-check", help="finite-difference check of the analytic gradients")
    p.add_argument("--loss", choices=["nll", "kld"], required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--rtol", type=float, default=1e-5)
    p.add_argument("--atol", type=float, default=1e-7)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("surface", help="tabulate a loss over an error x scale grid")
    p.add_argument("--loss", choices=["nll", "kld"], required=True)
    p.add_argument("--label-scale", type=float, default=None)
    p.add_argument("--error", required=True, metavar="START:STOP:STEP")
    p.add_argument("--scale", required=True, metavar="START:STOP:STEP")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("labelunc", help="hull-IoU label uncertainty records from tracks JSON")
    p.add_argument("--tracks", required=True)
    p.add_argument("--anchors", required=True, metavar="B0,B0.5,B1")
    p.add_argument(
        "--class-anchors",
        action="append",
        default=None,
        metavar="CLASS:B0,B0.5,B1",
        help="per-class anchor override (repeatable)",
    )
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_labelunc)

    p = sub.add_parser("fit-map", help="fit the exponential IoU-to-scale mapping")
    p.add_argument("--anchors", required=True, metavar="B0,B0.5,B1")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_fit_map)

    p = sub.add_parser("iou-hist", help="histogram the iou column of a records CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--bins", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_iou_hist)

    p = sub.add_parser("calib", help="calibration curve from residual,scale,class_name CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--grid", default=None, metavar="START:STOP:STEP")
    p.add_argument("--per-class", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_calib)

    p = sub.add_parser("train", help="train the synthetic predictor from a config JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="compare label-scale modes on shared data")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
