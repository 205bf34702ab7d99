"""Command line front end.

Subcommands: orp (inspect one oriented proposal), eval (score detections
against annotations), sweep (mean AP across confidence cutoffs), synth
(write a synthetic dataset), bench (kernel throughput). Human-readable
tables go to stdout; --out writes the same numbers as JSON, byte-identical
across runs on identical inputs. ROTDET_THREADS caps evaluation workers.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import statistics
import sys
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import (
    SynthParams,
    generate_synthetic_scene,
    load_annotations,
    load_detections,
    save_annotations,
    save_detections,
)
from .eval import ImageSample, confidence_sweep, evaluate_detections
from .geometry import AxisAlignedBox, OrientedBox, iou_obb, obb_corners
from .nms import KIND_AXIS, KIND_ORIENTED, Detection, nms
from .opg import make_orp, max_inscribed_rect
from .pooling import FeatureGrid, oaroi_pool
from .targets_losses import FOREGROUND_CLASSES, ClassLabel

_CLS_NAMES = {ClassLabel.GUN: "gun", ClassLabel.RIFLE: "rifle"}


@dataclass(frozen=True)
class CommandOutcome:
    exit_code: int
    artifacts: tuple[str, ...] = ()


def _parse_floats(text: str, n: int | None, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ValueError(f"{what} must be comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ValueError(f"{what} must hold {n} numbers, got {text!r}")
    return vals


def _parse_levels(text: str) -> list[float]:
    """Parse '0.1..0.9', '0.1..0.9..0.2', or a comma-separated list."""
    if ".." in text:
        parts = text.split("..")
        if len(parts) not in (2, 3):
            raise ValueError(f"level range must be start..stop[..step], got {text!r}")
        start, stop = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else 0.1
        if step <= 0 or stop < start:
            raise ValueError(f"bad level range {text!r}")
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    return _parse_floats(text, None, "levels")


def _load_dataset(gts_path: str, dets_path: str, kind: str) -> list[ImageSample]:
    scenes = load_annotations(gts_path)
    records = load_detections(dets_path)
    by_image: dict[str, list[Detection]] = {s.image_id: [] for s in scenes}
    for image_id, det in records:
        if image_id not in by_image:
            raise ValueError(
                f"{dets_path}: detection references unknown image {image_id!r}"
            )
        if det.kind == kind:
            by_image[image_id].append(det)
    return [
        ImageSample(s.image_id, tuple(by_image[s.image_id]), s.instances) for s in scenes
    ]


def _fmt_ap(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def _write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_orp(args) -> CommandOutcome:
    box = AxisAlignedBox(*_parse_floats(args.box, 4, "--box"))
    proposal = make_orp(box, args.theta)
    orp = proposal.orp
    print(f"rp2: [{box.x_min}, {box.y_min}, {box.x_max}, {box.y_max}]  theta: {proposal.theta}")
    print(
        f"orp: center=({orp.cx}, {orp.cy}) half_len={orp.half_len} "
        f"half_wid={orp.half_wid} theta={orp.theta}"
    )
    for i, p in enumerate(obb_corners(orp)):
        print(f"corner[{i}]: ({p.x}, {p.y})")
    rect = max_inscribed_rect(box, args.theta)
    print(
        f"inscribed: half_len={rect.half_len} half_wid={rect.half_wid} "
        f"area={rect.area} fill={rect.area / box.area}"
    )
    return CommandOutcome(0)


def _cmd_eval(args) -> CommandOutcome:
    thresholds = _parse_floats(args.iou, None, "--iou")
    dataset = _load_dataset(args.gts, args.dets, args.kind)
    result = evaluate_detections(dataset, thresholds, args.kind)

    n_dets = sum(len(s.detections) for s in dataset)
    n_gts = sum(len(s.ground_truths) for s in dataset)
    print(f"kind: {result.kind}  images: {len(dataset)}  detections: {n_dets}  gts: {n_gts}")
    header = f"{'IoU':>5}  {'AP(gun)':>8}  {'AP(rifle)':>9}  {'mAP':>6}  {'TP':>5} {'FP':>5} {'FN':>5}"
    print(header)
    for t in result.thresholds:
        tp = sum(result.counts[t][c][0] for c in FOREGROUND_CLASSES)
        fp = sum(result.counts[t][c][1] for c in FOREGROUND_CLASSES)
        fn = sum(result.counts[t][c][2] for c in FOREGROUND_CLASSES)
        print(
            f"{t:>5.2f}  {_fmt_ap(result.ap[t][ClassLabel.GUN]):>8}  "
            f"{_fmt_ap(result.ap[t][ClassLabel.RIFLE]):>9}  "
            f"{_fmt_ap(result.mean_ap[t]):>6}  {tp:>5} {fp:>5} {fn:>5}"
        )

    artifacts: tuple[str, ...] = ()
    if args.out:
        payload = {
            "kind": result.kind,
            "thresholds": list(result.thresholds),
            "ap": {
                _CLS_NAMES[c]: {repr(t): result.ap[t][c] for t in result.thresholds}
                for c in FOREGROUND_CLASSES
            },
            "mean_ap": {repr(t): result.mean_ap[t] for t in result.thresholds},
            "counts": {
                _CLS_NAMES[c]: {repr(t): list(result.counts[t][c]) for t in result.thresholds}
                for c in FOREGROUND_CLASSES
            },
        }
        _write_json(args.out, payload)
        artifacts = (args.out,)
    return CommandOutcome(0, artifacts)


def _cmd_sweep(args) -> CommandOutcome:
    levels = _parse_levels(args.levels)
    dataset = _load_dataset(args.gts, args.dets, args.kind)
    rows = confidence_sweep(dataset, levels, args.kind)

    print(f"kind: {args.kind}  images: {len(dataset)}  iou: 0.5")
    print(f"{'level':>6}  {'mAP@0.5':>8}")
    for level, value in rows:
        print(f"{level:>6.2f}  {_fmt_ap(value):>8}")

    artifacts: tuple[str, ...] = ()
    if args.out:
        payload = {"kind": args.kind, "iou": 0.5, "sweep": [[lv, ap] for lv, ap in rows]}
        _write_json(args.out, payload)
        artifacts = (args.out,)
    return CommandOutcome(0, artifacts)


def _cmd_synth(args) -> CommandOutcome:
    params = SynthParams(
        n_instances=args.instances, noise=args.noise, size=args.size, channels=args.channels
    )
    os.makedirs(args.out, exist_ok=True)
    annotations = []
    det_records = []
    artifacts = []
    for i in range(args.scenes):
        scene = generate_synthetic_scene(args.seed + i, params)
        annotations.append(scene.annotations)
        det_records.extend(
            (scene.annotations.image_id, det) for det in scene.oracle_detections
        )
        if args.features:
            path = os.path.join(args.out, f"features-{scene.annotations.image_id}.npy")
            np.save(path, scene.features.values)
            artifacts.append(path)

    ann_path = os.path.join(args.out, "annotations.jsonl")
    det_path = os.path.join(args.out, "detections.jsonl")
    save_annotations(ann_path, annotations)
    save_detections(det_path, det_records)
    artifacts = [ann_path, det_path] + artifacts
    n_inst = sum(len(a.instances) for a in annotations)
    print(
        f"wrote {args.scenes} scene(s), {n_inst} instance(s), "
        f"{len(det_records)} detection(s) to {args.out}"
    )
    return CommandOutcome(0, tuple(artifacts))


def bench_kernel(kernel: str, n: int, repeats: int = 5) -> float:
    """Median throughput (items per second) over repeated timed runs."""
    if n < 1:
        raise ValueError(f"--n must be positive, got {n}")
    rng = np.random.default_rng(0)

    if kernel == "iou_obb":
        pairs = [
            (
                OrientedBox(rng.uniform(0, 100), rng.uniform(0, 100),
                            rng.uniform(1, 20), rng.uniform(1, 20), rng.uniform(0, 180)),
                OrientedBox(rng.uniform(0, 100), rng.uniform(0, 100),
                            rng.uniform(1, 20), rng.uniform(1, 20), rng.uniform(0, 180)),
            )
            for _ in range(n)
        ]

        def work() -> None:
            for a, b in pairs:
                iou_obb(a, b)

    elif kernel == "oaroi":
        fm = FeatureGrid.from_array(rng.standard_normal((64, 64, 64)))
        boxes = [
            OrientedBox(rng.uniform(20, 44), rng.uniform(20, 44),
                        rng.uniform(4, 12), rng.uniform(2, 6), rng.uniform(0, 180))
            for _ in range(n)
        ]

        def work() -> None:
            for box in boxes:
                oaroi_pool(fm, box, 7, 7)

    elif kernel == "nms":
        dets = [
            Detection(
                cls=ClassLabel.GUN,
                score=float(rng.uniform(0.05, 1.0)),
                box=AxisAlignedBox(x, y, x + w, y + h),
            )
            for x, y, w, h in zip(
                rng.uniform(0, 200, n), rng.uniform(0, 200, n),
                rng.uniform(5, 40, n), rng.uniform(5, 40, n),
            )
        ]

        def work() -> None:
            nms(dets, 0.5, KIND_AXIS)

    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        work()
        times.append(time.perf_counter() - start)
    return n / statistics.median(times)


def _cmd_bench(args) -> CommandOutcome:
    rate = bench_kernel(args.kernel, args.n)
    label = {"iou_obb": "pairs/s", "oaroi": "proposals/s", "nms": "detections/s"}[args.kernel]
    print(f"kernel: {args.kernel}  n: {args.n}  median of 5 runs: {rate:.0f} {label}")
    return CommandOutcome(0)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotdet", description="oriented detection geometry and evaluation tools"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("orp", help="print the oriented proposal for a box and angle")
    p.add_argument("--box", required=True, help="x_min,y_min,x_max,y_max")
    p.add_argument("--theta", required=True, type=float, help="angle in degrees")
    p.set_defaults(fn=_cmd_orp)

    p = sub.add_parser("eval", help="score detections against annotations")
    p.add_argument("--gts", required=True, help="annotations JSONL path")
    p.add_argument("--dets", required=True, help="detections JSONL path")
    p.add_argument("--kind", choices=(KIND_AXIS, KIND_ORIENTED), default=KIND_AXIS)
    p.add_argument("--iou", default="0.4,0.5,0.6", help="comma-separated IoU thresholds")
    p.add_argument("--out", help="write machine-readable JSON here")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("sweep", help="mean AP at IoU 0.5 across confidence cutoffs")
    p.add_argument("--gts", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--kind", choices=(KIND_AXIS, KIND_ORIENTED), default=KIND_AXIS)
    p.add_argument("--levels", default="0.1..0.9", help="start..stop[..step] or a list")
    p.add_argument("--out", help="write machine-readable JSON here")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--scenes", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--instances", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--size", type=int, default=96)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--features", action="store_true", help="also write feature grids (.npy)")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("bench", help="time a kernel and report median throughput")
    p.add_argument("--kernel", required=True, choices=("iou_obb", "oaroi", "nms"))
    p.add_argument("--n", required=True, type=int)
    p.set_defaults(fn=_cmd_bench)

    return parser


def run(argv: Sequence[str]) -> CommandOutcome:
    """Execute one CLI invocation; exit code 1 = bad input, 2 = bad usage."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return CommandOutcome(int(exc.code) if exc.code else 0)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CommandOutcome(1)


def main() -> None:
    sys.exit(run(sys.argv[1:]).exit_code)


if __name__ == "__main__":
    main()
