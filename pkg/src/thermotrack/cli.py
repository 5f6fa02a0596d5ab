"""Batch command-line front end: track, eval, sweep-alpha, synth, bench.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant violation. Tracker flags mirror TrackerConfig fields 1:1 so that
parameter sweeps can be scripted flat; a JSON config file supplies defaults
and explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .association import HistogramConfig
from .core import ConfigurationError, DataFormatError, Detection, GrayImage, SequencingError
from .metrics import EvalReport, aggregate, evaluate_sequence, metrics_csv, write_metrics_csv
from .mot_io import (
    SequenceManifest,
    image_path,
    load_image,
    load_manifest,
    read_detections,
    read_ground_truth,
    read_results,
    write_results,
)
from .synth import export, generate, preset, preset_names, scenario_from_file
from .tracker import BYTE_TUNED, OCSORT_TUNED, Tracker, TrackerConfig, TrackRecord

__all__ = ["main", "build_tracker_config", "track_sequence_dir"]

PRESET_CONFIGS = {
    "byte-tuned": BYTE_TUNED,
    "ocsort-tuned": OCSORT_TUNED,
}

_CONFIG_KEYS = (
    "variant",
    "alpha",
    "high_thresh",
    "low_thresh",
    "match_thresh_first",
    "match_thresh_second",
    "new_track_thresh",
    "max_lost_frames",
    "min_hits",
    "use_thermal_in_second_stage",
    "disable_thermal",
    "roi_source",
)


def _add_tracker_flags(parser: argparse.ArgumentParser, include_preset: bool = True) -> None:
    group = parser.add_argument_group("tracker")
    if include_preset:
        group.add_argument("--preset", choices=sorted(PRESET_CONFIGS), default=None,
                           help="named operating point supplying defaults")
    group.add_argument("--config", type=Path, default=None,
                       help="JSON file with TrackerConfig defaults")
    group.add_argument("--variant", choices=("byte", "ocsort"), default=None)
    group.add_argument("--alpha", type=float, default=None,
                       help="weight of motion similarity in the fused score")
    group.add_argument("--high-thresh", type=float, default=None)
    group.add_argument("--low-thresh", type=float, default=None)
    group.add_argument("--match-thresh-first", type=float, default=None)
    group.add_argument("--match-thresh-second", type=float, default=None)
    group.add_argument("--new-track-thresh", type=float, default=None)
    group.add_argument("--max-lost-frames", type=int, default=None)
    group.add_argument("--min-hits", type=int, default=None)
    group.add_argument("--thermal-second-stage", action="store_true", default=None,
                       dest="use_thermal_in_second_stage")
    group.add_argument("--disable-thermal", action="store_true", default=None)
    group.add_argument("--roi-source", choices=("prediction", "last_observation"), default=None)
    group.add_argument("--hist-bins", type=int, default=None)


def build_tracker_config(args: argparse.Namespace) -> TrackerConfig:
    """Resolve precedence: library default < preset < config file < flags."""
    cfg = PRESET_CONFIGS[args.preset] if getattr(args, "preset", None) else TrackerConfig()
    overrides: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config file {args.config}: {exc}") from exc
        unknown = set(data) - set(_CONFIG_KEYS) - {"hist_bins"}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        overrides.update(data)
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    hist_bins = overrides.pop("hist_bins", None)
    if getattr(args, "hist_bins", None) is not None:
        hist_bins = args.hist_bins
    if hist_bins is not None:
        overrides["histogram"] = HistogramConfig(bins=int(hist_bins))
    return replace(cfg, **overrides)


class LoadedSequence:
    """A sequence pulled fully into memory, reusable across tracker runs."""

    def __init__(self, seq_dir: Path, det_path: Path | None = None) -> None:
        self.directory = Path(seq_dir)
        self.manifest: SequenceManifest = load_manifest(self.directory)
        det_file = det_path or self.directory / "det" / "det.txt"
        self.detections: dict[int, list[Detection]] = read_detections(det_file)
        self.images: list[GrayImage] = [
            load_image(image_path(self.manifest, frame), self.manifest.bit_depth)
            for frame in range(1, self.manifest.frame_count + 1)
        ]

    @property
    def name(self) -> str:
        return self.manifest.name

    def run(self, config: TrackerConfig) -> list[TrackRecord]:
        tracker = Tracker(config)
        for frame in range(1, self.manifest.frame_count + 1):
            tracker.step(self.images[frame - 1], self.detections.get(frame, []), frame_index=frame)
        return tracker.finish()

    def ground_truth(self):
        return read_ground_truth(self.directory / "gt" / "gt.txt")


def track_sequence_dir(seq_dir, config: TrackerConfig, det_path=None) -> list[TrackRecord]:
    """Run the tracker over one sequence directory and return its records."""
    return LoadedSequence(seq_dir, det_path).run(config)


def _cmd_track(args: argparse.Namespace) -> int:
    config = build_tracker_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seq_dirs = [Path(p) for p in args.seq]
    det_paths = [Path(p) for p in args.det] if args.det else [None] * len(seq_dirs)
    if len(det_paths) != len(seq_dirs):
        raise ConfigurationError(
            f"{len(det_paths)} --det paths for {len(seq_dirs)} sequences"
        )
    for seq_dir in seq_dirs:
        if not seq_dir.is_dir():
            raise DataFormatError(f"sequence directory not found: {seq_dir}")

    written: list[Path] = []

    def run_one(pair):
        seq_dir, det_path = pair
        loaded = LoadedSequence(seq_dir, det_path)
        records = loaded.run(config)
        return loaded.name, records

    try:
        if args.jobs > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(run_one, zip(seq_dirs, det_paths)))
        else:
            results = [run_one(pair) for pair in zip(seq_dirs, det_paths)]
        for name, records in results:
            target = out_dir / f"{name}.txt"
            tmp = out_dir / f"{name}.txt.tmp"
            write_results(tmp, records)
            tmp.replace(target)
            written.append(target)
            frames = len({r.frame for r in records})
            ids = len({r.track_id for r in records})
            print(f"{name}: {len(records)} records, {ids} tracks over {frames} frames -> {target}")
    except Exception:
        # atomicity: a failed batch leaves no partial outputs behind
        for path in written:
            path.unlink(missing_ok=True)
        for tmp in out_dir.glob("*.txt.tmp"):
            tmp.unlink(missing_ok=True)
        raise
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    results_dir = Path(args.results)
    rows: list[EvalReport] = []
    missing: list[str] = []
    for seq in args.seq:
        seq_dir = Path(seq)
        manifest = load_manifest(seq_dir)
        result_file = results_dir / f"{manifest.name}.txt"
        if not result_file.is_file():
            missing.append(manifest.name)
            continue
        gt = read_ground_truth(seq_dir / "gt" / "gt.txt")
        records = read_results(result_file)
        rows.append(
            evaluate_sequence(gt, records, iou_thresh=args.iou_thresh, sequence=manifest.name)
        )
    if missing:
        raise DataFormatError(
            f"no result files for sequences: {', '.join(missing)} (looked in {results_dir})"
        )
    if args.out:
        write_metrics_csv(args.out, rows)
    sys.stdout.write(metrics_csv(rows))
    return 0


def _parse_alpha_grid(text: str) -> list[float]:
    try:
        grid = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigurationError(f"bad alpha grid {text!r}: {exc}") from exc
    if not grid:
        raise ConfigurationError("alpha grid is empty")
    for value in grid:
        if not (0.0 <= value <= 1.0):
            raise ConfigurationError(f"alpha grid value {value} outside [0, 1]")
    return grid


def _cmd_sweep_alpha(args: argparse.Namespace) -> int:
    base = build_tracker_config(args)
    grid = _parse_alpha_grid(args.alphas)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    sequences = [LoadedSequence(Path(p)) for p in args.seq]
    ground_truths = [seq.ground_truth() for seq in sequences]

    rows: list[tuple[str, float, float, float]] = []
    for variant in variants:
        for alpha in sorted(grid):
            config = replace(base, variant=variant, alpha=alpha)
            reports = [
                evaluate_sequence(gt, seq.run(config), iou_thresh=args.iou_thresh,
                                  sequence=seq.name)
                for seq, gt in zip(sequences, ground_truths)
            ]
            pooled = aggregate(reports)
            rows.append((variant, alpha, pooled.mota, pooled.idf1))

    lines = ["variant,alpha,MOTA,IDF1,tag"]
    for variant, alpha, mota, idf1 in rows:
        lines.append(f"{variant},{alpha:g},{mota:.6f},{idf1:.6f},")
    for variant in variants:
        subset = [r for r in rows if r[0] == variant]
        best_mota = max(subset, key=lambda r: (r[2], -r[1]))
        best_idf1 = max(subset, key=lambda r: (r[3], -r[1]))
        lines.append(
            f"{variant},{best_mota[1]:g},{best_mota[2]:.6f},{best_mota[3]:.6f},best-mota"
        )
        lines.append(
            f"{variant},{best_idf1[1]:g},{best_idf1[2]:.6f},{best_idf1[3]:.6f},best-idf1"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    sys.stdout.write(text)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.scenario:
        scenario = scenario_from_file(args.scenario)
    else:
        scenario = preset(args.preset, seed=args.seed)
    if args.seed is not None and scenario.seed != args.seed:
        scenario = replace(scenario, seed=args.seed)
    sequence = generate(scenario)
    out_dir = Path(args.out) if args.out else Path(scenario.name)
    export(sequence, out_dir)
    n_dets = sum(len(v) for v in sequence.detections.values())
    print(f"{scenario.name}: {scenario.frame_count} frames, "
          f"{len(scenario.objects)} objects, {n_dets} detections -> {out_dir}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    scenario = preset(args.preset, seed=args.seed)
    sequence = generate(scenario)
    # args.preset names a scenario here, not a tracker operating point
    stripped = argparse.Namespace(**{k: v for k, v in vars(args).items() if k != "preset"})
    config = build_tracker_config(stripped)
    tracker = Tracker(config)
    start = time.perf_counter()
    for frame in range(1, scenario.frame_count + 1):
        tracker.step(sequence.image_at(frame), sequence.detections.get(frame, []))
    elapsed = time.perf_counter() - start
    records = tracker.finish()
    fps = scenario.frame_count / elapsed if elapsed > 0 else float("inf")
    print(f"{scenario.name}: {scenario.frame_count} frames in {elapsed:.3f}s "
          f"({fps:.1f} fps), {len(records)} records")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermotrack",
        description="Grayscale-video tracking with fused motion and intensity-histogram association.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_track = sub.add_parser("track", help="run the tracker over sequences")
    p_track.add_argument("--seq", action="append", required=True, help="sequence directory")
    p_track.add_argument("--det", action="append", default=None,
                         help="detection file override, one per --seq")
    p_track.add_argument("--out", required=True, help="output directory for result files")
    p_track.add_argument("--jobs", type=int, default=1, help="sequences processed in parallel")
    _add_tracker_flags(p_track)
    p_track.set_defaults(func=_cmd_track)

    p_eval = sub.add_parser("eval", help="evaluate result files against ground truth")
    p_eval.add_argument("--seq", action="append", required=True)
    p_eval.add_argument("--results", required=True, help="directory of <name>.txt result files")
    p_eval.add_argument("--out", default=None, help="metrics CSV path")
    p_eval.add_argument("--iou-thresh", type=float, default=0.5)
    p_eval.set_defaults(func=_cmd_eval)

    p_sweep = sub.add_parser("sweep-alpha", help="track+eval over a grid of fusion weights")
    p_sweep.add_argument("--seq", action="append", required=True)
    p_sweep.add_argument("--alphas", required=True, help="comma-separated values in [0, 1]")
    p_sweep.add_argument("--variants", default="byte,ocsort")
    p_sweep.add_argument("--out", default=None, help="sweep CSV path")
    p_sweep.add_argument("--iou-thresh", type=float, default=0.5)
    _add_tracker_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep_alpha)

    p_synth = sub.add_parser("synth", help="generate and export a synthetic sequence")
    group = p_synth.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=preset_names(), default=None)
    group.add_argument("--scenario", type=Path, default=None, help="scenario JSON file")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", default=None, help="sequence directory to create")
    p_synth.set_defaults(func=_cmd_synth)

    p_bench = sub.add_parser("bench", help="time the tracker on a synthetic preset")
    p_bench.add_argument("--preset", choices=preset_names(), default="cluttered")
    p_bench.add_argument("--seed", type=int, default=0)
    _add_tracker_flags(p_bench, include_preset=False)
    p_bench.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles usage errors with exit code 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (SequencingError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
