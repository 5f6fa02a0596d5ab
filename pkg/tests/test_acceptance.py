"""Acceptance suite: one test per release criterion, each printing a pass line.

Every criterion pins its tolerance and runtime budget here; nothing is left to
later calibration. Run with ``pytest tests/test_acceptance.py -v -s`` to see
the per-criterion lines.
"""

import itertools
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from thermotrack.association import (
    Histogram,
    bhattacharyya,
    solve_assignment,
)
from thermotrack.cli import main
from thermotrack.core import BoundingBox
from thermotrack.metrics import GroundTruthTrack, aggregate, evaluate_sequence
from thermotrack.mot_io import (
    image_path,
    load_image,
    load_manifest,
    read_detections,
    read_ground_truth,
    read_results,
    write_results,
)
from thermotrack.motion import KalmanFilter
from thermotrack.synth import export, generate, preset, preset_names
from thermotrack.tracker import Tracker, TrackerConfig, TrackRecord, motion_only


def _pass(number: int, message: str) -> None:
    print(f"ACCEPTANCE PASS [{number}] {message}")


def run_tracker(seq, config):
    tracker = Tracker(config)
    for frame in range(1, seq.scenario.frame_count + 1):
        tracker.step(seq.image_at(frame), seq.detections.get(frame, []), frame_index=frame)
    return tracker.finish()


CROSSING_CFG = dict(
    variant="byte",
    min_hits=1,
    match_thresh_first=0.05,
    roi_source="last_observation",
)


def test_criterion_1_fusion_endpoint_equivalence(tmp_path):
    """alpha=1 with the thermal path live is byte-identical to thermal off."""
    start = time.perf_counter()
    sequences = [
        generate(preset(name, seed=seed))
        for name in preset_names()
        for seed in range(4)
    ]
    assert len(sequences) == 20
    config = TrackerConfig(
        variant="byte", alpha=1.0, min_hits=2, match_thresh_first=0.05,
        use_thermal_in_second_stage=False,
    )
    for k, seq in enumerate(sequences):
        with_thermal = run_tracker(seq, config)
        without_thermal = run_tracker(seq, motion_only(config))
        assert with_thermal == without_thermal
        a, b = tmp_path / f"a{k}.txt", tmp_path / f"b{k}.txt"
        write_results(a, with_thermal)
        write_results(b, without_thermal)
        assert a.read_bytes() == b.read_bytes()
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _pass(1, f"fusion endpoint inert over 20 seeded sequences ({elapsed:.1f}s)")


def test_criterion_2_bhattacharyya_contract():
    start = time.perf_counter()
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        bins = int(rng.integers(2, 65))
        w1 = rng.random(bins) + 1e-9
        w2 = rng.random(bins) + 1e-9
        h1 = Histogram(bins, 256, w1 / w1.sum())
        h2 = Histogram(bins, 256, w2 / w2.sum())
        value = bhattacharyya(h1, h2)
        assert 0.0 <= value <= 1.0
        assert value == bhattacharyya(h2, h1)
        assert abs(bhattacharyya(h1, h1) - 1.0) < 1e-9
    closed = bhattacharyya(
        Histogram(2, 256, np.array([0.5, 0.5])), Histogram(2, 256, np.array([1.0, 0.0]))
    )
    assert abs(closed - math.sqrt(0.5)) < 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    _pass(2, f"bhattacharyya bounds, symmetry, identity, closed form ({elapsed:.2f}s)")


def test_criterion_3_assignment_optimality():
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    checked = 0
    for m in range(1, 7):
        for n in range(1, 7):
            for _ in range(200):
                sim = rng.random((m, n))
                thresh = float(rng.random())
                result = solve_assignment(sim, thresh)
                mine = math.fsum(sim[i, j] for i, j in result.matches)

                size = max(m, n)
                best_total, best_pairs = -1.0, []
                for perm in itertools.permutations(range(size)):
                    pairs = [(i, perm[i]) for i in range(m) if perm[i] < n]
                    total = math.fsum(sim[i, j] for i, j in pairs)
                    if total > best_total:
                        best_total, best_pairs = total, pairs
                oracle = math.fsum(
                    sim[i, j] for i, j in best_pairs if sim[i, j] >= thresh
                )
                assert mine == oracle
                checked += 1
    elapsed = time.perf_counter() - start
    assert checked == 7200
    assert elapsed < 60.0
    _pass(3, f"assignment equals exhaustive oracle on 7200 matrices ({elapsed:.1f}s)")


def test_criterion_4_kalman_reference_equivalence():
    start = time.perf_counter()

    def reference_step(x, P, box, phase):
        F = np.eye(8)
        for i in range(4):
            F[i, 4 + i] = 1.0
        H = np.eye(4, 8)
        h = x[3]
        if phase == "predict":
            std = [h / 20, h / 20, 1e-2, h / 20, h / 160, h / 160, 1e-5, h / 160]
            Q = np.diag(np.square(std))
            return F @ x, F @ P @ F.T + Q
        std = [h / 20, h / 20, 1e-1, h / 20]
        R = np.diag(np.square(std))
        z = np.array([box.left + box.width / 2, box.top + box.height / 2,
                      box.width / box.height, box.height])
        S = H @ P @ H.T + R
        K = P @ H.T @ np.linalg.inv(S)
        return x + K @ (z - H @ x), (np.eye(8) - K @ H) @ P

    kf = KalmanFilter()
    rng = np.random.default_rng(7)
    for _ in range(20):
        start_box = BoundingBox(*rng.uniform(0, 200, 2), *rng.uniform(5, 60, 2))
        state = kf.initiate(start_box)
        z = start_box.to_xyah()
        x = np.concatenate([z, np.zeros(4)])
        h = z[3]
        std = [2 * h / 20, 2 * h / 20, 1e-2, 2 * h / 20,
               10 * h / 160, 10 * h / 160, 1e-5, 10 * h / 160]
        P = np.diag(np.square(std))
        for _ in range(10):
            state = kf.predict(state)
            x, P = reference_step(x, P, None, "predict")
            assert np.allclose(state.mean, x, atol=1e-6)
            assert np.allclose(state.covariance, P, atol=1e-6)
            box = BoundingBox(*rng.uniform(0, 200, 2), *rng.uniform(5, 60, 2))
            state = kf.update(state, box)
            x, P = reference_step(x, P, box, "update")
            assert np.allclose(state.mean, x, atol=1e-6)
            assert np.allclose(state.covariance, P, atol=1e-6)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    _pass(4, f"Kalman filter matches dense-matrix reference to 1e-6 ({elapsed:.1f}s)")


def test_criterion_5_thermal_disambiguation():
    start = time.perf_counter()
    seq = generate(preset("crossing", seed=0))

    fused = run_tracker(seq, TrackerConfig(alpha=0.3, **CROSSING_CFG))
    fused_report = evaluate_sequence(seq.gt, fused)
    assert fused_report.id_switches == 0
    assert fused_report.idf1 == 1.0

    motion = run_tracker(seq, TrackerConfig(alpha=1.0, **CROSSING_CFG))
    motion_report = evaluate_sequence(seq.gt, motion)
    assert motion_report.idf1 <= 0.75
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _pass(
        5,
        "crossing tie: alpha=0.3 keeps identity (IDF1 1.0, 0 switches), "
        f"alpha=1.0 IDF1 {motion_report.idf1:.3f} <= 0.75 ({elapsed:.1f}s)",
    )


def test_criterion_6_metrics_hand_check():
    start = time.perf_counter()
    box = BoundingBox(10, 10, 20, 40)

    track = GroundTruthTrack(1)
    for f in range(1, 11):
        track.boxes[f] = box
    hyp = [TrackRecord(f, 1, box, 1.0) for f in range(1, 6)]
    hyp += [TrackRecord(f, 2, box, 1.0) for f in range(6, 11)]
    report = evaluate_sequence([track], hyp)
    assert report.mota == 0.900
    assert report.idf1 == 0.500

    perfect = evaluate_sequence([track], [TrackRecord(f, 1, box, 1.0) for f in range(1, 11)])
    assert perfect.mota == 1.0 and perfect.idf1 == 1.0
    assert perfect.rcll == 1.0 and perfect.prcn == 1.0
    assert perfect.idp == 1.0 and perfect.idr == 1.0
    assert perfect.motp == 0.0
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    _pass(6, f"hand-built fixtures: MOTA 0.900 / IDF1 0.500 and all-ones row ({elapsed:.2f}s)")


def test_criterion_7_aggregation_matches_concatenation():
    start = time.perf_counter()
    seq_a = generate(preset("parallel", seed=3))
    seq_b = generate(preset("cluttered", seed=4))
    cfg = TrackerConfig(min_hits=2)
    rec_a = run_tracker(seq_a, cfg)
    rec_b = run_tracker(seq_b, cfg)
    pooled = aggregate(
        [evaluate_sequence(seq_a.gt, rec_a), evaluate_sequence(seq_b.gt, rec_b)]
    )

    offset = seq_a.scenario.frame_count
    id_offset = 1000  # keep identities disjoint across the concatenation
    concat_gt = list(seq_a.gt.values())
    for tid, track in seq_b.gt.items():
        shifted = GroundTruthTrack(tid + id_offset)
        for frame, gbox in track.boxes.items():
            shifted.boxes[frame + offset] = gbox
        concat_gt.append(shifted)
    concat_hyp = list(rec_a) + [
        TrackRecord(r.frame + offset, r.track_id + id_offset, r.bbox, r.score)
        for r in rec_b
    ]
    single = evaluate_sequence(concat_gt, concat_hyp)
    for field in ("tp", "fp", "fn", "id_switches", "idtp", "idfp", "idfn", "gt_count"):
        assert getattr(pooled, field) == getattr(single, field)
    for field in ("mota", "motp", "idf1", "idp", "idr", "rcll", "prcn"):
        assert getattr(pooled, field) == getattr(single, field)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    _pass(7, f"pooled OVERALL equals single-pass concatenated evaluation ({elapsed:.1f}s)")


def test_criterion_8_alpha_sweep_shape(tmp_path, capsys):
    start = time.perf_counter()
    seq_args = []
    for name in preset_names():
        seq_dir = tmp_path / name
        export(generate(preset(name, seed=0)), seq_dir)
        seq_args += ["--seq", str(seq_dir)]
    out = tmp_path / "sweep.csv"
    grid = ",".join(f"{v / 10:.1f}" for v in range(11))
    code = main([
        "sweep-alpha", *seq_args, "--alphas", grid,
        "--variants", "byte,ocsort", "--out", str(out),
        "--min-hits", "1", "--match-thresh-first", "0.05",
        "--roi-source", "last_observation",
    ])
    capsys.readouterr()
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "variant,alpha,MOTA,IDF1,tag"
    for variant in ("byte", "ocsort"):
        grid_rows = [l for l in lines[1:] if l.startswith(variant + ",") and l.endswith(",")]
        assert len(grid_rows) == 11
        tagged = [l for l in lines[1:] if l.startswith(variant + ",") and not l.endswith(",")]
        assert {l.split(",")[4] for l in tagged} == {"best-mota", "best-idf1"}
        idf1_by_alpha = {float(l.split(",")[1]): float(l.split(",")[3]) for l in grid_rows}
        best_idf1 = max(idf1_by_alpha.values())
        assert best_idf1 >= idf1_by_alpha[1.0]
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    _pass(8, f"11-point sweep x 2 variants over 5 scenarios, argmax rows present ({elapsed:.1f}s)")


def test_criterion_9_format_round_trips(tmp_path):
    start = time.perf_counter()
    fixtures = [(name, seed) for name in preset_names() for seed in range(10)]
    assert len(fixtures) == 50
    for k, (name, seed) in enumerate(fixtures):
        seq = generate(preset(name, seed=seed))
        seq_dir = tmp_path / f"fix{k}"
        export(seq, seq_dir)
        manifest = load_manifest(seq_dir)
        gt = read_ground_truth(seq_dir / "gt" / "gt.txt")
        assert set(gt) == set(seq.gt)
        for tid in gt:
            assert gt[tid].boxes == seq.gt[tid].boxes
        dets = read_detections(seq_dir / "det" / "det.txt")
        assert dets == {f: v for f, v in seq.detections.items() if v}
        frame = 1 + (seed % manifest.frame_count)
        loaded = load_image(image_path(manifest, frame), manifest.bit_depth)
        assert np.array_equal(loaded.pixels, seq.image_at(frame).pixels)

        records = run_tracker(seq, TrackerConfig(min_hits=1, match_thresh_first=0.05))
        result_path = seq_dir / "result.txt"
        write_results(result_path, records)
        assert read_results(result_path) == sorted(
            records, key=lambda r: (r.frame, r.track_id)
        )
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _pass(9, f"det/gt/result/image round trips exact over 50 fixtures ({elapsed:.1f}s)")


DATASET_ENV = "THERMOTRACK_DATASET_DIR"


@pytest.mark.skipif(DATASET_ENV not in os.environ,
                    reason=f"set {DATASET_ENV} to a directory of validation sequences")
def test_criterion_10_dataset_reproduction():
    """Optional: six-sequence table structure and fused-over-motion direction."""
    root = Path(os.environ[DATASET_ENV])
    seq_dirs = sorted(p for p in root.iterdir() if (p / "seqinfo.ini").is_file())
    assert seq_dirs, f"no sequences under {root}"

    def pooled(config):
        reports = []
        for seq_dir in seq_dirs:
            manifest = load_manifest(seq_dir)
            dets = read_detections(seq_dir / "det" / "det.txt")
            tracker = Tracker(config)
            for frame in range(1, manifest.frame_count + 1):
                img = load_image(image_path(manifest, frame), manifest.bit_depth)
                tracker.step(img, dets.get(frame, []), frame_index=frame)
            gt = read_ground_truth(seq_dir / "gt" / "gt.txt")
            reports.append(
                evaluate_sequence(gt, tracker.finish(), sequence=manifest.name)
            )
        return reports, aggregate(reports)

    from thermotrack.metrics import metrics_csv

    for variant, alpha in (("byte", 0.3), ("ocsort", 0.8)):
        fused_reports, fused_overall = pooled(TrackerConfig(variant=variant, alpha=alpha))
        _, motion_overall = pooled(TrackerConfig(variant=variant, alpha=1.0))
        table = metrics_csv(fused_reports)
        lines = table.strip().split("\n")
        assert lines[0] == "sequence,IDF1,IDP,IDR,Rcll,Prcn,MOTA,MOTP"
        assert len(lines) == len(seq_dirs) + 2  # header + rows + OVERALL
        assert lines[-1].startswith("OVERALL,")
        assert fused_overall.mota > motion_overall.mota
        assert fused_overall.idf1 > motion_overall.idf1
    _pass(10, "dataset table structure and fused-over-motion improvement direction")
