import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermotrack.core import BoundingBox, DataFormatError, iou
from thermotrack.metrics import (
    GroundTruthTrack,
    aggregate,
    evaluate_sequence,
    metrics_csv,
)
from thermotrack.tracker import TrackRecord


def gt_track(track_id, frames, box):
    track = GroundTruthTrack(track_id)
    for f in frames:
        track.boxes[f] = box
        track.visibility[f] = 1.0
    return track


def records_for(track_id, frames, box, score=1.0):
    return [TrackRecord(f, track_id, box, score) for f in frames]


BOX = BoundingBox(10, 10, 20, 40)
OTHER = BoundingBox(200, 200, 20, 40)


class TestEvaluateSequence:
    def test_perfect_tracker(self):
        gt = [gt_track(1, range(1, 11), BOX), gt_track(2, range(1, 11), OTHER)]
        hyp = records_for(5, range(1, 11), BOX) + records_for(9, range(1, 11), OTHER)
        report = evaluate_sequence(gt, hyp)
        assert report.idf1 == 1.0
        assert report.rcll == 1.0 and report.prcn == 1.0
        assert report.mota == 1.0
        assert report.motp == 0.0
        assert report.id_switches == 0

    def test_empty_hypothesis(self):
        gt = [gt_track(1, range(1, 11), BOX)]
        report = evaluate_sequence(gt, [])
        assert report.mota == 0.0
        assert report.fn == 10 and report.rcll == 0.0
        assert report.prcn == 0.0
        assert "prcn-undefined" in report.flags

    def test_id_switch_fixture(self):
        # one 10-frame GT track, perfect boxes, hypothesis id changes at frame 6:
        # mota = 1 - 1/10, identity metrics split the track in half
        gt = [gt_track(1, range(1, 11), BOX)]
        hyp = records_for(1, range(1, 6), BOX) + records_for(2, range(6, 11), BOX)
        report = evaluate_sequence(gt, hyp)
        assert report.id_switches == 1
        assert report.mota == 0.9
        assert report.idtp == 5 and report.idfp == 5 and report.idfn == 5
        assert report.idf1 == 0.5

    def test_duplicate_hypothesis_id_in_frame_rejected(self):
        hyp = [TrackRecord(1, 7, BOX, 1.0), TrackRecord(1, 7, OTHER, 1.0)]
        with pytest.raises(DataFormatError):
            evaluate_sequence([gt_track(1, [1], BOX)], hyp)

    def test_match_below_threshold_not_counted(self):
        gt = [gt_track(1, [1], BoundingBox(0, 0, 10, 10))]
        hyp = [TrackRecord(1, 1, BoundingBox(8, 8, 10, 10), 1.0)]  # iou ~ 0.02
        report = evaluate_sequence(gt, hyp)
        assert report.tp == 0 and report.fn == 1 and report.fp == 1

    def test_continuity_preference_prevents_spurious_switch(self):
        # two hyp boxes both above threshold on one gt: the previously matched
        # id is retained even when the other is momentarily closer
        gt_box = BoundingBox(0, 0, 10, 10)
        near = BoundingBox(1, 0, 10, 10)
        nearer = BoundingBox(0.5, 0, 10, 10)
        gt = [gt_track(1, [1, 2], gt_box)]
        hyp = [
            TrackRecord(1, 1, gt_box, 1.0),
            TrackRecord(2, 1, near, 1.0),
            TrackRecord(2, 2, nearer, 1.0),
        ]
        report = evaluate_sequence(gt, hyp)
        assert report.id_switches == 0
        assert report.fp == 1  # the unmatched extra box

    def test_ignored_rows_excluded(self):
        track = gt_track(1, [1, 2, 3], BOX)
        track.ignored.add(2)
        report = evaluate_sequence([track], records_for(1, [1, 3], BOX))
        assert report.gt_count == 2
        assert report.mota == 1.0

    def test_visibility_cutoff_switch(self):
        track = gt_track(1, [1, 2], BOX)
        track.visibility[2] = 0.1
        report = evaluate_sequence([track], records_for(1, [1], BOX), min_visibility=0.5)
        assert report.gt_count == 1 and report.mota == 1.0

    def test_motp_is_mean_distance(self):
        # shifted boxes with a known overlap: iou = 50/150, distance = 2/3
        gt = [gt_track(1, [1, 2], BoundingBox(0, 0, 10, 10))]
        shifted = BoundingBox(5, 0, 10, 10)
        report = evaluate_sequence(gt, records_for(1, [1, 2], shifted), iou_thresh=0.3)
        assert report.motp == pytest.approx(2 / 3, abs=1e-12)
        assert 0.0 <= report.motp <= 1.0 - 0.3 + 1e-12

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_hypothesis_id_relabeling_invariance(self, seed):
        rng = np.random.default_rng(seed)
        gt = [
            gt_track(1, range(1, 8), BoundingBox(0, 0, 10, 10)),
            gt_track(2, range(3, 10), BoundingBox(40, 40, 12, 12)),
        ]
        hyp = []
        for f in range(1, 10):
            for tid, base in ((4, (0, 0)), (6, (40, 40))):
                if rng.random() < 0.8:
                    jitter = rng.uniform(-2, 2, size=2)
                    hyp.append(
                        TrackRecord(
                            f, tid,
                            BoundingBox(base[0] + jitter[0], base[1] + jitter[1], 11, 11),
                            1.0,
                        )
                    )
        base_report = evaluate_sequence(gt, hyp)
        mapping = {4: 17, 6: 3}
        relabeled = [
            TrackRecord(r.frame, mapping[r.track_id], r.bbox, r.score) for r in hyp
        ]
        new_report = evaluate_sequence(gt, relabeled)
        for field in ("idf1", "idp", "idr", "rcll", "prcn", "mota", "motp", "id_switches"):
            assert getattr(base_report, field) == getattr(new_report, field)


class TestIdentityMatchingOracle:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 100_000))
    def test_idtp_equals_exhaustive_track_pairing(self, seed):
        # brute force over every injective gt<->hyp track pairing: the best
        # total per-frame overlap count must equal the reported IDTP
        rng = np.random.default_rng(seed)
        n_gt, n_hyp, n_frames = rng.integers(1, 5), rng.integers(1, 5), 8
        gt_tracks, hyp = [], []
        anchors = [(40 * k, 0) for k in range(max(n_gt, n_hyp))]
        for g in range(n_gt):
            track = GroundTruthTrack(g + 1)
            for f in range(1, n_frames + 1):
                if rng.random() < 0.75:
                    ax, ay = anchors[rng.integers(0, len(anchors))]
                    track.boxes[f] = BoundingBox(ax, ay, 10, 10)
            gt_tracks.append(track)
        for h in range(n_hyp):
            for f in range(1, n_frames + 1):
                if rng.random() < 0.75:
                    ax, ay = anchors[rng.integers(0, len(anchors))]
                    hyp.append(TrackRecord(f, h + 1, BoundingBox(ax, ay, 10, 10), 1.0))

        report = evaluate_sequence(gt_tracks, hyp)

        hyp_traj = {}
        for r in hyp:
            hyp_traj.setdefault(r.track_id, {})[r.frame] = r.bbox

        def overlap_count(track, traj):
            return sum(
                1
                for f, gbox in track.boxes.items()
                if f in traj and iou(gbox, traj[f]) >= 0.5
            )

        hyp_ids = sorted(hyp_traj)
        best = 0
        for k in range(0, min(n_gt, len(hyp_ids)) + 1):
            for gt_subset in itertools.combinations(range(n_gt), k):
                for hyp_subset in itertools.permutations(hyp_ids, k):
                    total = sum(
                        overlap_count(gt_tracks[g], hyp_traj[h])
                        for g, h in zip(gt_subset, hyp_subset)
                    )
                    best = max(best, total)
        assert report.idtp == best


class TestAggregate:
    def test_single_report_identity(self):
        report = evaluate_sequence([gt_track(1, [1, 2], BOX)], records_for(1, [1, 2], BOX))
        pooled = aggregate([report])
        for field in ("idf1", "rcll", "prcn", "mota", "motp", "tp", "fp", "fn"):
            assert getattr(pooled, field) == getattr(report, field)

    def test_pooled_recall_uses_counts_not_percent_means(self):
        # unequal sequence lengths: (tp=9, fn=1) and (tp=2, fn=18) pool to
        # 11/30, while the mean of the per-sequence ratios would be 0.5
        r1 = evaluate_sequence(
            [gt_track(1, range(1, 11), BOX)],
            records_for(1, range(1, 10), BOX),
        )
        r2 = evaluate_sequence(
            [gt_track(1, range(1, 21), BOX)],
            records_for(1, range(1, 3), BOX),
        )
        assert (r1.tp, r1.fn) == (9, 1) and (r2.tp, r2.fn) == (2, 18)
        pooled = aggregate([r1, r2])
        assert pooled.rcll == pytest.approx(11 / 30, abs=1e-12)
        assert pooled.rcll != pytest.approx((0.9 + 0.1) / 2, abs=1e-3)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])

    def test_pooled_equals_concatenated_evaluation(self):
        # two sequences with disjoint ids; re-offsetting frames and evaluating
        # the concatenation in one pass must match pooled counts
        gt_a = [gt_track(1, range(1, 6), BOX)]
        hyp_a = records_for(11, range(1, 4), BOX)
        gt_b = [gt_track(2, range(1, 8), OTHER)]
        hyp_b = records_for(12, range(2, 8), OTHER) + records_for(13, [1], BOX)

        pooled = aggregate(
            [evaluate_sequence(gt_a, hyp_a), evaluate_sequence(gt_b, hyp_b)]
        )

        offset = 100
        concat_gt = [gt_track(1, range(1, 6), BOX),
                     gt_track(2, [f + offset for f in range(1, 8)], OTHER)]
        concat_hyp = hyp_a + [
            TrackRecord(r.frame + offset, r.track_id, r.bbox, r.score) for r in hyp_b
        ]
        single = evaluate_sequence(concat_gt, concat_hyp)
        for field in ("tp", "fp", "fn", "id_switches", "idtp", "idfp", "idfn",
                      "gt_count", "mota", "idf1", "rcll", "prcn", "motp"):
            assert getattr(pooled, field) == getattr(single, field)

    def test_order_independent(self):
        r1 = evaluate_sequence([gt_track(1, range(1, 6), BOX)], records_for(1, range(1, 6), BOX))
        r2 = evaluate_sequence([gt_track(1, range(1, 9), OTHER)], records_for(1, range(1, 5), OTHER))
        a, b = aggregate([r1, r2]), aggregate([r2, r1])
        assert a.mota == b.mota and a.idf1 == b.idf1 and a.tp == b.tp


class TestInvariants:
    def test_mota_at_most_one_with_equality_iff_clean(self):
        gt = [gt_track(1, range(1, 6), BOX)]
        perfect = evaluate_sequence(gt, records_for(1, range(1, 6), BOX))
        assert perfect.mota == 1.0
        flawed = evaluate_sequence(gt, records_for(1, range(1, 5), BOX))
        assert flawed.mota < 1.0

    def test_ratios_in_unit_interval(self):
        gt = [gt_track(1, range(1, 9), BOX)]
        hyp = records_for(1, range(1, 5), BOX) + records_for(2, range(5, 11), OTHER)
        report = evaluate_sequence(gt, hyp)
        for field in ("idf1", "idp", "idr", "rcll", "prcn"):
            assert 0.0 <= getattr(report, field) <= 1.0


class TestCsv:
    def test_column_order_and_overall_row(self):
        gt = [gt_track(1, range(1, 4), BOX)]
        r1 = evaluate_sequence(gt, records_for(1, range(1, 4), BOX), sequence="a")
        r2 = evaluate_sequence(gt, [], sequence="b")
        text = metrics_csv([r1, r2])
        lines = text.strip().split("\n")
        assert lines[0] == "sequence,IDF1,IDP,IDR,Rcll,Prcn,MOTA,MOTP"
        assert lines[1].startswith("a,") and lines[2].startswith("b,")
        assert lines[3].startswith("OVERALL,")
        assert len(lines) == 4
