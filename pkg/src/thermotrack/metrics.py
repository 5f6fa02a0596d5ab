"""CLEAR-MOT and identity-metric evaluation.

Per-frame matching between ground truth and hypotheses is Hungarian on IoU
with a continuity preference: a pair matched in the previous frame is kept
while it still clears the overlap threshold, before the rest is re-solved.
MOTP is reported as the mean (1 - IoU) distance over matches, a distance
rather than a percentage. Identity metrics (IDF1/IDP/IDR) come from one global
min-cost bipartite matching of whole trajectories with per-frame binary
overlap at the same threshold.
"""

from __future__ import annotations

import io as _stringio
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .association import solve_assignment
from .core import BoundingBox, DataFormatError, iou
from .tracker import TrackRecord

__all__ = [
    "GroundTruthTrack",
    "EvalReport",
    "evaluate_sequence",
    "aggregate",
    "metrics_csv",
    "write_metrics_csv",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("sequence", "IDF1", "IDP", "IDR", "Rcll", "Prcn", "MOTA", "MOTP")


@dataclass
class GroundTruthTrack:
    """One annotated identity: its box per frame plus per-frame flags."""

    track_id: int
    boxes: dict[int, BoundingBox] = field(default_factory=dict)
    class_id: int = 1
    visibility: dict[int, float] = field(default_factory=dict)
    ignored: set[int] = field(default_factory=set)


@dataclass(frozen=True)
class EvalReport:
    """Metric row for one sequence (or the pooled OVERALL row).

    Ratios are recomputable from the raw event counts, which is what
    :func:`aggregate` relies on. ``flags`` records degenerate ratios that were
    reported as 0 (for example precision with no hypotheses at all).
    """

    sequence: str
    idf1: float
    idp: float
    idr: float
    rcll: float
    prcn: float
    mota: float
    motp: float
    tp: int
    fp: int
    fn: int
    id_switches: int
    matched_pairs: int
    sum_match_distance: float
    idtp: int
    idfp: int
    idfn: int
    gt_count: int
    hyp_count: int
    flags: tuple[str, ...] = ()


def _ratio(numerator: float, denominator: float, name: str, flags: list[str]) -> float:
    if denominator <= 0:
        flags.append(f"{name}-undefined")
        return 0.0
    return numerator / denominator


def evaluate_sequence(
    gt_tracks: Iterable[GroundTruthTrack] | Mapping[int, GroundTruthTrack],
    records: Sequence[TrackRecord],
    iou_thresh: float = 0.5,
    sequence: str = "seq",
    min_visibility: float | None = None,
) -> EvalReport:
    """Evaluate one sequence's tracker output against its ground truth.

    ``min_visibility`` optionally drops ground-truth boxes below a visibility
    cutoff; by default every annotated box counts. Rows flagged as ignore
    (zero-confidence annotations) never count.
    """
    if isinstance(gt_tracks, Mapping):
        gt_tracks = list(gt_tracks.values())
    else:
        gt_tracks = list(gt_tracks)

    gt_frames: dict[int, list[tuple[int, BoundingBox]]] = {}
    for track in gt_tracks:
        for frame, box in track.boxes.items():
            if frame in track.ignored:
                continue
            if min_visibility is not None and track.visibility.get(frame, 1.0) < min_visibility:
                continue
            gt_frames.setdefault(frame, []).append((track.track_id, box))

    hyp_frames: dict[int, list[tuple[int, BoundingBox]]] = {}
    for rec in records:
        entries = hyp_frames.setdefault(rec.frame, [])
        if any(tid == rec.track_id for tid, _ in entries):
            raise DataFormatError(
                f"duplicate hypothesis id {rec.track_id} in frame {rec.frame}"
            )
        entries.append((rec.track_id, rec.bbox))

    frames = sorted(set(gt_frames) | set(hyp_frames))
    tp = fp = fn = id_switches = 0
    sum_distance = 0.0
    last_hyp_for_gt: dict[int, int] = {}  # persists across unmatched gaps
    # continuity state: gt id -> hyp id matched in the previous frame
    previous_pairs: dict[int, int] = {}

    for frame in frames:
        gts = sorted(gt_frames.get(frame, []), key=lambda e: e[0])
        hyps = sorted(hyp_frames.get(frame, []), key=lambda e: e[0])
        matches: list[tuple[int, int, float]] = []  # (gt_id, hyp_id, iou)

        free_gt = list(range(len(gts)))
        free_hyp = list(range(len(hyps)))
        hyp_index = {hid: k for k, (hid, _) in enumerate(hyps)}
        taken_hyp: set[int] = set()
        for gi, (gid, gbox) in enumerate(gts):
            hid = previous_pairs.get(gid)
            if hid is None or hid not in hyp_index or hid in taken_hyp:
                continue
            hi = hyp_index[hid]
            overlap = iou(gbox, hyps[hi][1])
            if overlap >= iou_thresh:
                matches.append((gid, hid, overlap))
                taken_hyp.add(hid)
                free_gt.remove(gi)
                free_hyp.remove(hi)

        if free_gt and free_hyp:
            sim = np.zeros((len(free_gt), len(free_hyp)))
            for a, gi in enumerate(free_gt):
                for b, hi in enumerate(free_hyp):
                    sim[a, b] = iou(gts[gi][1], hyps[hi][1])
            result = solve_assignment(sim, iou_thresh)
            for a, b in result.matches:
                gi, hi = free_gt[a], free_hyp[b]
                matches.append((gts[gi][0], hyps[hi][0], sim[a, b]))

        matched_gt = {gid for gid, _, _ in matches}
        matched_hyp = {hid for _, hid, _ in matches}
        tp += len(matches)
        fn += len(gts) - len(matches)
        fp += len(hyps) - len(matches)
        for gid, hid, overlap in matches:
            sum_distance += 1.0 - overlap
            if gid in last_hyp_for_gt and last_hyp_for_gt[gid] != hid:
                id_switches += 1
            last_hyp_for_gt[gid] = hid
        previous_pairs = {gid: hid for gid, hid, _ in matches}

    gt_count = sum(len(v) for v in gt_frames.values())
    hyp_count = sum(len(v) for v in hyp_frames.values())

    idtp, idfp, idfn = _identity_counts(gt_frames, hyp_frames, iou_thresh)

    flags: list[str] = []
    rcll = _ratio(tp, tp + fn, "rcll", flags)
    prcn = _ratio(tp, tp + fp, "prcn", flags)
    mota = 1.0 - (fn + fp + id_switches) / gt_count if gt_count > 0 else 0.0
    if gt_count == 0:
        flags.append("mota-undefined")
    motp = sum_distance / tp if tp > 0 else 0.0
    if tp == 0:
        flags.append("motp-undefined")
    idf1 = _ratio(2 * idtp, 2 * idtp + idfp + idfn, "idf1", flags)
    idp = _ratio(idtp, idtp + idfp, "idp", flags)
    idr = _ratio(idtp, idtp + idfn, "idr", flags)

    return EvalReport(
        sequence=sequence,
        idf1=idf1,
        idp=idp,
        idr=idr,
        rcll=rcll,
        prcn=prcn,
        mota=mota,
        motp=motp,
        tp=tp,
        fp=fp,
        fn=fn,
        id_switches=id_switches,
        matched_pairs=tp,
        sum_match_distance=sum_distance,
        idtp=idtp,
        idfp=idfp,
        idfn=idfn,
        gt_count=gt_count,
        hyp_count=hyp_count,
        flags=tuple(flags),
    )


def _identity_counts(
    gt_frames: dict[int, list[tuple[int, BoundingBox]]],
    hyp_frames: dict[int, list[tuple[int, BoundingBox]]],
    iou_thresh: float,
) -> tuple[int, int, int]:
    """Trajectory-level identity counts via global min-cost matching.

    Each (gt track, hyp track) pair scores the number of frames where both are
    present and overlap at least ``iou_thresh``; the bipartite matching that
    minimizes total identity errors determines IDTP.
    """
    gt_traj: dict[int, dict[int, BoundingBox]] = {}
    for frame, entries in gt_frames.items():
        for gid, box in entries:
            gt_traj.setdefault(gid, {})[frame] = box
    hyp_traj: dict[int, dict[int, BoundingBox]] = {}
    for frame, entries in hyp_frames.items():
        for hid, box in entries:
            hyp_traj.setdefault(hid, {})[frame] = box

    gt_ids = sorted(gt_traj)
    hyp_ids = sorted(hyp_traj)
    total_gt = sum(len(t) for t in gt_traj.values())
    total_hyp = sum(len(t) for t in hyp_traj.values())
    n_g, n_h = len(gt_ids), len(hyp_ids)
    if n_g == 0 or n_h == 0:
        return 0, total_hyp, total_gt

    overlap = np.zeros((n_g, n_h), dtype=int)
    for a, gid in enumerate(gt_ids):
        g = gt_traj[gid]
        for b, hid in enumerate(hyp_ids):
            h = hyp_traj[hid]
            count = 0
            for frame, gbox in g.items():
                hbox = h.get(frame)
                if hbox is not None and iou(gbox, hbox) >= iou_thresh:
                    count += 1
            overlap[a, b] = count

    gt_len = np.array([len(gt_traj[g]) for g in gt_ids])
    hyp_len = np.array([len(hyp_traj[h]) for h in hyp_ids])
    big = float(total_gt + total_hyp + 1)

    size = n_g + n_h
    cost = np.full((size, size), big)
    cost[:n_g, :n_h] = gt_len[:, None] + hyp_len[None, :] - 2 * overlap
    for a in range(n_g):
        cost[a, n_h + a] = float(gt_len[a])  # gt track left unmatched
    for b in range(n_h):
        cost[n_g + b, b] = float(hyp_len[b])  # hyp track left unmatched
    cost[n_g:, n_h:] = 0.0

    rows, cols = linear_sum_assignment(cost)
    idtp = 0
    for r, c in zip(rows, cols):
        if r < n_g and c < n_h:
            idtp += int(overlap[r, c])
    return idtp, total_hyp - idtp, total_gt - idtp


def aggregate(reports: Sequence[EvalReport], sequence: str = "OVERALL") -> EvalReport:
    """Pool raw event counts across sequences and recompute every ratio.

    This is count pooling, not averaging of percentages, matching how an
    overall row relates to its per-sequence rows.
    """
    if not reports:
        raise ValueError("cannot aggregate an empty report list")
    totals = {
        name: sum(getattr(r, name) for r in reports)
        for name in (
            "tp",
            "fp",
            "fn",
            "id_switches",
            "matched_pairs",
            "idtp",
            "idfp",
            "idfn",
            "gt_count",
            "hyp_count",
        )
    }
    sum_distance = sum(r.sum_match_distance for r in reports)
    flags: list[str] = []
    tp, fp, fn = totals["tp"], totals["fp"], totals["fn"]
    gt_count = totals["gt_count"]
    idtp, idfp, idfn = totals["idtp"], totals["idfp"], totals["idfn"]
    rcll = _ratio(tp, tp + fn, "rcll", flags)
    prcn = _ratio(tp, tp + fp, "prcn", flags)
    mota = 1.0 - (fn + fp + totals["id_switches"]) / gt_count if gt_count > 0 else 0.0
    if gt_count == 0:
        flags.append("mota-undefined")
    motp = sum_distance / tp if tp > 0 else 0.0
    if tp == 0:
        flags.append("motp-undefined")
    return EvalReport(
        sequence=sequence,
        idf1=_ratio(2 * idtp, 2 * idtp + idfp + idfn, "idf1", flags),
        idp=_ratio(idtp, idtp + idfp, "idp", flags),
        idr=_ratio(idtp, idtp + idfn, "idr", flags),
        rcll=rcll,
        prcn=prcn,
        mota=mota,
        motp=motp,
        tp=tp,
        fp=fp,
        fn=fn,
        id_switches=totals["id_switches"],
        matched_pairs=totals["matched_pairs"],
        sum_match_distance=sum_distance,
        idtp=idtp,
        idfp=idfp,
        idfn=idfn,
        gt_count=gt_count,
        hyp_count=totals["hyp_count"],
        flags=tuple(flags),
    )


def metrics_csv(reports: Sequence[EvalReport], include_overall: bool = True) -> str:
    """Render reports as CSV with one row per sequence plus an OVERALL row."""
    out = _stringio.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    rows = list(reports)
    if include_overall and rows:
        rows.append(replace(aggregate(rows), sequence="OVERALL"))
    for r in rows:
        values = (r.idf1, r.idp, r.idr, r.rcll, r.prcn, r.mota, r.motp)
        out.write(r.sequence + "," + ",".join(f"{v:.6f}" for v in values) + "\n")
    return out.getvalue()


def write_metrics_csv(path, reports: Sequence[EvalReport], include_overall: bool = True) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(metrics_csv(reports, include_overall=include_overall))
