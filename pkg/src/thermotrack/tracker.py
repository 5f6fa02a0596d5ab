"""Tracklet lifecycle engines: two-tier BYTE association and an
observation-centric variant, both driven by the fused similarity score.

Per frame the engine predicts every live track, splits detections into high-
and low-confidence tiers, matches the high tier first with the fused
motion/thermal score, gives the low tier a second motion-only pass instead of
discarding it, and finally spawns, promotes, or retires tracks. The
observation-centric variant adds a recovery pass that re-associates lost
tracks by IoU against their last accepted observation rather than the drifted
prediction, and rebuilds the Kalman state along a straight-line virtual
trajectory on recovery.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .association import (
    Histogram,
    HistogramConfig,
    fuse,
    histogram_of_box,
    solve_assignment,
    thermal_similarity_from_histograms,
    thermal_similarity_matrix,
)
from .core import BoundingBox, ConfigurationError, Detection, GrayImage, SequencingError, iou
from .motion import KalmanFilter, KalmanState, motion_similarity_matrix, state_to_box

__all__ = [
    "TrackStatus",
    "TrackerConfig",
    "Tracklet",
    "TrackRecord",
    "Tracker",
    "BYTE_TUNED",
    "OCSORT_TUNED",
]

VARIANTS = ("byte", "ocsort")
ROI_SOURCES = ("prediction", "last_observation")


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"
    REMOVED = "removed"


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker hyperparameters; every field is sweepable from the CLI.

    ``alpha`` weights motion similarity in the fused score (1 - alpha goes to
    thermal identity). The low-confidence second stage is motion-only unless
    ``use_thermal_in_second_stage`` is set, since low-confidence boxes are
    often partial and their histograms unreliable. ``roi_source`` selects
    where track histograms come from: pixels under the current prediction, or
    a cache of the last matched observation's histogram.
    """

    variant: str = "byte"
    alpha: float = 0.3
    high_thresh: float = 0.6
    low_thresh: float = 0.1
    match_thresh_first: float = 0.2
    match_thresh_second: float = 0.5
    new_track_thresh: float = 0.7
    max_lost_frames: int = 30
    min_hits: int = 2
    use_thermal_in_second_stage: bool = False
    disable_thermal: bool = False
    roi_source: str = "prediction"
    histogram: HistogramConfig = field(default_factory=HistogramConfig)

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; expected {VARIANTS}")
        if self.roi_source not in ROI_SOURCES:
            raise ConfigurationError(
                f"unknown roi_source {self.roi_source!r}; expected {ROI_SOURCES}"
            )
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigurationError(f"alpha {self.alpha} outside [0, 1]")
        if not (0.0 <= self.low_thresh <= self.high_thresh <= 1.0):
            raise ConfigurationError(
                f"need 0 <= low_thresh <= high_thresh <= 1, got "
                f"{self.low_thresh} / {self.high_thresh}"
            )
        if self.max_lost_frames < 0 or self.min_hits < 1:
            raise ConfigurationError("max_lost_frames must be >= 0 and min_hits >= 1")


# Published operating points: byte benefits most from a thermal-heavy mix,
# the observation-centric variant from a motion-heavy one.
BYTE_TUNED = TrackerConfig(variant="byte", alpha=0.3)
OCSORT_TUNED = TrackerConfig(variant="ocsort", alpha=0.8)


@dataclass
class Tracklet:
    """One identity under construction: motion state plus lifecycle bookkeeping."""

    track_id: int
    state: KalmanState
    status: TrackStatus
    last_observation: BoundingBox
    last_frame: int
    hits: int = 1
    frames_since_update: int = 0
    score: float = 1.0
    class_id: int = 1
    appearance: Histogram | None = None


@dataclass(frozen=True)
class TrackRecord:
    """One confirmed output: frame index, identity, box estimate, confidence."""

    frame: int
    track_id: int
    bbox: BoundingBox
    score: float


class Tracker:
    """Single-sequence tracker; feed frames in order via :meth:`step`.

    Mutable per-sequence state, so use one instance per sequence (distinct
    sequences may run on distinct threads). Given identical configuration,
    images and detections the output records are identical across runs.
    """

    def __init__(self, config: TrackerConfig = TrackerConfig()) -> None:
        self.config = config
        self._kf = KalmanFilter()
        self._tracks: list[Tracklet] = []
        self._next_id = 1
        self._frame = 0
        self._records: list[TrackRecord] = []

    @property
    def frame(self) -> int:
        return self._frame

    @property
    def tracks(self) -> list[Tracklet]:
        return list(self._tracks)

    def step(
        self,
        image: GrayImage,
        detections: Sequence[Detection],
        frame_index: int | None = None,
    ) -> list[tuple[int, BoundingBox, float]]:
        """Process one frame and return (track_id, box, score) per confirmed track.

        ``frame_index`` is optional; when given it must be exactly one past
        the previous frame (1-based), otherwise a SequencingError is raised.
        """
        expected = self._frame + 1
        if frame_index is not None and frame_index != expected:
            raise SequencingError(
                f"expected frame {expected}, got {frame_index}; frames must arrive in order"
            )
        frame = expected
        self._frame = frame
        cfg = self.config

        for track in self._tracks:
            track.state = self._kf.predict(track.state)

        d_high = [d for d in detections if d.score >= cfg.high_thresh]
        d_low = [d for d in detections if cfg.low_thresh <= d.score < cfg.high_thresh]

        matched: list[tuple[Tracklet, Detection, bool]] = []

        # Stage 1: confirmed + lost tracks against high-confidence detections,
        # scored with the fused similarity.
        pool_main = [t for t in self._tracks if t.status in (TrackStatus.CONFIRMED, TrackStatus.LOST)]
        sim1 = self._similarity(pool_main, d_high, image, fused=True)
        res1 = solve_assignment(sim1, cfg.match_thresh_first)
        matched += [(pool_main[i], d_high[j], False) for i, j in res1.matches]
        leftovers = [pool_main[i] for i in res1.unmatched_tracks]
        remaining_high = [d_high[j] for j in res1.unmatched_dets]

        # Stage 2: remaining confirmed tracks get a lower-priority pass over
        # the low-confidence tier.
        pool_second = [t for t in leftovers if t.status is TrackStatus.CONFIRMED]
        sim2 = self._similarity(pool_second, d_low, image, fused=cfg.use_thermal_in_second_stage)
        res2 = solve_assignment(sim2, cfg.match_thresh_second)
        matched += [(pool_second[i], d_low[j], False) for i, j in res2.matches]

        # Stage 3 (ocsort variant): recover lost tracks by overlap with their
        # last accepted observation instead of the drifted prediction.
        lost_pool = [t for t in leftovers if t.status is TrackStatus.LOST]
        if cfg.variant == "ocsort" and lost_pool and remaining_high:
            sim3 = np.zeros((len(lost_pool), len(remaining_high)))
            for i, track in enumerate(lost_pool):
                for j, det in enumerate(remaining_high):
                    sim3[i, j] = iou(track.last_observation, det.bbox)
            res3 = solve_assignment(sim3, cfg.match_thresh_first)
            matched += [(lost_pool[i], remaining_high[j], True) for i, j in res3.matches]
            remaining_high = [remaining_high[j] for j in res3.unmatched_dets]

        # Stage 4: tentative tracks try the leftover high detections.
        pool_tentative = [t for t in self._tracks if t.status is TrackStatus.TENTATIVE]
        sim4 = self._similarity(pool_tentative, remaining_high, image, fused=True)
        res4 = solve_assignment(sim4, cfg.match_thresh_first)
        matched += [(pool_tentative[i], remaining_high[j], False) for i, j in res4.matches]
        remaining_high = [remaining_high[j] for j in res4.unmatched_dets]

        matched_ids = set()
        for track, det, recovered in matched:
            if recovered:
                track.state = self._virtual_reupdate(track, det.bbox, frame)
            else:
                track.state = self._kf.update(track.state, det.bbox)
            track.hits += 1
            track.frames_since_update = 0
            track.score = det.score
            track.class_id = det.class_id
            track.last_observation = det.bbox
            track.last_frame = frame
            if track.status is TrackStatus.TENTATIVE:
                if track.hits >= cfg.min_hits:
                    track.status = TrackStatus.CONFIRMED
            else:
                track.status = TrackStatus.CONFIRMED
            if det.score >= cfg.high_thresh and not cfg.disable_thermal:
                track.appearance = histogram_of_box(image, det.bbox, cfg.histogram)
            matched_ids.add(track.track_id)

        for track in self._tracks:
            if track.track_id in matched_ids:
                continue
            track.frames_since_update += 1
            if track.status is TrackStatus.TENTATIVE:
                track.status = TrackStatus.REMOVED
            elif track.status is TrackStatus.CONFIRMED:
                track.status = TrackStatus.LOST
            if (
                track.status is TrackStatus.LOST
                and track.frames_since_update > cfg.max_lost_frames
            ):
                track.status = TrackStatus.REMOVED

        for det in remaining_high:
            if det.score >= cfg.new_track_thresh:
                self._spawn(det, image, frame)

        self._tracks = [t for t in self._tracks if t.status is not TrackStatus.REMOVED]

        # Matched tracks report the accepted detection box: identity comes
        # from the track, geometry from the detector. The Kalman posterior
        # only feeds the next frame's prediction.
        outputs = [
            (t.track_id, t.last_observation, t.score)
            for t in self._tracks
            if t.status is TrackStatus.CONFIRMED
        ]
        self._records.extend(
            TrackRecord(frame, tid, box, score) for tid, box, score in outputs
        )
        return outputs

    def finish(self) -> list[TrackRecord]:
        """All confirmed outputs so far, ordered by (frame, track_id)."""
        return list(self._records)

    # internals

    def _spawn(self, det: Detection, image: GrayImage, frame: int) -> None:
        status = (
            TrackStatus.CONFIRMED if self.config.min_hits <= 1 else TrackStatus.TENTATIVE
        )
        appearance = None
        if not self.config.disable_thermal:
            appearance = histogram_of_box(image, det.bbox, self.config.histogram)
        self._tracks.append(
            Tracklet(
                track_id=self._next_id,
                state=self._kf.initiate(det.bbox),
                status=status,
                last_observation=det.bbox,
                last_frame=frame,
                score=det.score,
                class_id=det.class_id,
                appearance=appearance,
            )
        )
        self._next_id += 1

    def _similarity(
        self,
        pool: Sequence[Tracklet],
        dets: Sequence[Detection],
        image: GrayImage,
        fused: bool,
    ) -> np.ndarray:
        predicted = [state_to_box(t.state) for t in pool]
        s_motion = motion_similarity_matrix(predicted, dets)
        if not fused or self.config.disable_thermal or not pool or not dets:
            return s_motion
        det_boxes = [d.bbox for d in dets]
        if self.config.roi_source == "prediction":
            s_thermal = thermal_similarity_matrix(
                predicted, det_boxes, image, self.config.histogram
            )
        else:
            s_thermal = thermal_similarity_from_histograms(
                [t.appearance for t in pool], det_boxes, image, self.config.histogram
            )
        return fuse(s_motion, s_thermal, self.config.alpha)

    def _virtual_reupdate(
        self, track: Tracklet, det_box: BoundingBox, frame: int
    ) -> KalmanState:
        """Rebuild the state along a straight line from the last observation.

        Re-running predict/update over the interpolated boxes recalibrates the
        velocity estimate toward the observed displacement instead of whatever
        the filter drifted to while the track was lost.
        """
        gap = frame - track.last_frame
        start = track.last_observation
        state = self._kf.initiate(start)
        for k in range(1, gap + 1):
            t = k / gap
            virtual = BoundingBox(
                start.left + t * (det_box.left - start.left),
                start.top + t * (det_box.top - start.top),
                start.width + t * (det_box.width - start.width),
                start.height + t * (det_box.height - start.height),
            )
            state = self._kf.predict(state)
            state = self._kf.update(state, virtual)
        return state


def motion_only(config: TrackerConfig) -> TrackerConfig:
    """A copy of ``config`` with the thermal path disabled entirely."""
    return replace(config, disable_thermal=True)
