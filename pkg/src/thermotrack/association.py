"""Thermal-identity similarity, fusion with motion similarity, and assignment.

The identity cue works on intensity histograms of the pixel regions under the
boxes being compared: both regions are cut from the same current frame, the
histograms are normalized, and similarity is the Bhattacharyya coefficient
(1 for identical distributions, 0 for disjoint support). The fused score is a
weighted average ``alpha * motion + (1 - alpha) * thermal``, and assignment is
a minimum-cost bipartite matching on ``cost = 1 - similarity``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import BoundingBox, ConfigurationError, GrayImage, clip_to_image

__all__ = [
    "Histogram",
    "HistogramConfig",
    "AssignmentResult",
    "extract_roi",
    "compute_histogram",
    "histogram_of_box",
    "bhattacharyya",
    "thermal_similarity_matrix",
    "thermal_similarity_from_histograms",
    "fuse",
    "solve_assignment",
]


@dataclass(frozen=True, eq=False)
class Histogram:
    """Normalized intensity histogram; all-zero weights mark an empty region."""

    bins: int
    range_max: int
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.bins < 1:
            raise ConfigurationError("histogram needs at least one bin")
        if self.weights.shape != (self.bins,):
            raise ValueError("weights length must equal bin count")

    @property
    def is_empty(self) -> bool:
        return not self.weights.any()


@dataclass(frozen=True)
class HistogramConfig:
    """Binning choices for identity histograms.

    ``bins=None`` picks 32 for 8-bit images and 64 for 16-bit ones: coarse
    bins are robust to sensor noise in small regions. ``range_max=None`` uses
    the full representable range of the image.
    """

    bins: int | None = None
    range_max: int | None = None

    def resolve(self, image: GrayImage) -> tuple[int, int]:
        bins = self.bins if self.bins is not None else (32 if image.bit_depth == 8 else 64)
        range_max = self.range_max if self.range_max is not None else image.max_value
        if bins < 1:
            raise ConfigurationError("histogram bin count must be >= 1")
        if range_max < image.max_value:
            raise ConfigurationError(
                f"range_max {range_max} cannot represent {image.bit_depth}-bit intensities"
            )
        return bins, range_max


def extract_roi(image: GrayImage, box: BoundingBox) -> np.ndarray | None:
    """Pixel patch under ``box``, or None when nothing of it lies in the image.

    The box is clipped to the image, then expanded to whole pixels (floor of
    left/top, ceil of right/bottom) and re-clipped to the pixel grid.
    """
    clipped = clip_to_image(box, image.width, image.height)
    if clipped is None:
        return None
    left = max(int(math.floor(clipped.left)), 0)
    top = max(int(math.floor(clipped.top)), 0)
    right = min(int(math.ceil(clipped.right)), image.width)
    bottom = min(int(math.ceil(clipped.bottom)), image.height)
    if right - left < 1 or bottom - top < 1:
        return None
    return image.pixels[top:bottom, left:right]


def compute_histogram(roi: np.ndarray | None, bins: int, range_max: int) -> Histogram:
    """Normalized histogram of a pixel patch.

    Value v lands in bin ``floor(v * bins / range_max)`` clamped to the last
    bin; weights sum to 1. An empty patch yields the all-zero sentinel, which
    compares as dissimilar to everything.
    """
    if bins < 1:
        raise ConfigurationError("histogram bin count must be >= 1")
    if roi is None or roi.size == 0:
        return Histogram(bins, range_max, np.zeros(bins))
    values = roi.astype(np.int64, copy=False).ravel()
    indices = np.minimum(values * bins // range_max, bins - 1)
    counts = np.bincount(indices, minlength=bins).astype(float)
    return Histogram(bins, range_max, counts / counts.sum())


def histogram_of_box(image: GrayImage, box: BoundingBox, config: HistogramConfig) -> Histogram:
    """Histogram of the region of interest under ``box`` in ``image``."""
    bins, range_max = config.resolve(image)
    return compute_histogram(extract_roi(image, box), bins, range_max)


def bhattacharyya(h1: Histogram, h2: Histogram) -> float:
    """Bhattacharyya coefficient: sum over bins of sqrt(p_k * q_k).

    1.0 for identical normalized histograms, 0 for disjoint support, and 0
    whenever either side is the empty-region sentinel. Both histograms must
    share bin count and range.
    """
    if h1.bins != h2.bins or h1.range_max != h2.range_max:
        raise ConfigurationError(
            f"histogram binning mismatch: {h1.bins}/{h1.range_max} vs {h2.bins}/{h2.range_max}"
        )
    coefficient = float(np.sqrt(h1.weights * h2.weights).sum())
    return min(coefficient, 1.0)


def thermal_similarity_matrix(
    track_boxes: Sequence[BoundingBox],
    det_boxes: Sequence[BoundingBox],
    image: GrayImage,
    config: HistogramConfig = HistogramConfig(),
) -> np.ndarray:
    """Pairwise identity similarity between track and detection regions.

    Both regions are extracted from the same current image: tracks at their
    predicted locations, detections where they were reported. Rows or columns
    whose box falls outside the image are zero.
    """
    matrix = np.zeros((len(track_boxes), len(det_boxes)))
    if matrix.size == 0:
        return matrix
    track_hists = [histogram_of_box(image, b, config) for b in track_boxes]
    det_hists = [histogram_of_box(image, b, config) for b in det_boxes]
    for i, ht in enumerate(track_hists):
        for j, hd in enumerate(det_hists):
            matrix[i, j] = bhattacharyya(ht, hd)
    return matrix


def thermal_similarity_from_histograms(
    track_histograms: Sequence[Histogram | None],
    det_boxes: Sequence[BoundingBox],
    image: GrayImage,
    config: HistogramConfig = HistogramConfig(),
) -> np.ndarray:
    """Identity similarity using cached per-track histograms.

    Backs the mode where a track keeps the histogram of its last matched
    observation instead of re-reading pixels at the predicted location.
    Tracks without a cached histogram get a zero row.
    """
    matrix = np.zeros((len(track_histograms), len(det_boxes)))
    if matrix.size == 0:
        return matrix
    det_hists = [histogram_of_box(image, b, config) for b in det_boxes]
    for i, ht in enumerate(track_histograms):
        if ht is None:
            continue
        for j, hd in enumerate(det_hists):
            matrix[i, j] = bhattacharyya(ht, hd)
    return matrix


def fuse(s_motion: np.ndarray, s_thermal: np.ndarray, alpha: float) -> np.ndarray:
    """Weighted average of the two similarity matrices.

    ``alpha`` weights motion; ``1 - alpha`` weights thermal identity. The
    endpoints return the corresponding input bit-exactly, so alpha = 1 makes
    the thermal path provably inert.
    """
    motion = np.asarray(s_motion, dtype=float)
    thermal = np.asarray(s_thermal, dtype=float)
    if motion.shape != thermal.shape:
        raise ConfigurationError(
            f"similarity shape mismatch: {motion.shape} vs {thermal.shape}"
        )
    if not (isinstance(alpha, (int, float)) and 0.0 <= alpha <= 1.0):
        raise ConfigurationError(f"alpha {alpha!r} outside [0, 1]")
    if alpha == 1.0:
        return motion.copy()
    if alpha == 0.0:
        return thermal.copy()
    return alpha * motion + (1.0 - alpha) * thermal


@dataclass
class AssignmentResult:
    """Outcome of one matching round over an m x n similarity matrix."""

    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: list[int] = field(default_factory=list)
    unmatched_dets: list[int] = field(default_factory=list)


def solve_assignment(similarity: np.ndarray, min_similarity: float) -> AssignmentResult:
    """Optimal track-to-detection matching on ``cost = 1 - similarity``.

    The rectangular problem is padded to a square with cost-1 dummies and
    solved as a minimum-total-cost perfect matching. Matched pairs whose
    similarity falls below ``min_similarity`` are discarded into the unmatched
    lists. Among cost-equal optima the match set with the lowest
    (track_index, det_index) pairs in lexicographic order is returned, which
    pins the behavior on engineered ties.
    """
    sim = np.asarray(similarity, dtype=float)
    if sim.ndim != 2:
        raise ConfigurationError("similarity matrix must be 2-D")
    m, n = sim.shape
    if m == 0 or n == 0:
        return AssignmentResult([], list(range(m)), list(range(n)))
    if not np.isfinite(sim).all():
        raise ValueError("similarity entries must be finite")
    if sim.min() < -1e-9 or sim.max() > 1.0 + 1e-9:
        raise ValueError("similarity entries must lie in [0, 1]")

    size = max(m, n)
    cost = np.ones((size, size))
    cost[:m, :n] = 1.0 - sim

    assignment = _lexicographic_min_cost_assignment(cost)

    matches: list[tuple[int, int]] = []
    unmatched_tracks: list[int] = []
    for i in range(m):
        j = int(assignment[i])
        if j < n and sim[i, j] >= min_similarity:
            matches.append((i, j))
        else:
            unmatched_tracks.append(i)
    matched_dets = {j for _, j in matches}
    unmatched_dets = [j for j in range(n) if j not in matched_dets]
    return AssignmentResult(matches, unmatched_tracks, unmatched_dets)


def _lexicographic_min_cost_assignment(cost: np.ndarray) -> np.ndarray:
    """Min-cost perfect matching on a square matrix, lexicographically smallest.

    Starting from one optimal assignment, each row in turn is pushed to the
    smallest column index that still admits an assignment of identical total
    cost. Totals are compared after exact (fsum) summation, so mathematically
    tied assignments compare equal regardless of summation order.
    """
    size = cost.shape[0]
    rows, cols = linear_sum_assignment(cost)
    assignment = np.empty(size, dtype=int)
    assignment[rows] = cols
    best_total = math.fsum(cost[i, assignment[i]] for i in range(size))

    free_cols = list(range(size))
    locked_cost: list[float] = []
    for i in range(size):
        current = assignment[i]
        rest_rows = np.arange(i + 1, size)
        for j in free_cols:
            if j >= current:
                break
            rest_cols = np.array([c for c in free_cols if c != j], dtype=int)
            # Cheap lower bound: even the best completion cannot reach the
            # optimum through (i, j), so skip the exact solve.
            if rest_rows.size:
                bound = (
                    math.fsum(locked_cost)
                    + cost[i, j]
                    + float(cost[np.ix_(rest_rows, rest_cols)].min(axis=1).sum())
                )
            else:
                bound = math.fsum(locked_cost) + cost[i, j]
            if bound > best_total + 1e-9:
                continue
            candidate = assignment.copy()
            candidate[i] = j
            if rest_rows.size:
                sub = cost[np.ix_(rest_rows, rest_cols)]
                sub_rows, sub_cols = linear_sum_assignment(sub)
                candidate[rest_rows[sub_rows]] = rest_cols[sub_cols]
            total = math.fsum(cost[r, candidate[r]] for r in range(size))
            if total == best_total:
                assignment = candidate
                break
        locked_cost.append(cost[i, assignment[i]])
        free_cols.remove(assignment[i])
    return assignment
