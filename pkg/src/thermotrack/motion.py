"""Constant-velocity Kalman filtering of boxes and the motion similarity matrix.

State vector is the 8-dimensional (cx, cy, a, h, vcx, vcy, va, vh) used by the
SORT family of trackers, where ``a`` is the width/height aspect ratio. Process
and measurement noise follow the usual convention of standard deviations
proportional to box height for the spatial dimensions, with small fixed
uncertainties on the aspect ratio.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BoundingBox, Detection, iou

__all__ = ["KalmanState", "KalmanFilter", "state_to_box", "motion_similarity_matrix"]

_NDIM = 4


@dataclass(frozen=True, eq=False)
class KalmanState:
    """Gaussian belief over the 8-dim box state: mean vector and covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        if self.mean.shape != (2 * _NDIM,):
            raise ValueError("mean must be an 8-vector")
        if self.covariance.shape != (2 * _NDIM, 2 * _NDIM):
            raise ValueError("covariance must be 8x8")


class KalmanFilter:
    """Constant-velocity filter over (cx, cy, a, h) measurements.

    Position noise scales as ``std_weight_position * height`` and velocity
    noise as ``std_weight_velocity * height``; the aspect-ratio channel uses
    small constants since aspect barely changes frame to frame.
    """

    def __init__(
        self,
        std_weight_position: float = 1.0 / 20,
        std_weight_velocity: float = 1.0 / 160,
    ) -> None:
        self._std_pos = std_weight_position
        self._std_vel = std_weight_velocity
        self._motion_mat = np.eye(2 * _NDIM)
        for i in range(_NDIM):
            self._motion_mat[i, _NDIM + i] = 1.0  # dt fixed at one frame
        self._update_mat = np.eye(_NDIM, 2 * _NDIM)

    def initiate(self, box: BoundingBox) -> KalmanState:
        """Create a track state from an unassociated measurement.

        Velocities start at zero. Raises ValueError for zero-area boxes.
        """
        if box.area <= 0.0:
            raise ValueError("cannot initiate a Kalman state from a zero-area box")
        measurement = box.to_xyah()
        mean = np.zeros(2 * _NDIM)
        mean[:_NDIM] = measurement
        h = measurement[3]
        std = np.array(
            [
                2 * self._std_pos * h,
                2 * self._std_pos * h,
                1e-2,
                2 * self._std_pos * h,
                10 * self._std_vel * h,
                10 * self._std_vel * h,
                1e-5,
                10 * self._std_vel * h,
            ]
        )
        return KalmanState(mean, np.diag(std**2))

    def predict(self, state: KalmanState) -> KalmanState:
        """Advance one frame under constant velocity; covariance gains process noise."""
        h = state.mean[3]
        std = np.array(
            [
                self._std_pos * h,
                self._std_pos * h,
                1e-2,
                self._std_pos * h,
                self._std_vel * h,
                self._std_vel * h,
                1e-5,
                self._std_vel * h,
            ]
        )
        process_noise = np.diag(std**2)
        mean = self._motion_mat @ state.mean
        cov = self._motion_mat @ state.covariance @ self._motion_mat.T + process_noise
        return KalmanState(mean, _symmetrize(cov))

    def project(self, state: KalmanState) -> tuple[np.ndarray, np.ndarray]:
        """Project the state into measurement space, adding measurement noise."""
        h = state.mean[3]
        std = np.array(
            [
                self._std_pos * h,
                self._std_pos * h,
                1e-1,
                self._std_pos * h,
            ]
        )
        measurement_noise = np.diag(std**2)
        mean = self._update_mat @ state.mean
        cov = self._update_mat @ state.covariance @ self._update_mat.T + measurement_noise
        return mean, cov

    def update(self, state: KalmanState, box: BoundingBox) -> KalmanState:
        """Correct the state with an associated measurement.

        The posterior position entries lie between prior and measurement, and
        no covariance diagonal entry increases. Raises ValueError for
        zero-area boxes.
        """
        if box.area <= 0.0:
            raise ValueError("cannot update a Kalman state with a zero-area box")
        projected_mean, projected_cov = self.project(state)
        gain = np.linalg.solve(
            projected_cov, (state.covariance @ self._update_mat.T).T
        ).T
        innovation = box.to_xyah() - projected_mean
        mean = state.mean + gain @ innovation
        cov = state.covariance - gain @ projected_cov @ gain.T
        return KalmanState(mean, _symmetrize(cov))


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2.0


def state_to_box(state: KalmanState) -> BoundingBox:
    """The box encoded by the state's position entries."""
    return BoundingBox.from_xyah(state.mean[:_NDIM])


def motion_similarity_matrix(
    predicted_boxes: Sequence[BoundingBox], detections: Sequence[Detection]
) -> np.ndarray:
    """Pairwise IoU between predicted track boxes and detection boxes.

    Shape (len(tracks), len(detections)); either side may be empty.
    """
    matrix = np.zeros((len(predicted_boxes), len(detections)), dtype=float)
    for i, track_box in enumerate(predicted_boxes):
        for j, det in enumerate(detections):
            matrix[i, j] = iou(track_box, det.bbox)
    return matrix
