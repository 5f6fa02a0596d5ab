"""Deterministic synthetic sequences for verifying tracker behavior.

Frames are a zero-intensity background with constant-intensity rectangles
rendered on integer-aligned edges, no blending, so region histograms are
analytically exact. Ground truth equals the rendered geometry; detections are
ground truth corrupted by seeded pseudo-randomness (jitter, dropout, clutter).
All randomness comes from numpy's PCG64 generator seeded from the scenario
seed, so identical seeds reproduce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np

from .core import BoundingBox, ConfigurationError, Detection, GrayImage
from .metrics import GroundTruthTrack
from . import mot_io

__all__ = [
    "ObjectSpec",
    "Scenario",
    "SyntheticSequence",
    "generate",
    "export",
    "preset",
    "preset_names",
    "scenario_from_file",
    "linear_centers",
    "piecewise_centers",
]


def linear_centers(
    start: tuple[float, float], velocity: tuple[float, float], frames: int
) -> tuple[tuple[float, float], ...]:
    """Centers along a straight line, one step of ``velocity`` per frame."""
    x0, y0 = start
    vx, vy = velocity
    return tuple((x0 + vx * k, y0 + vy * k) for k in range(frames))


def piecewise_centers(*segments: tuple[int, tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    """Concatenate hold segments: each (n_frames, center) repeats a position."""
    centers: list[tuple[float, float]] = []
    for count, position in segments:
        centers.extend([position] * count)
    return tuple(centers)


@dataclass(frozen=True)
class ObjectSpec:
    """One rendered object: constant intensity, fixed size, center per frame.

    ``absent_frames`` marks 1-based frames where the object is neither
    annotated nor detectable (a deterministic occlusion window). Box edges
    must land on the integer grid, so sizes are even and centers integral.
    """

    intensity: int
    width: int
    height: int
    centers: tuple[tuple[float, float], ...]
    absent_frames: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.intensity < 0:
            raise ConfigurationError("intensity must be non-negative")
        for cx, cy in self.centers:
            left = cx - self.width / 2
            top = cy - self.height / 2
            if left != int(left) or top != int(top):
                raise ConfigurationError(
                    "object edges must be integer-aligned (even sizes, integer centers)"
                )

    def box_at(self, frame: int) -> BoundingBox:
        """Ground-truth box at a 1-based frame index."""
        cx, cy = self.centers[frame - 1]
        return BoundingBox(cx - self.width / 2, cy - self.height / 2, self.width, self.height)


@dataclass(frozen=True)
class Scenario:
    """Full description of a synthetic sequence and its detector corruption."""

    name: str
    seed: int
    frame_count: int
    width: int = 128
    height: int = 96
    bit_depth: int = 8
    objects: tuple[ObjectSpec, ...] = ()
    jitter_sigma: float = 0.0
    dropout: float = 0.0
    det_score: tuple[float, float] = (1.0, 1.0)
    clutter_rate: float = 0.0
    clutter_score: tuple[float, float] = (0.2, 0.5)
    distinct_intensities: bool = False

    def __post_init__(self) -> None:
        if self.frame_count < 1:
            raise ConfigurationError("frame_count must be >= 1")
        if self.bit_depth not in (8, 16):
            raise ConfigurationError("bit_depth must be 8 or 16")
        limit = 1 << self.bit_depth
        for obj in self.objects:
            if len(obj.centers) != self.frame_count:
                raise ConfigurationError(
                    f"object trajectory length {len(obj.centers)} != frame_count {self.frame_count}"
                )
            if obj.intensity >= limit:
                raise ConfigurationError(
                    f"intensity {obj.intensity} exceeds {self.bit_depth}-bit range"
                )
        if self.distinct_intensities:
            intensities = [obj.intensity for obj in self.objects]
            if len(set(intensities)) != len(intensities):
                raise ConfigurationError(
                    "scenario requires distinct object intensities but got "
                    f"{sorted(intensities)}"
                )


@dataclass
class SyntheticSequence:
    scenario: Scenario
    images: list[GrayImage]
    gt: dict[int, GroundTruthTrack]
    detections: dict[int, list[Detection]] = field(default_factory=dict)

    def image_at(self, frame: int) -> GrayImage:
        return self.images[frame - 1]


def generate(scenario: Scenario) -> SyntheticSequence:
    """Render images, exact ground truth, and corrupted detections.

    The random stream is consumed in a fixed order (per frame, per object:
    dropout, jitter x/y, score; then clutter) regardless of which corruptions
    are enabled, so a given seed pins the full output.
    """
    rng = np.random.default_rng(scenario.seed)
    dtype = np.uint8 if scenario.bit_depth == 8 else np.uint16

    images: list[GrayImage] = []
    gt: dict[int, GroundTruthTrack] = {
        idx + 1: GroundTruthTrack(idx + 1) for idx in range(len(scenario.objects))
    }
    detections: dict[int, list[Detection]] = {}

    for frame in range(1, scenario.frame_count + 1):
        canvas = np.zeros((scenario.height, scenario.width), dtype=dtype)
        dets: list[Detection] = []
        for idx, obj in enumerate(scenario.objects):
            drop_draw = rng.random()
            jitter = rng.normal(0.0, 1.0, size=2)
            score_draw = rng.random()
            if frame in obj.absent_frames:
                continue
            box = obj.box_at(frame)
            _render(canvas, box, obj.intensity)
            gt[idx + 1].boxes[frame] = box
            gt[idx + 1].visibility[frame] = 1.0
            if drop_draw < scenario.dropout:
                continue
            lo, hi = scenario.det_score
            score = lo + (hi - lo) * score_draw
            det_box = BoundingBox(
                box.left + scenario.jitter_sigma * jitter[0],
                box.top + scenario.jitter_sigma * jitter[1],
                box.width,
                box.height,
            )
            dets.append(Detection(det_box, score))
        n_clutter = int(rng.poisson(scenario.clutter_rate))
        for _ in range(n_clutter):
            cx = rng.uniform(0, scenario.width)
            cy = rng.uniform(0, scenario.height)
            size = rng.uniform(6, 16)
            lo, hi = scenario.clutter_score
            score = rng.uniform(lo, hi)
            dets.append(
                Detection(BoundingBox(cx - size / 2, cy - size / 2, size, size), score)
            )
        # raster order makes per-frame detection order deterministic
        dets.sort(key=lambda d: (d.bbox.top, d.bbox.left))
        detections[frame] = dets
        images.append(GrayImage(canvas, scenario.bit_depth))

    return SyntheticSequence(scenario, images, gt, detections)


def _render(canvas: np.ndarray, box: BoundingBox, intensity: int) -> None:
    h, w = canvas.shape
    left = max(int(box.left), 0)
    top = max(int(box.top), 0)
    right = min(int(box.right), w)
    bottom = min(int(box.bottom), h)
    if right > left and bottom > top:
        canvas[top:bottom, left:right] = intensity


def export(sequence: SyntheticSequence, out_dir) -> Path:
    """Write a complete sequence directory consumable by the loader."""
    scenario = sequence.scenario
    out_dir = Path(out_dir)
    img_dir = out_dir / "img1"
    img_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "gt").mkdir(exist_ok=True)
    (out_dir / "det").mkdir(exist_ok=True)

    manifest = (
        "[Sequence]\n"
        f"name={scenario.name}\n"
        "imDir=img1\n"
        f"frameRate={mot_io.DEFAULT_FRAME_RATE}\n"
        f"seqLength={scenario.frame_count}\n"
        f"imWidth={scenario.width}\n"
        f"imHeight={scenario.height}\n"
        "imExt=.png\n"
        f"bitDepth={scenario.bit_depth}\n"
        "modality=thermal\n"
    )
    (out_dir / mot_io.MANIFEST_NAME).write_text(manifest, encoding="utf-8")

    for frame, image in enumerate(sequence.images, start=1):
        mot_io.write_image(img_dir / f"{frame:06d}.png", image)

    gt_lines = []
    for track_id in sorted(sequence.gt):
        track = sequence.gt[track_id]
        for frame in sorted(track.boxes):
            b = track.boxes[frame]
            gt_lines.append(
                f"{frame},{track_id},{b.left!r},{b.top!r},{b.width!r},{b.height!r},1,1,1.0"
            )
    (out_dir / "gt" / "gt.txt").write_text("\n".join(gt_lines) + ("\n" if gt_lines else ""), encoding="utf-8")

    det_lines = []
    for frame in sorted(sequence.detections):
        for det in sequence.detections[frame]:
            b = det.bbox
            det_lines.append(
                f"{frame},-1,{b.left!r},{b.top!r},{b.width!r},{b.height!r},{det.score!r}"
            )
    (out_dir / "det" / "det.txt").write_text("\n".join(det_lines) + ("\n" if det_lines else ""), encoding="utf-8")
    return out_dir


# -- scenario presets ---------------------------------------------------------

_CROSSING_FRAMES = 20


def _crossing(seed: int) -> Scenario:
    """Two equal-size objects exchanging sides with an engineered ambiguity.

    Both objects hold mirror positions long enough for their velocity
    estimates to settle to exactly zero, then jump to vertically split centers
    that are equidistant from both predictions: every prediction/detection
    overlap is identical, so a motion-only matcher faces an exact tie at the
    exchange frame while the intensity histograms still separate the two. The
    exchange completes onto swapped sides near the end of the sequence.
    """
    n = _CROSSING_FRAMES
    mid_x, mid_y, d, g = 64, 48, 6, 6
    side = 10  # box size; phase gaps of 2*d and 2*g keep boxes disjoint
    a_centers = piecewise_centers(
        (10, (mid_x - d, mid_y)),
        (8, (mid_x, mid_y + g)),
        (2, (mid_x + d, mid_y)),
    )
    b_centers = piecewise_centers(
        (10, (mid_x + d, mid_y)),
        (8, (mid_x, mid_y - g)),
        (2, (mid_x - d, mid_y)),
    )
    return Scenario(
        name="crossing",
        seed=seed,
        frame_count=n,
        objects=(
            ObjectSpec(50, side, side, a_centers),
            ObjectSpec(200, side, side, b_centers),
        ),
        distinct_intensities=True,
    )


def _single(seed: int) -> Scenario:
    return Scenario(
        name="single",
        seed=seed,
        frame_count=20,
        objects=(ObjectSpec(120, 12, 12, linear_centers((20, 30), (4, 2), 20)),),
    )


def _parallel(seed: int) -> Scenario:
    return Scenario(
        name="parallel",
        seed=seed,
        frame_count=20,
        objects=(
            ObjectSpec(80, 10, 10, linear_centers((15, 25), (4, 0), 20)),
            ObjectSpec(180, 10, 10, linear_centers((15, 65), (4, 0), 20)),
        ),
        distinct_intensities=True,
    )


def _stopgo(seed: int) -> Scenario:
    # moves, goes dark while momentarily stationary, reappears in place
    centers = linear_centers((20, 40), (4, 0), 8) + piecewise_centers((12, (48, 40)))
    return Scenario(
        name="stopgo",
        seed=seed,
        frame_count=20,
        objects=(ObjectSpec(150, 12, 12, centers, absent_frames=frozenset({9, 10, 11})),),
    )


def _cluttered(seed: int) -> Scenario:
    return Scenario(
        name="cluttered",
        seed=seed,
        frame_count=20,
        objects=(
            ObjectSpec(70, 12, 12, linear_centers((18, 24), (4, 1), 20)),
            ObjectSpec(210, 10, 10, linear_centers((105, 71), (-4, 0), 20)),
        ),
        jitter_sigma=0.4,
        dropout=0.1,
        det_score=(0.55, 1.0),
        clutter_rate=1.0,
        distinct_intensities=True,
    )


PRESETS = {
    "single": _single,
    "parallel": _parallel,
    "crossing": _crossing,
    "stopgo": _stopgo,
    "cluttered": _cluttered,
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def preset(name: str, seed: int = 0) -> Scenario:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
    return factory(seed)


def scenario_from_file(path) -> Scenario:
    """Load a scenario definition from a JSON file.

    Top-level keys mirror the Scenario fields; each object entry gives
    intensity, width, height and either an explicit ``centers`` list or a
    ``start``/``velocity`` pair expanded over the frame count.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    frame_count = int(data["frame_count"])
    objects = []
    for entry in data.get("objects", []):
        if "centers" in entry:
            centers = tuple((float(x), float(y)) for x, y in entry["centers"])
        else:
            centers = linear_centers(
                tuple(entry["start"]), tuple(entry.get("velocity", (0, 0))), frame_count
            )
        objects.append(
            ObjectSpec(
                intensity=int(entry["intensity"]),
                width=int(entry["width"]),
                height=int(entry["height"]),
                centers=centers,
                absent_frames=frozenset(int(f) for f in entry.get("absent_frames", [])),
            )
        )
    return Scenario(
        name=str(data.get("name", Path(path).stem)),
        seed=int(data.get("seed", 0)),
        frame_count=frame_count,
        width=int(data.get("width", 128)),
        height=int(data.get("height", 96)),
        bit_depth=int(data.get("bit_depth", 8)),
        objects=tuple(objects),
        jitter_sigma=float(data.get("jitter_sigma", 0.0)),
        dropout=float(data.get("dropout", 0.0)),
        det_score=tuple(data.get("det_score", (1.0, 1.0))),
        clutter_rate=float(data.get("clutter_rate", 0.0)),
        clutter_score=tuple(data.get("clutter_score", (0.2, 0.5))),
        distinct_intensities=bool(data.get("distinct_intensities", False)),
    )
