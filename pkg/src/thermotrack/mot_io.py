"""Sequence ingestion and result persistence in the MOT text formats.

A sequence directory holds a ``seqinfo.ini`` manifest, zero-padded 6-digit
frame images under ``img1/`` (overridable via the manifest), and the usual
``det/det.txt`` / ``gt/gt.txt`` CSVs. Frame indices are 1-based everywhere.
Floats are written in shortest round-trip form so write -> read reproduces a
result buffer exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from .core import BoundingBox, DataFormatError, Detection, GrayImage
from .metrics import GroundTruthTrack
from .tracker import TrackRecord

__all__ = [
    "SequenceManifest",
    "load_manifest",
    "image_path",
    "load_image",
    "write_image",
    "read_detections",
    "read_ground_truth",
    "write_results",
    "read_results",
]

logger = logging.getLogger(__name__)

MANIFEST_NAME = "seqinfo.ini"
DEFAULT_FRAME_RATE = 5


@dataclass(frozen=True)
class SequenceManifest:
    name: str
    image_dir: Path
    frame_rate: int
    frame_count: int
    width: int
    height: int
    bit_depth: int
    modality: str
    image_ext: str
    warnings: tuple[str, ...] = ()


def _parse_keyvalues(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith((";", "#")) or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise DataFormatError(f"{path}: malformed line {raw!r}, expected key=value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _int_key(values: dict[str, str], key: str, path: Path) -> int:
    try:
        return int(values[key])
    except KeyError:
        raise DataFormatError(f"{path}: missing required key {key!r}") from None
    except ValueError:
        raise DataFormatError(f"{path}: key {key!r} is not an integer: {values[key]!r}") from None


def load_manifest(seq_dir) -> SequenceManifest:
    """Parse the ``seqinfo.ini``-style manifest of a sequence directory.

    Required keys: seqLength, imWidth, imHeight. Missing frameRate falls back
    to the default capture rate with a warning recorded on the manifest.
    """
    seq_dir = Path(seq_dir)
    path = seq_dir / MANIFEST_NAME
    if not path.is_file():
        raise DataFormatError(f"no {MANIFEST_NAME} in {seq_dir}")
    values = _parse_keyvalues(path)
    warnings: list[str] = []

    if "frameRate" in values:
        frame_rate = _int_key(values, "frameRate", path)
    else:
        frame_rate = DEFAULT_FRAME_RATE
        warnings.append(f"frameRate missing, defaulting to {DEFAULT_FRAME_RATE}")
    frame_count = _int_key(values, "seqLength", path)
    if frame_count < 1:
        raise DataFormatError(f"{path}: seqLength must be >= 1, got {frame_count}")
    width = _int_key(values, "imWidth", path)
    height = _int_key(values, "imHeight", path)
    bit_depth = _int_key(values, "bitDepth", path) if "bitDepth" in values else 8
    if bit_depth not in (8, 16):
        raise DataFormatError(f"{path}: bitDepth must be 8 or 16, got {bit_depth}")

    return SequenceManifest(
        name=values.get("name", seq_dir.name),
        image_dir=seq_dir / values.get("imDir", "img1"),
        frame_rate=frame_rate,
        frame_count=frame_count,
        width=width,
        height=height,
        bit_depth=bit_depth,
        modality=values.get("modality", "thermal"),
        image_ext=values.get("imExt", ".png"),
        warnings=tuple(warnings),
    )


def image_path(manifest: SequenceManifest, frame: int) -> Path:
    return manifest.image_dir / f"{frame:06d}{manifest.image_ext}"


def load_image(path, expected_bit_depth: int | None = None) -> GrayImage:
    """Load an 8- or 16-bit single-channel PNG or PGM as a GrayImage.

    Color inputs are converted to grayscale by the standard luma combination.
    A declared bit depth that disagrees with the file is a data error.
    """
    with Image.open(path) as img:
        mode = img.mode
        if mode in ("RGB", "RGBA", "P"):
            img = img.convert("L")
            mode = "L"
        if mode == "L":
            pixels = np.asarray(img, dtype=np.uint8)
            depth = 8
        elif mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(img)
            if arr.max(initial=0) > 0xFFFF or arr.min(initial=0) < 0:
                raise DataFormatError(f"{path}: intensities outside 16-bit range")
            pixels = arr.astype(np.uint16)
            depth = 16
        else:
            raise DataFormatError(f"{path}: unsupported image mode {mode!r}")
    if expected_bit_depth is not None and depth != expected_bit_depth:
        raise DataFormatError(
            f"{path}: bit depth {depth} does not match declared {expected_bit_depth}"
        )
    return GrayImage(pixels, depth)


def write_image(path, image: GrayImage) -> None:
    """Write a GrayImage losslessly (PNG or PGM by extension)."""
    Image.fromarray(image.pixels).save(path)


def _parse_float(field: str, path, line_no: int) -> float:
    try:
        return float(field)
    except ValueError:
        raise DataFormatError(f"{path}:{line_no}: non-numeric field {field!r}") from None


def _parse_int(field: str, path, line_no: int) -> int:
    try:
        return int(float(field))
    except ValueError:
        raise DataFormatError(f"{path}:{line_no}: non-numeric field {field!r}") from None


def read_detections(path) -> dict[int, list[Detection]]:
    """Read a MOT detection file into a frame -> detections map.

    Lines are ``frame,id,left,top,width,height,score,...`` with the id column
    ignored. Boxes are taken as given (no clipping); scores outside [0, 1] are
    clamped, with the clamp count reported through the module logger.
    """
    detections: dict[int, list[Detection]] = {}
    clamped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 7:
                raise DataFormatError(
                    f"{path}:{line_no}: expected at least 7 fields, got {len(fields)}"
                )
            frame = _parse_int(fields[0], path, line_no)
            box = BoundingBox(
                _parse_float(fields[2], path, line_no),
                _parse_float(fields[3], path, line_no),
                _parse_float(fields[4], path, line_no),
                _parse_float(fields[5], path, line_no),
            )
            score = _parse_float(fields[6], path, line_no)
            if score < 0.0 or score > 1.0:
                score = min(max(score, 0.0), 1.0)
                clamped += 1
            detections.setdefault(frame, []).append(Detection(box, score))
    if clamped:
        logger.warning("%s: clamped %d detection scores to [0, 1]", path, clamped)
    return detections


def read_ground_truth(path) -> dict[int, GroundTruthTrack]:
    """Read a MOT ground-truth file into tracks grouped by id.

    Lines are ``frame,id,left,top,width,height,conf,class,visibility``; rows
    with conf = 0 are kept but flagged as ignore. Duplicate (frame, id) pairs
    are a data error.
    """
    tracks: dict[int, GroundTruthTrack] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 6:
                raise DataFormatError(
                    f"{path}:{line_no}: expected at least 6 fields, got {len(fields)}"
                )
            frame = _parse_int(fields[0], path, line_no)
            track_id = _parse_int(fields[1], path, line_no)
            box = BoundingBox(
                _parse_float(fields[2], path, line_no),
                _parse_float(fields[3], path, line_no),
                _parse_float(fields[4], path, line_no),
                _parse_float(fields[5], path, line_no),
            )
            conf = _parse_float(fields[6], path, line_no) if len(fields) > 6 else 1.0
            class_id = _parse_int(fields[7], path, line_no) if len(fields) > 7 else 1
            visibility = _parse_float(fields[8], path, line_no) if len(fields) > 8 else 1.0
            track = tracks.setdefault(track_id, GroundTruthTrack(track_id, class_id=class_id))
            if frame in track.boxes:
                raise DataFormatError(
                    f"{path}:{line_no}: duplicate entry for frame {frame}, id {track_id}"
                )
            track.boxes[frame] = box
            track.visibility[frame] = visibility
            if conf == 0.0:
                track.ignored.add(frame)
    return tracks


def _fmt(value: float) -> str:
    # repr gives the shortest string that parses back to the same float
    return repr(float(value))


def write_results(path, records: Iterable[TrackRecord]) -> None:
    """Write tracker output in MOT result format.

    One line per record: ``frame,id,left,top,width,height,score,-1,-1,-1``,
    frames ascending and ids ascending within a frame. Output is byte-stable
    for identical buffers.
    """
    ordered = sorted(records, key=lambda r: (r.frame, r.track_id))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in ordered:
            b = r.bbox
            fh.write(
                f"{r.frame},{r.track_id},{_fmt(b.left)},{_fmt(b.top)},"
                f"{_fmt(b.width)},{_fmt(b.height)},{_fmt(r.score)},-1,-1,-1\n"
            )


def read_results(path) -> list[TrackRecord]:
    """Read a MOT result file back into an ordered record buffer."""
    records: list[TrackRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 7:
                raise DataFormatError(
                    f"{path}:{line_no}: expected at least 7 fields, got {len(fields)}"
                )
            records.append(
                TrackRecord(
                    frame=_parse_int(fields[0], path, line_no),
                    track_id=_parse_int(fields[1], path, line_no),
                    bbox=BoundingBox(
                        _parse_float(fields[2], path, line_no),
                        _parse_float(fields[3], path, line_no),
                        _parse_float(fields[4], path, line_no),
                        _parse_float(fields[5], path, line_no),
                    ),
                    score=_parse_float(fields[6], path, line_no),
                )
            )
    records.sort(key=lambda r: (r.frame, r.track_id))
    return records
