"""Clip export/import: grayscale PGM frame sequences plus a manifest.

A clip is a directory of binary PGM (P5, maxval 255) frames named
frame_0000.pgm, frame_0001.pgm, ... rendered as two bright discs whose
intensities follow a luminance trace, plus manifest.txt with key=value lines
(fps, t_f, class, seed, distance_m, mirror_view).  This is the wire format
the downstream video classifier trains on.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from .occ_channel import LuminanceTrace

__all__ = [
    "ClipGeometry",
    "DEFAULT_GEOMETRY",
    "write_pgm",
    "read_pgm",
    "write_manifest",
    "read_manifest",
    "export_clip",
    "read_clip_trace",
]


@dataclass(frozen=True)
class ClipGeometry:
    size: int = 64
    disc_radius: int = 7
    left_center: Tuple[int, int] = (21, 36)   # (x, y)
    right_center: Tuple[int, int] = (43, 36)

    def disc_mask(self, center: Tuple[int, int]) -> np.ndarray:
        yy, xx = np.mgrid[0:self.size, 0:self.size]
        cx, cy = center
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= self.disc_radius ** 2


DEFAULT_GEOMETRY = ClipGeometry()


def write_pgm(path, image: np.ndarray) -> None:
    """Binary PGM, 8-bit, maxval 255."""
    img = np.asarray(image, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    # Header: magic, width, height, maxval separated by whitespace, then raw bytes.
    fields = []
    i = 0
    while len(fields) < 4:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        fields.append(data[i:j])
        i = j
    if fields[0] != b"P5":
        raise ValueError(f"not a binary PGM: {path}")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError(f"expected maxval 255, got {maxval}")
    i += 1  # single whitespace after maxval
    img = np.frombuffer(data[i:i + w * h], dtype=np.uint8).reshape(h, w)
    return img.copy()


def write_manifest(path, entries: Dict[str, object]) -> None:
    lines = []
    for key, value in entries.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_manifest(path) -> Dict[str, str]:
    entries = {}
    for line in Path(path).read_text(encoding="ascii").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def _render_frame(left_lum: float, right_lum: float, ambient: float,
                  geom: ClipGeometry, lmask: np.ndarray, rmask: np.ndarray) -> np.ndarray:
    img = np.full((geom.size, geom.size), round(255 * ambient), dtype=np.uint8)
    img[lmask] = round(255 * float(np.clip(left_lum, 0.0, 1.0)))
    img[rmask] = round(255 * float(np.clip(right_lum, 0.0, 1.0)))
    return img


def export_clip(directory, trace: LuminanceTrace, manifest: Dict[str, object],
                ambient: float, geom: ClipGeometry = DEFAULT_GEOMETRY) -> None:
    """Write one clip directory.  Dropped frames repeat the last good frame."""
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    lmask = geom.disc_mask(geom.left_center)
    rmask = geom.disc_mask(geom.right_center)
    last = _render_frame(ambient, ambient, ambient, geom, lmask, rmask)
    for i, (_, left, right, dropped) in enumerate(trace.frames()):
        if not dropped:
            last = _render_frame(left, right, ambient, geom, lmask, rmask)
        write_pgm(directory / f"frame_{i:04d}.pgm", last)
    write_manifest(directory / "manifest.txt", manifest)


def read_clip_trace(directory, geom: ClipGeometry = DEFAULT_GEOMETRY) -> Tuple[LuminanceTrace, Dict[str, str]]:
    """Reconstruct a luminance trace from an exported clip (for re-decoding)."""
    directory = Path(directory)
    manifest = read_manifest(directory / "manifest.txt")
    fps = float(manifest["fps"])
    frames = sorted(directory.glob("frame_*.pgm"))
    if not frames:
        raise ValueError(f"no frames in clip {directory}")
    lmask = geom.disc_mask(geom.left_center)
    rmask = geom.disc_mask(geom.right_center)
    left = np.empty(len(frames))
    right = np.empty(len(frames))
    for i, frame_path in enumerate(frames):
        img = read_pgm(frame_path).astype(np.float64) / 255.0
        left[i] = img[lmask].mean()
        right[i] = img[rmask].mean()
    t = np.arange(len(frames), dtype=np.float64) / fps
    trace = LuminanceTrace(timestamps=t, left=left, right=right,
                           dropped=np.zeros(len(frames), dtype=bool), fps=fps)
    return trace, manifest
