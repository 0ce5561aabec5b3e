"""Raw video ingest, GOP grouping, PGM output and PSNR."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

PSNR_CAP_DB = 99.0

FORMATS = ("y-only-planar", "yuv420-planar")


class VideoFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    """One luma plane, stored as float64 with shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        pix = np.asarray(self.pixels, dtype=np.float64)
        if pix.ndim != 2 or pix.shape[0] == 0 or pix.shape[1] == 0:
            raise ValueError(f"frame must be a non-empty 2D array, got shape {pix.shape}")
        object.__setattr__(self, "pixels", pix)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Gop:
    frames: tuple

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("a GOP needs at least one frame")
        shape = frames[0].pixels.shape
        for f in frames:
            if f.pixels.shape != shape:
                raise ValueError("all frames in a GOP must share dimensions")
        object.__setattr__(self, "frames", frames)

    @property
    def gop_size(self) -> int:
        return len(self.frames)

    @property
    def dims(self) -> tuple:
        h, w = self.frames[0].pixels.shape
        return (len(self.frames), h, w)

    def to_array(self) -> np.ndarray:
        return np.stack([f.pixels for f in self.frames])

    @classmethod
    def from_array(cls, cube: np.ndarray) -> "Gop":
        return cls(tuple(Frame(plane) for plane in np.asarray(cube, dtype=np.float64)))


@dataclass(frozen=True)
class PsnrResult:
    mse: float
    psnr_db: float


def frame_bytes(width: int, height: int, fmt: str) -> int:
    if fmt == "y-only-planar":
        return width * height
    if fmt == "yuv420-planar":
        # 4:2:0 chroma planes are ceil-halved in each direction
        return width * height + 2 * ((width + 1) // 2) * ((height + 1) // 2)
    raise VideoFormatError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def load_video(path, width: int, height: int, fmt: str = "y-only-planar") -> List[Frame]:
    """Read an 8-bit headerless planar file; only the luma plane is kept."""
    if width <= 0 or height <= 0:
        raise VideoFormatError("width and height must be positive")
    per_frame = frame_bytes(width, height, fmt)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"video file not found: {path}")
    size = os.path.getsize(path)
    if size == 0 or size % per_frame:
        raise VideoFormatError(
            f"{path}: size {size} bytes is not a positive multiple of the "
            f"{per_frame}-byte {fmt} frame at {width}x{height}"
        )
    raw = np.fromfile(path, dtype=np.uint8).reshape(-1, per_frame)
    luma = raw[:, : width * height].reshape(-1, height, width)
    return [Frame(plane.astype(np.float64)) for plane in luma]


def save_video(frames: Sequence[Frame], path) -> None:
    """Write frames as a y-only planar file (rounded, clamped to 8 bits)."""
    with open(path, "wb") as fh:
        for f in frames:
            fh.write(to_uint8(f.pixels).tobytes())


def split_gops(frames: Sequence[Frame], gop_size: int) -> List[Gop]:
    """Group consecutive frames; a short tail is filled by repeating its last frame."""
    if gop_size < 1:
        raise ValueError("gop_size must be >= 1")
    if not frames:
        raise ValueError("cannot split an empty frame list")
    gops = []
    for start in range(0, len(frames), gop_size):
        group = list(frames[start:start + gop_size])
        group += [group[-1]] * (gop_size - len(group))
        gops.append(Gop(tuple(group)))
    return gops


def compute_psnr(reference: Frame, test: Frame) -> PsnrResult:
    if reference.pixels.shape != test.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {reference.pixels.shape} vs {test.pixels.shape}"
        )
    mse = float(np.mean((reference.pixels - test.pixels) ** 2))
    return PsnrResult(mse, psnr_from_mse(mse))


def psnr_from_mse(mse: float) -> float:
    if mse <= 0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 20.0 * math.log10(255.0 / math.sqrt(mse)))


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    # round half up, then clamp
    return np.clip(np.floor(np.asarray(pixels) + 0.5), 0, 255).astype(np.uint8)


def write_frame(frame: Frame, path) -> None:
    """Write a binary (P5) 8-bit PGM."""
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(to_uint8(frame.pixels).tobytes())


def read_pgm(path) -> Frame:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise VideoFormatError(f"{path}: not a binary PGM")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise VideoFormatError(f"{path}: only 8-bit PGM supported")
    body = np.frombuffer(data[pos + 1:pos + 1 + width * height], dtype=np.uint8)
    return Frame(body.reshape(height, width).astype(np.float64))
