"""Deterministic QCIF test sequence built from a bundled natural photograph.

Used when no raw sequence (e.g. a Foreman QCIF file) is at hand. A crop window
wanders over the luma of a portrait with slow pan, zoom and hand-held shake,
which gives DCT statistics close to real head-and-shoulders footage.
"""

from __future__ import annotations

from typing import List

import numpy as np
from scipy import ndimage

from .source import Frame


def _portrait_luma() -> np.ndarray:
    from skimage import data

    rgb = data.astronaut().astype(np.float64)
    # BT.601 luma
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def synthetic_sequence(n_frames: int = 300, width: int = 176, height: int = 144,
                       seed: int = 7, noise_std: float = 0.8) -> List[Frame]:
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    src = _portrait_luma()
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yy -= height / 2.0
    xx -= width / 2.0
    frames = []
    for t in range(n_frames):
        scale = 1.9 - 0.5 * t / max(n_frames - 1, 1)
        cy = 200.0 + 18.0 * np.sin(2 * np.pi * t / 97.0) + 2.0 * np.sin(2 * np.pi * t / 7.3)
        cx = 230.0 + 0.12 * t + 3.0 * np.sin(2 * np.pi * t / 11.1)
        coords = np.array([cy + scale * yy, cx + scale * xx])
        plane = ndimage.map_coordinates(src, coords, order=3, mode="reflect")
        plane += noise_std * rng.standard_normal(plane.shape)
        frames.append(Frame(np.clip(np.floor(plane + 0.5), 0, 255)))
    return frames
