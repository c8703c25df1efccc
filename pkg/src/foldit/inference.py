"""Sequence translation, fold-mask extraction and overlay rendering."""

import time
from dataclasses import dataclass

import numpy as np
import torch

from .data import to_uint8

DEFAULT_TAU = 60


@dataclass(frozen=True)
class OverlaySpec:
    color: tuple = (0, 0, 255)
    alpha: float = 0.5

    def __post_init__(self):
        if len(self.color) != 3 or not all(0 <= c <= 255 for c in self.color):
            raise ValueError(f"overlay color must be three values in [0, 255], got {self.color}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


@torch.no_grad()
def translate_sequence(generator, frames, batch_size=8):
    """Translate HxWx3 frames in [-1, 1]; one output per input, order kept."""
    was_training = generator.training
    generator.eval()
    param = next(generator.parameters(), None)
    dtype = param.dtype if param is not None else torch.float32
    out = []
    try:
        for start in range(0, len(frames), batch_size):
            chunk = np.stack([np.asarray(f, dtype=np.float32) for f in frames[start:start + batch_size]])
            if chunk.ndim != 4 or chunk.shape[-1] != 3:
                raise ValueError(f"expected HxWx3 frames, got batch shape {chunk.shape}")
            x = torch.from_numpy(chunk.transpose(0, 3, 1, 2)).to(dtype)
            y = generator(x).float().numpy().transpose(0, 2, 3, 1)
            out.extend(np.ascontiguousarray(f) for f in y)
    finally:
        generator.train(was_training)
    return out


def _as_u8(image):
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {arr.shape}")
    return arr if arr.dtype == np.uint8 else to_uint8(arr)


def extract_fold_mask(annotation_image, tau=DEFAULT_TAU):
    """Fold pixels are those where ``red - max(green, blue) >= tau`` on the 0..255 scale.

    Accepts uint8 images or float images in [-1, 1].
    """
    u8 = _as_u8(annotation_image).astype(np.int16)
    return (u8[..., 0] - np.maximum(u8[..., 1], u8[..., 2])) >= tau


def overlay(base, mask, spec=OverlaySpec()):
    """Alpha-blend ``spec.color`` into ``base`` (float, [-1, 1]) where ``mask`` is set."""
    base = np.asarray(base, dtype=np.float32)
    mask = np.asarray(mask, dtype=bool)
    if base.ndim != 3 or base.shape[:2] != mask.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image shape {base.shape}")
    color = np.asarray(spec.color, dtype=np.float32) / 127.5 - 1.0
    out = base.copy()
    out[mask] = (1.0 - spec.alpha) * base[mask] + spec.alpha * color
    return out


def measure_throughput(generator, size=256, n_frames=8, warmup=1):
    """Seconds per frame for single-frame inference at ``size`` x ``size``."""
    generator.eval()
    x = torch.zeros(1, 3, size, size, dtype=next(generator.parameters()).dtype)
    with torch.no_grad():
        for _ in range(warmup):
            generator(x)
        t0 = time.perf_counter()
        for _ in range(n_frames):
            generator(x)
    return (time.perf_counter() - t0) / n_frames
