"""Procedural tri-domain surrogate: flythroughs of a ridged tube.

Every frame is rendered three ways from one shared geometry:

* C: grayscale shaded wall with folds (common domain)
* B: C with the fold pixels painted pure red (annotation domain)
* A: the same geometry with a coloured surface texture and jittered lighting

Fold masks are hard-edged, so extracting the red overlay from B recovers them
exactly.
"""

import zlib
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import config as _config

FOCAL = 0.5
NEAR = 0.42  # nearest fold depth kept in view
FAR = 3.2
MIN_BAND = 0.09  # fold band width floor, in [-1, 1] image units
OVERLAY_RGB = (255, 0, 0)

_TEXTURES = {
    "t1": {"base": (0.78, 0.58, 0.52), "contrast": 0.22, "scale": 5.0},
    "t2": {"base": (0.70, 0.56, 0.60), "contrast": 0.30, "scale": 3.0},
}


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    num_videos: int = 4
    frames_per_video: int = 60
    image_size: int = 64
    num_ridges_range: tuple[int, int] = (3, 5)
    texture_id: str = "t1"
    lighting_jitter: float = 0.1
    test_videos: int | None = None

    def __post_init__(self):
        if self.image_size < 32 or self.image_size % 4:
            raise ValueError(f"image_size must be >= 32 and divisible by 4, got {self.image_size}")
        if self.frames_per_video < 1:
            raise ValueError("frames_per_video must be >= 1")
        if self.num_videos < 1:
            raise ValueError("num_videos must be >= 1")
        lo, hi = self.num_ridges_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad num_ridges_range {self.num_ridges_range}")
        if self.lighting_jitter < 0:
            raise ValueError("lighting_jitter must be >= 0")
        if not self.texture_id:
            raise ValueError("texture_id must be non-empty")
        if self.test_videos is not None and not 0 <= self.test_videos <= self.num_videos:
            raise ValueError("test_videos must lie in [0, num_videos]")

    @property
    def num_test_videos(self):
        if self.test_videos is not None:
            return self.test_videos
        return 1 if self.num_videos > 1 else 0

    @classmethod
    def from_file(cls, path, **overrides):
        values = _config.read_flat(path)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return _config.from_mapping(cls, values)

    def to_file(self, path):
        return _config.dump_flat(self, path)


def _texture_params(texture_id):
    if texture_id in _TEXTURES:
        return _TEXTURES[texture_id]
    rng = np.random.default_rng(zlib.crc32(texture_id.encode()))
    red = rng.uniform(0.65, 0.8)
    # keep red dominance below the default extraction threshold
    green = rng.uniform(red - 0.2, red - 0.05)
    blue = rng.uniform(red - 0.2, red - 0.05)
    return {"base": (red, green, blue), "contrast": rng.uniform(0.15, 0.35), "scale": rng.uniform(2.5, 6.0)}


class _Flythrough:
    """Geometry of one video: fold rings drifting towards the camera."""

    def __init__(self, rng, cfg):
        lo, hi = cfg.num_ridges_range
        self.n_folds = int(rng.integers(lo, hi + 1))
        self.period = FAR - NEAR
        spacing = self.period / self.n_folds
        self.depth0 = NEAR + spacing * (np.arange(self.n_folds) + rng.uniform(0.15, 0.85, self.n_folds))
        self.speed = spacing * rng.uniform(0.08, 0.16)
        self.start = rng.uniform(0, 2 * np.pi, self.n_folds)
        self.span = rng.uniform(0.9 * np.pi, 2 * np.pi, self.n_folds)
        self.thickness = rng.uniform(0.05, 0.08, self.n_folds)
        self.wobble = rng.uniform(0.0, 0.12, self.n_folds)
        self.wobble_phase = rng.uniform(0, 2 * np.pi, self.n_folds)
        self.ellipse = rng.uniform(0.85, 1.15)
        self.drift_amp = rng.uniform(0.1, 0.3, 2)
        self.drift_freq = rng.uniform(0.03, 0.08, 2)
        self.drift_phase = rng.uniform(0, 2 * np.pi, 2)

    def center(self, t):
        return self.drift_amp * np.sin(self.drift_freq * t * 2 * np.pi + self.drift_phase)

    def depths(self, t):
        # travelled distance wraps folds back to the far end
        return NEAR + np.mod(self.depth0 - NEAR - self.speed * t, self.period)


def _polar(size, center, ellipse):
    coords = (np.arange(size) + 0.5) / size * 2 - 1
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    dx = xx - center[0]
    dy = (yy - center[1]) / ellipse
    return np.hypot(dx, dy), np.arctan2(dy, dx)


def render_frame(geom, t, size):
    """Return ``(shade, mask, radius, angle)`` for frame index ``t``.

    ``shade`` is the grayscale C rendering in [0, 1].
    """
    r, theta = _polar(size, geom.center(t), geom.ellipse)
    # inverse-square falloff: near wall (large radius) is bright, lumen dark
    shade = 0.8 * np.clip((r / 1.1) ** 2, 0.05, 1.0)
    mask = np.zeros((size, size), dtype=bool)
    depths = geom.depths(t)
    for k in np.argsort(-depths):  # far to near so near folds win
        z = depths[k]
        radius = FOCAL / z * (1 + geom.wobble[k] * np.sin(2 * theta + geom.wobble_phase[k]))
        width = max(FOCAL * geom.thickness[k] / z, MIN_BAND)
        offset = np.mod(theta - geom.start[k], 2 * np.pi)
        on_arc = offset <= geom.span[k]
        inner = radius - width / 2
        band = on_arc & (r >= inner) & (r <= radius + width / 2)
        shadow = on_arc & (r > radius + width / 2) & (r <= radius + width)
        lit = 0.8 * np.clip((radius / 1.1) ** 2, 0.05, 1.0)
        # fold rim catches the light, with a darker lip behind it
        rim = np.clip(0.4 + lit + 0.2 * (r - inner) / width, 0, 1)
        shade = np.where(shadow, shade * 0.45, shade)
        shade = np.where(band, rim, shade)
        mask |= band
    return shade, mask, r, theta


def _texture_field(rng, scale, size=128):
    noise = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma=scale, mode="wrap")
    return noise / (noise.std() + 1e-12)


def texture_frame(shade, r, theta, t, geom, tex, field, light):
    """Colour the C shading into an A frame."""
    n = field.shape[0]
    # surface coordinates (angle, depth) so the pattern sticks to the wall
    depth = FOCAL / np.maximum(r, 1e-3) + geom.speed * t
    iu = (np.mod(theta / (2 * np.pi), 1.0) * n).astype(int) % n
    iv = (np.mod(depth / geom.period * 2, 1.0) * n).astype(int) % n
    pattern = 1 + tex["contrast"] * np.tanh(field[iv, iu])
    gain, tilt = light
    coords = (np.arange(shade.shape[1]) + 0.5) / shade.shape[1] * 2 - 1
    lighting = gain * (1 + tilt * coords)[None, :]
    base = np.asarray(tex["base"])
    rgb = shade[..., None] * pattern[..., None] * lighting[..., None] * base
    return np.clip(rgb, 0, 1)


def to_u8(values01):
    return np.floor(np.clip(values01, 0, 1) * 255 + 0.5).astype(np.uint8)


def render_video(cfg, video_index, texture_id=None):
    """Yield ``(a_u8, b_u8, c_u8, mask)`` for every frame of one video."""
    tex = _texture_params(texture_id or cfg.texture_id)
    geom = _Flythrough(np.random.default_rng([cfg.seed, video_index]), cfg)
    light_rng = np.random.default_rng([cfg.seed, video_index, 1])
    tex_rng = np.random.default_rng([cfg.seed, video_index, zlib.crc32((texture_id or cfg.texture_id).encode())])
    field = _texture_field(tex_rng, tex["scale"])
    for t in range(cfg.frames_per_video):
        shade, mask, r, theta = render_frame(geom, t, cfg.image_size)
        jitter = cfg.lighting_jitter
        light = (
            float(np.clip(1 + jitter * light_rng.standard_normal(), 0.5, 1.5)),
            float(np.clip(jitter * light_rng.standard_normal(), -0.5, 0.5)),
        )
        c = to_u8(np.repeat(shade[..., None], 3, axis=2))
        b = c.copy()
        b[mask] = OVERLAY_RGB
        a = to_u8(texture_frame(shade, r, theta, t, geom, tex, field, light))
        yield a, b, c, mask
