"""Tri-domain datasets: generation, loading and batch sampling.

On-disk layout::

    <root>/<split>/domainA/vNNN_fNNNN.png
    <root>/<split>/domainB/...      # paired with domainC by filename
    <root>/<split>/domainC/...
    <root>/<split>/masksB/...       # 1-bit ground-truth fold masks (synthetic only)

Images are held in memory as float32 ``H x W x 3`` arrays scaled to [-1, 1].
"""

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .synth import SynthConfig, render_video

SPLITS = ("train", "test")
DOMAIN_DIRS = {"A": "domainA", "B": "domainB", "C": "domainC"}
MASK_DIR = "masksB"


class DomainId(enum.Enum):
    A = "input"
    B = "annotation"
    C = "common"

    @property
    def is_common(self):
        return self is DomainId.C


# the single ground-truth pairing in the tri-domain setup
PAIRED_DOMAINS = (DomainId.B, DomainId.C)


class DatasetError(ValueError):
    pass


class PairingError(DatasetError):
    pass


def frame_name(video, frame):
    return f"v{video:03d}_f{frame:04d}.png"


def to_unit_range(u8):
    """uint8 [0, 255] -> float32 [-1, 1]."""
    return (np.asarray(u8, dtype=np.float32) / 127.5 - 1.0).astype(np.float32)


def to_uint8(image):
    """[-1, 1] -> uint8, affine map with round-half-up."""
    scaled = (np.asarray(image, dtype=np.float64) + 1.0) * 127.5
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def write_png(path, u8):
    Image.fromarray(u8).save(path, format="PNG", optimize=False)


def write_mask(path, mask):
    Image.fromarray(np.asarray(mask, dtype=bool)).convert("1").save(path, format="PNG")


def read_mask(path):
    with Image.open(path) as img:
        return np.asarray(img.convert("L")) > 0


def read_rgb(path, image_size=None):
    """Decode a 3-channel PNG into [-1, 1]; any other channel layout is rejected."""
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode != "RGB":
                raise DatasetError(f"{path}: expected 3-channel RGB image, got mode {img.mode!r}")
            if image_size is not None and img.size != (image_size, image_size):
                img = img.resize((image_size, image_size), Image.BILINEAR)
            arr = np.asarray(img)
    except DatasetError:
        raise
    except Exception as exc:
        raise DatasetError(f"{path}: cannot decode image ({exc})") from exc
    return to_unit_range(arr)


@dataclass
class DatasetRoot:
    root: Path
    split: str
    a_names: list
    b_names: list
    c_names: list
    a_images: np.ndarray
    b_images: np.ndarray
    c_images: np.ndarray
    pairing: dict
    masks: np.ndarray | None = None

    def __len__(self):
        return len(self.b_names)

    @property
    def image_shape(self):
        return self.b_images.shape[1:]


@dataclass(frozen=True)
class TriDomainBatch:
    a_images: np.ndarray
    b_images: np.ndarray
    c_images: np.ndarray
    a_names: tuple = ()
    b_names: tuple = ()
    c_names: tuple = ()

    def __post_init__(self):
        if len(self.b_images) != len(self.c_images):
            raise PairingError("b_images and c_images must have equal length")
        shapes = {arr.shape[1:3] for arr in (self.a_images, self.b_images, self.c_images) if len(arr)}
        if len(shapes) > 1:
            raise DatasetError(f"batch images disagree on spatial size: {sorted(shapes)}")
        for arr in (self.a_images, self.b_images, self.c_images):
            arr.flags.writeable = False

    def tensors(self, dtype=torch.float32, device="cpu"):
        """NCHW tensors ``(a, b, c)``."""
        def conv(arr):
            return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2))).to(device=device, dtype=dtype)
        return conv(self.a_images), conv(self.b_images), conv(self.c_images)


def generate_toy_tridomain(config: SynthConfig, out, texture_ids=None):
    """Render a synthetic dataset under ``out`` and return the train split.

    ``texture_ids`` optionally renders extra A-domain copies of the test split
    (``domainA_<id>``) for cross-texture consistency checks.
    """
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise DatasetError(f"cannot write to {out}: {exc}") from exc

    n_test = config.num_test_videos
    n_train = config.num_videos - n_test
    for video in range(config.num_videos):
        split = "train" if video < n_train else "test"
        dirs = {k: out / split / v for k, v in DOMAIN_DIRS.items()}
        dirs["mask"] = out / split / MASK_DIR
        for d in dirs.values():
            d.mkdir(parents=True, exist_ok=True)
        for t, (a, b, c, mask) in enumerate(render_video(config, video)):
            name = frame_name(video, t)
            write_png(dirs["A"] / name, a)
            write_png(dirs["B"] / name, b)
            write_png(dirs["C"] / name, c)
            write_mask(dirs["mask"] / name, mask)
        if split == "test":
            for tex in texture_ids or ():
                tdir = out / split / f"domainA_{tex}"
                tdir.mkdir(parents=True, exist_ok=True)
                for t, (a, _, _, _) in enumerate(render_video(config, video, texture_id=tex)):
                    write_png(tdir / frame_name(video, t), a)
    config.to_file(out / "synth.cfg")
    if n_train == 0:
        return load_dataset(out, "test")
    return load_dataset(out, "train")


def _list_pngs(directory):
    return sorted(p.name for p in directory.glob("*.png"))


def load_dataset(root, split="train", image_size=None, a_dir=None):
    """Load and validate one split; B and C must pair one-to-one by filename."""
    if split not in SPLITS:
        raise DatasetError(f"unknown split {split!r}")
    base = Path(root) / split
    dirs = {k: base / v for k, v in DOMAIN_DIRS.items()}
    if a_dir is not None:
        dirs["A"] = base / a_dir
    for key, d in dirs.items():
        if not d.is_dir():
            raise DatasetError(f"missing domain directory {d}")
    names = {k: _list_pngs(d) for k, d in dirs.items()}
    if not names["B"]:
        raise DatasetError(f"no frames in {dirs['B']}")
    if not names["A"]:
        raise DatasetError(f"no frames in {dirs['A']}")
    if names["B"] != names["C"]:
        missing = sorted(set(names["B"]) ^ set(names["C"]))
        raise PairingError(f"domainB/domainC pairing mismatch ({len(names['B'])} vs {len(names['C'])} frames; "
                           f"unmatched: {', '.join(missing[:5])})")
    pairing = {n: n for n in names["B"]}

    def stack(key):
        arrs = [read_rgb(dirs[key] / n, image_size) for n in names[key]]
        shapes = {a.shape for a in arrs}
        if len(shapes) != 1:
            raise DatasetError(f"{dirs[key]}: frames have differing shapes {sorted(shapes)}")
        return np.stack(arrs)

    a, b, c = stack("A"), stack("B"), stack("C")
    if not (a.shape[1:] == b.shape[1:] == c.shape[1:]):
        raise DatasetError(f"domains disagree on image shape: {a.shape[1:]}, {b.shape[1:]}, {c.shape[1:]}")
    masks = None
    mask_dir = base / MASK_DIR
    if mask_dir.is_dir():
        if _list_pngs(mask_dir) != names["B"]:
            raise PairingError(f"{mask_dir} does not match domainB filenames")
        masks = np.stack([read_mask(mask_dir / n) for n in names["B"]])
        if image_size is not None and masks.shape[1:] != b.shape[1:3]:
            masks = None
    return DatasetRoot(Path(root), split, names["A"], names["B"], names["C"], a, b, c, pairing, masks)


def sample_batch(dataset: DatasetRoot, batch_size, rng: np.random.Generator):
    """Draw A independently of the (B, C) pairs, each without replacement."""
    if batch_size < 1:
        raise DatasetError("batch_size must be >= 1")
    if batch_size > len(dataset.a_names) or batch_size > len(dataset.b_names):
        raise DatasetError(f"batch_size {batch_size} exceeds domain size "
                           f"(A={len(dataset.a_names)}, B/C={len(dataset.b_names)})")
    ia = rng.choice(len(dataset.a_names), size=batch_size, replace=False)
    ib = rng.choice(len(dataset.b_names), size=batch_size, replace=False)
    b_names = tuple(dataset.b_names[i] for i in ib)
    c_index = {n: i for i, n in enumerate(dataset.c_names)}
    ic = [c_index[dataset.pairing[n]] for n in b_names]
    return TriDomainBatch(
        a_images=dataset.a_images[ia].copy(),
        b_images=dataset.b_images[ib].copy(),
        c_images=dataset.c_images[ic].copy(),
        a_names=tuple(dataset.a_names[i] for i in ia),
        b_names=b_names,
        c_names=tuple(dataset.c_names[i] for i in ic),
    )
