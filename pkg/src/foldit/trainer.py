"""Joint optimisation of the four generator/discriminator pairs.

Per step: one Adam update of all generators on the weighted objective (with
discriminators frozen), then one update of each discriminator on a real
image and a fake drawn from its history buffer.
"""

import csv
import dataclasses
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import __version__
from . import config as _config
from .data import DatasetRoot, TriDomainBatch, frame_name, load_dataset, sample_batch, to_uint8, write_mask, write_png
from .losses import (ADV_MODES, LEG_DOMAINS, LossReport, LossWeights, NonFiniteLossError, discriminator_loss,
                     generator_objective)
from .networks import (LEGS, DiscriminatorSpec, GeneratorSpec, IdentityGenerator, ModelBundle, build_bundle,
                       build_discriminator)

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1
LOG_COLUMNS = ["step", "epoch", "adv", "T", "GT", "idt", "total"] + [f"G_{k}" for k in LEGS] + [f"D_{k}" for k in LEGS]


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    dataset: str = ""
    out_dir: str = "runs/foldit"
    epochs: int = 100
    decay_start: int | None = None  # epoch where linear lr decay begins; default epochs // 2
    batch_size: int = 1
    steps_per_epoch: int | None = None  # default: |B| // batch_size
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    lambda_adv: float = 1.0
    lambda_T: float = 10.0
    lambda_GT: float = 1.0
    lambda_idt: float = 1.0
    adv_mode: str = "least_squares"
    image_size: int | None = None
    gen_width: int = 64
    gen_blocks: int = 9
    disc_width: int = 64
    disc_layers: int = 3
    pool_size: int = 50
    seed: int = 0
    checkpoint_every: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.adv_mode not in ADV_MODES:
            raise ValueError(f"adv_mode must be one of {ADV_MODES}")
        if self.pool_size < 0:
            raise ValueError("pool_size must be >= 0")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        self.weights  # validates the lambdas
        self.gen_spec
        self.disc_spec

    @property
    def weights(self):
        return LossWeights(self.lambda_adv, self.lambda_T, self.lambda_GT, self.lambda_idt)

    @property
    def gen_spec(self):
        return GeneratorSpec(base_width=self.gen_width, num_residual_blocks=self.gen_blocks)

    @property
    def disc_spec(self):
        return DiscriminatorSpec(base_width=self.disc_width, num_strided_layers=self.disc_layers)

    def lr_at(self, epoch):
        """Constant, then linear decay towards 0 over the remaining epochs."""
        start = self.epochs // 2 if self.decay_start is None else self.decay_start
        span = self.epochs - start + 1
        return self.learning_rate * (1.0 - max(0, epoch + 1 - start) / span)

    @classmethod
    def from_file(cls, path, **overrides):
        values = _config.read_flat(path)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return _config.from_mapping(cls, values)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_file(self, path):
        return _config.dump_flat(self, path)


class ImagePool:
    """History buffer of past fakes; with probability 1/2 swaps in an old one."""

    def __init__(self, size, rng):
        self.size = size
        self.rng = rng
        self.images = []

    def query(self, images):
        if self.size == 0:
            return images
        out = []
        for img in images:
            img = img.detach().unsqueeze(0)
            if len(self.images) < self.size:
                self.images.append(img.clone())
                out.append(img)
            elif self.rng.uniform() > 0.5:
                idx = int(self.rng.integers(0, self.size))
                out.append(self.images[idx].clone())
                self.images[idx] = img.clone()
            else:
                out.append(img)
        return torch.cat(out, 0)

    def state(self):
        return torch.cat(self.images, 0) if self.images else None

    def load(self, stacked):
        self.images = [] if stacked is None else [t.unsqueeze(0).clone() for t in stacked]


@dataclass
class TrainState:
    config: TrainConfig
    bundle: ModelBundle
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer
    pools: dict
    rng: np.random.Generator
    epoch: int = 0  # completed epochs
    step: int = 0  # completed steps


def init_state(config: TrainConfig, bundle=None):
    if bundle is None:
        bundle = build_bundle(config.gen_spec, config.disc_spec, config.seed)
    rng = np.random.default_rng(config.seed)
    betas = (config.beta1, config.beta2)
    opt_g = torch.optim.Adam([p for leg in LEGS for p in bundle.G(leg).parameters()], lr=config.lr_at(0), betas=betas)
    opt_d = torch.optim.Adam([p for leg in LEGS for p in bundle.D(leg).parameters()], lr=config.lr_at(0), betas=betas)
    pools = {leg: ImagePool(config.pool_size, rng) for leg in LEGS}
    return TrainState(config, bundle, opt_g, opt_d, pools, rng)


def _set_requires_grad(nets, flag):
    for net in nets:
        for p in net.parameters():
            p.requires_grad_(flag)


def set_learning_rate(state, epoch):
    lr = state.config.lr_at(epoch)
    for opt in (state.opt_g, state.opt_d):
        for group in opt.param_groups:
            group["lr"] = lr
    return lr


def train_step(state: TrainState, batch: TriDomainBatch):
    """One generator update then one update per discriminator."""
    cfg = state.config
    bundle = state.bundle
    a, b, c = batch.tensors()
    reals = {"a": a, "b": b, "c": c}
    discs = [bundle.D(leg) for leg in LEGS]
    bundle.train()

    _set_requires_grad(discs, False)
    state.opt_g.zero_grad(set_to_none=True)
    total, parts, adv_terms = generator_objective(bundle, a, b, c, cfg.weights, cfg.adv_mode)
    total.backward()
    state.opt_g.step()
    _set_requires_grad(discs, True)

    state.opt_d.zero_grad(set_to_none=True)
    d_terms = {}
    for leg in LEGS:
        fake = state.pools[leg].query(adv_terms.fakes[leg].detach())
        d_terms[leg] = discriminator_loss(bundle.D(leg), reals[LEG_DOMAINS[leg][1]], fake, cfg.adv_mode)
        if not torch.isfinite(d_terms[leg]):
            raise NonFiniteLossError(f"non-finite discriminator loss D_{leg}: {d_terms[leg].item()}")
    sum(d_terms.values()).backward()
    state.opt_d.step()

    state.step += 1
    report = LossReport(
        adv=parts["adv"].item(),
        transitive=parts["transitive"].item(),
        ground_truth=parts["ground_truth"].item(),
        identity=parts["identity"].item(),
        total=total.item(),
        generator_terms={leg: adv_terms.generator[leg].item() for leg in LEGS},
        discriminator_terms={leg: d_terms[leg].item() for leg in LEGS},
    )
    return state, report


def _atomic_write_text(path, text):
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def save_checkpoint(state: TrainState, path):
    """Write ``<path>/state.pt`` plus a readable ``config.cfg`` snapshot."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_FORMAT,
        "package_version": __version__,
        "config": dataclasses.asdict(state.config),
        "generators": state.bundle.generators.state_dict(),
        "discriminators": state.bundle.discriminators.state_dict(),
        "opt_g": state.opt_g.state_dict(),
        "opt_d": state.opt_d.state_dict(),
        "pools": {leg: state.pools[leg].state() for leg in LEGS},
        "rng": state.rng.bit_generator.state,
        "epoch": state.epoch,
        "step": state.step,
    }
    tmp = path / "state.pt.tmp"
    torch.save(payload, tmp)
    os.replace(tmp, path / "state.pt")
    state.config.to_file(path / "config.cfg")
    return path


def resolve_checkpoint(path):
    """Accept a checkpoint dir, a ``checkpoints/`` dir with a ``latest`` marker, or a run dir."""
    path = Path(path)
    for candidate in (path, path / "checkpoints"):
        if (candidate / "state.pt").is_file():
            return candidate
        marker = candidate / "latest"
        if marker.is_file():
            target = candidate / marker.read_text().strip()
            if (target / "state.pt").is_file():
                return target
            raise CheckpointError(f"{marker} points at missing checkpoint {target}")
    raise CheckpointError(f"no checkpoint found at {path}")


def load_checkpoint(path, config: TrainConfig | None = None, bundle=None):
    """Restore a TrainState. ``config`` overrides the stored snapshot (architecture must match)."""
    ckpt_dir = resolve_checkpoint(path)
    try:
        payload = torch.load(ckpt_dir / "state.pt", map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"corrupt checkpoint {ckpt_dir}: {exc}") from exc
    version = payload.get("format_version") if isinstance(payload, dict) else None
    if version != CHECKPOINT_FORMAT:
        raise CheckpointError(f"checkpoint format {version!r} not supported (expected {CHECKPOINT_FORMAT})")
    if config is None:
        config = _config.from_mapping(TrainConfig, payload["config"])
    state = init_state(config, bundle)
    try:
        state.bundle.generators.load_state_dict(payload["generators"])
        state.bundle.discriminators.load_state_dict(payload["discriminators"])
        state.opt_g.load_state_dict(payload["opt_g"])
        state.opt_d.load_state_dict(payload["opt_d"])
    except (RuntimeError, ValueError, KeyError) as exc:
        raise CheckpointError(f"checkpoint {ckpt_dir} does not match the model architecture: {exc}") from exc
    state.rng.bit_generator.state = payload["rng"]
    for leg in LEGS:
        state.pools[leg].load(payload["pools"][leg])
    state.epoch = payload["epoch"]
    state.step = payload["step"]
    return state


def load_generator(path, leg):
    """The ``leg`` generator of a checkpoint, in eval mode."""
    state = load_checkpoint(path)
    gen = state.bundle.G(leg)
    gen.eval()
    return gen


def _read_log(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _open_log(path, keep_until_step=None):
    """Open the CSV log for appending, dropping rows past a resumed checkpoint."""
    rows = []
    if keep_until_step is not None and path.exists():
        rows = [r for r in _read_log(path) if int(r["step"]) <= keep_until_step]
    fh = open(path, "w", newline="")
    writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
    writer.writeheader()
    writer.writerows(rows)
    return fh, writer


def train(config: TrainConfig, resume=False, dataset: DatasetRoot | None = None, bundle=None, until_epoch=None):
    """Run ``config.epochs`` epochs, checkpointing and logging every step.

    ``until_epoch`` stops early (with a checkpoint) without changing the schedule, so a later
    ``resume=True`` call continues exactly where the full run would have been.
    """
    stop = config.epochs if until_epoch is None else min(until_epoch, config.epochs)
    out = Path(config.out_dir)
    ckpt_root = out / "checkpoints"
    out.mkdir(parents=True, exist_ok=True)
    if dataset is None:
        dataset = load_dataset(config.dataset, "train", image_size=config.image_size)
    if resume and (ckpt_root / "latest").is_file():
        state = load_checkpoint(ckpt_root, config, bundle)
        log.info("resumed from epoch %d (step %d)", state.epoch, state.step)
        fh, writer = _open_log(out / "train_log.csv", keep_until_step=state.step)
    else:
        state = init_state(config, bundle)
        fh, writer = _open_log(out / "train_log.csv")
    config.to_file(out / "train.cfg")
    steps = config.steps_per_epoch or max(1, len(dataset) // config.batch_size)
    try:
        for epoch in range(state.epoch, stop):
            lr = set_learning_rate(state, epoch)
            t0 = time.perf_counter()
            for _ in range(steps):
                batch = sample_batch(dataset, config.batch_size, state.rng)
                _, report = train_step(state, batch)
                writer.writerow({"step": state.step, "epoch": epoch + 1, **report.row()})
            fh.flush()
            state.epoch = epoch + 1
            log.info("epoch %d/%d lr=%.2e total=%.4f (%.2f s/step)", state.epoch, config.epochs, lr, report.total,
                     (time.perf_counter() - t0) / steps)
            if state.epoch % config.checkpoint_every == 0 or state.epoch == stop:
                name = f"epoch_{state.epoch:03d}"
                save_checkpoint(state, ckpt_root / name)
                _atomic_write_text(ckpt_root / "latest", name + "\n")
    finally:
        fh.close()
    return state


def identity_bundle(disc_spec=DiscriminatorSpec(), seed=0):
    """Bundle whose four generators are exact identity maps."""
    gens = {leg: IdentityGenerator() for leg in LEGS}
    discs = {leg: build_discriminator(disc_spec, seed * 1000 + 100 + i) for i, leg in enumerate(LEGS)}
    return ModelBundle(gens, discs)


def write_identity_fixture(root, n_frames=4, size=32, seed=0):
    """Dataset where every frame is identical across A, B and C."""
    rng = np.random.default_rng(seed)
    for split in ("train", "test"):
        for d in ("domainA", "domainB", "domainC", "masksB"):
            (Path(root) / split / d).mkdir(parents=True, exist_ok=True)
        for i in range(n_frames):
            img = to_uint8(rng.uniform(-0.9, 0.9, size=(size, size, 3)))
            name = frame_name(0, i)
            for d in ("domainA", "domainB", "domainC"):
                write_png(Path(root) / split / d / name, img)
            write_mask(Path(root) / split / "masksB" / name, np.zeros((size, size), bool))
    return Path(root)
