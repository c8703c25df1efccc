"""Objective terms for three-domain translation through a common domain C.

All l1 terms reduce with a mean over batch, channels and pixels.
"""

import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from .networks import LEGS

ADV_MODES = ("least_squares", "log")

# leg -> (source domain, target domain)
LEG_DOMAINS = {"AB": ("a", "b"), "BA": ("b", "a"), "AC": ("a", "c"), "BC": ("b", "c")}


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass(frozen=True)
class LossWeights:
    adv: float = 1.0
    transitive: float = 10.0
    ground_truth: float = 1.0
    identity: float = 1.0

    def __post_init__(self):
        for name in ("adv", "transitive", "ground_truth", "identity"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"loss weight {name} must be finite and >= 0, got {value}")


@dataclass
class LossReport:
    adv: float
    transitive: float
    ground_truth: float
    identity: float
    total: float
    generator_terms: dict = field(default_factory=dict)
    discriminator_terms: dict = field(default_factory=dict)

    def row(self):
        out = {"adv": self.adv, "T": self.transitive, "GT": self.ground_truth, "idt": self.identity, "total": self.total}
        out.update({f"G_{k}": v for k, v in self.generator_terms.items()})
        out.update({f"D_{k}": v for k, v in self.discriminator_terms.items()})
        return out


def gan_loss(patch_logits, target_is_real, mode="least_squares"):
    """Adversarial criterion averaged over the patch map.

    ``least_squares`` treats the raw outputs as predictions and regresses them
    to 1 (real) or 0 (fake); ``log`` is the binary cross-entropy on
    sigmoid(logits).
    """
    if patch_logits.numel() == 0:
        raise ValueError("empty patch map")
    target = torch.full_like(patch_logits, 1.0 if target_is_real else 0.0)
    if mode == "least_squares":
        return F.mse_loss(patch_logits, target)
    if mode == "log":
        return F.binary_cross_entropy_with_logits(patch_logits, target)
    raise ValueError(f"unknown adversarial mode {mode!r}; expected one of {ADV_MODES}")


def l1(x, y):
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
    return (x - y).abs().mean()


def transitive_loss(g_first, g_second, g_direct, images, first_out=None, direct_out=None):
    """Mean |g_second(g_first(x)) - g_direct(x)|.

    Gradients flow through both branches. ``first_out``/``direct_out`` reuse
    already-computed generator outputs.
    """
    if first_out is None:
        first_out = g_first(images)
    if direct_out is None:
        direct_out = g_direct(images)
    return l1(g_second(first_out), direct_out)


def ground_truth_loss(g_bc, b_images, c_images, out=None):
    if len(b_images) != len(c_images):
        raise ValueError(f"unpaired lengths: {len(b_images)} B vs {len(c_images)} C images")
    if out is None:
        out = g_bc(b_images)
    return l1(out, c_images)


def identity_loss(g, c_images, out=None):
    if out is None:
        out = g(c_images)
    return l1(out, c_images)


def total_objective(components, weights: LossWeights = LossWeights()):
    """Weighted sum of ``(adv, transitive, ground_truth, identity)``.

    ``components`` is a 4-sequence, a mapping with those keys, or a LossReport.
    Works on floats or tensors.
    """
    if isinstance(components, LossReport):
        parts = (components.adv, components.transitive, components.ground_truth, components.identity)
    elif isinstance(components, dict):
        parts = tuple(components[k] for k in ("adv", "transitive", "ground_truth", "identity"))
    else:
        parts = tuple(components)
        if len(parts) != 4:
            raise ValueError("expected four components (adv, transitive, ground_truth, identity)")
    for name, value in zip(("adv", "transitive", "ground_truth", "identity"), parts):
        scalar = float(value.detach()) if torch.is_tensor(value) else float(value)
        if not math.isfinite(scalar):
            raise NonFiniteLossError(f"non-finite {name} component: {scalar}")
    adv, trans, gt, idt = parts
    return weights.adv * adv + weights.transitive * trans + weights.ground_truth * gt + weights.identity * idt


@dataclass
class AdversarialTerms:
    generator: dict  # leg -> tensor, fool-the-discriminator loss
    discriminator: dict  # leg -> tensor, computed on detached fakes
    fakes: dict  # leg -> generator output (attached)

    @property
    def adv(self):
        return sum(self.generator[k] for k in LEGS)


def translate_all(bundle, a, b):
    """Every single-leg translation used by the objective."""
    return {"AB": bundle.G("AB")(a), "BA": bundle.G("BA")(b), "AC": bundle.G("AC")(a), "BC": bundle.G("BC")(b)}


def discriminator_loss(disc, real, fake, mode="least_squares"):
    return 0.5 * (gan_loss(disc(real), True, mode) + gan_loss(disc(fake.detach()), False, mode))


def adversarial_suite(bundle, a, b, c, mode="least_squares", fakes=None, pools=None):
    """Generator- and discriminator-side adversarial terms for all four GANs.

    ``pools`` maps leg -> history buffer with a ``query(tensor)`` method; when
    given, discriminators see buffered fakes instead of the current ones.
    """
    if a.shape[1:] != b.shape[1:] or b.shape != c.shape:
        raise ValueError(f"domain shape mismatch: A{tuple(a.shape)} B{tuple(b.shape)} C{tuple(c.shape)}")
    if fakes is None:
        fakes = translate_all(bundle, a, b)
    reals = {"a": a, "b": b, "c": c}
    gen_terms, disc_terms = {}, {}
    for leg in LEGS:
        _, target = LEG_DOMAINS[leg]
        disc = bundle.D(leg)
        gen_terms[leg] = gan_loss(disc(fakes[leg]), True, mode)
        fake = fakes[leg].detach()
        if pools is not None:
            fake = pools[leg].query(fake)
        disc_terms[leg] = discriminator_loss(disc, reals[target], fake, mode)
    return AdversarialTerms(gen_terms, disc_terms, fakes)


def generator_objective(bundle, a, b, c, weights=LossWeights(), mode="least_squares"):
    """Full generator objective; returns ``(total, parts, adversarial_terms)``.

    Discriminator terms are left out here (``adversarial_terms.discriminator``
    is empty); the trainer computes them after the generator update.
    """
    fakes = translate_all(bundle, a, b)
    gen_terms = {leg: gan_loss(bundle.D(leg)(fakes[leg]), True, mode) for leg in LEGS}
    adv = sum(gen_terms[k] for k in LEGS)
    trans = (
        transitive_loss(bundle.G("AB"), bundle.G("BC"), bundle.G("AC"), a, first_out=fakes["AB"], direct_out=fakes["AC"])
        + transitive_loss(bundle.G("BA"), bundle.G("AC"), bundle.G("BC"), b, first_out=fakes["BA"], direct_out=fakes["BC"])
    )
    gt = ground_truth_loss(bundle.G("BC"), b, c, out=fakes["BC"])
    idt = identity_loss(bundle.G("AC"), c) + identity_loss(bundle.G("BC"), c)
    parts = {"adv": adv, "transitive": trans, "ground_truth": gt, "identity": idt}
    for name, value in parts.items():
        if not torch.isfinite(value):
            raise NonFiniteLossError(f"non-finite {name} loss: {value.item()}")
    total = total_objective(parts, weights)
    return total, parts, AdversarialTerms(gen_terms, {}, fakes)
