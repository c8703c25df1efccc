"""Three-domain adversarial translation for haustral fold segmentation."""

__version__ = "0.1.0"

from .data import (DatasetError, DatasetRoot, DomainId, PairingError, TriDomainBatch, generate_toy_tridomain,
                   load_dataset, sample_batch)
from .inference import OverlaySpec, extract_fold_mask, overlay, translate_sequence
from .losses import (LossReport, LossWeights, adversarial_suite, gan_loss, ground_truth_loss, identity_loss,
                     total_objective, transitive_loss)
from .metrics import MetricReport, consistency, dice, evaluate_sequence, iou
from .networks import (DiscriminatorSpec, GeneratorSpec, ModelBundle, build_bundle, build_discriminator,
                       build_generator)
from .synth import SynthConfig
from .trainer import TrainConfig, TrainState, load_checkpoint, save_checkpoint, train, train_step

__all__ = [
    "DatasetError", "DatasetRoot", "DomainId", "PairingError", "TriDomainBatch", "generate_toy_tridomain",
    "load_dataset", "sample_batch", "OverlaySpec", "extract_fold_mask", "overlay", "translate_sequence",
    "LossReport", "LossWeights", "adversarial_suite", "gan_loss", "ground_truth_loss", "identity_loss",
    "total_objective", "transitive_loss", "MetricReport", "consistency", "dice", "evaluate_sequence", "iou",
    "DiscriminatorSpec", "GeneratorSpec", "ModelBundle", "build_bundle", "build_discriminator", "build_generator",
    "SynthConfig", "TrainConfig", "TrainState", "load_checkpoint", "save_checkpoint", "train", "train_step",
]
