"""Fold segmentation evaluation of a trained A->B generator on a dataset split."""

from pathlib import Path

from .data import DatasetError, load_dataset
from .inference import DEFAULT_TAU, extract_fold_mask, translate_sequence
from .metrics import consistency, evaluate_sequence


def segment_frames(generator, frames, tau=DEFAULT_TAU):
    """Translate frames and extract the red-overlay fold mask from each output."""
    outputs = translate_sequence(generator, frames)
    return [extract_fold_mask(o, tau) for o in outputs], outputs


def evaluate_folds(generator, root, split="test", a_dirs=("domainA",), tau=DEFAULT_TAU):
    """Score A->B fold masks against ``masksB`` for each A rendering in ``a_dirs``.

    Returns ``{a_dir: MetricReport}``; with two renderings the dict also holds a
    ``consistency`` report between them.
    """
    reports, masks = {}, {}
    for a_dir in a_dirs:
        ds = load_dataset(root, split, a_dir=a_dir)
        if ds.masks is None:
            raise DatasetError(f"{Path(root) / split}: no masksB ground truth")
        if ds.a_names != ds.b_names:
            raise DatasetError(f"{a_dir} frames do not correspond to masksB frames by filename")
        masks[a_dir], _ = segment_frames(generator, list(ds.a_images), tau)
        reports[a_dir] = evaluate_sequence(masks[a_dir], list(ds.masks), names=ds.b_names)
    if len(a_dirs) == 2:
        first, second = a_dirs
        reports["consistency"] = consistency(masks[first], masks[second], names=reports[first].names)
    return reports
