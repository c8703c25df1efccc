import numpy as np
import pytest
import torch

from foldit.data import generate_toy_tridomain
from foldit.losses import gan_loss, ground_truth_loss, identity_loss, transitive_loss
from foldit.networks import LEGS, DiscriminatorSpec, GeneratorSpec, ModelBundle, build_discriminator, build_generator
from foldit.synth import SynthConfig

GRADIENT_TERMS = ("transitive_ab", "transitive_ba", "ground_truth", "identity_ac", "identity_bc", "adv_ab", "adv_ac",
                  "disc_ab")


def pixel_loop_l1(x, y):
    """Mean absolute difference by explicit iteration over every element."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    total = 0.0
    for i in range(x.size):
        total += abs(x[i] - y[i])
    return total / x.size


def central_difference_check(loss_fn, params, n_coords=24, eps=1e-6, seed=0):
    """Relative error ||analytic - fd|| / ||fd|| over sampled parameter coordinates.

    ``loss_fn`` maps () -> scalar tensor using ``params`` (float64 leaves).
    """
    rng = np.random.default_rng(seed)
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic, numeric = [], []
    flat = [(p, i) for p in params for i in range(p.numel())]
    picks = rng.choice(len(flat), size=min(n_coords, len(flat)), replace=False)
    with torch.no_grad():
        for k in picks:
            p, i = flat[k]
            view = p.view(-1)
            orig = view[i].item()
            view[i] = orig + eps
            up = loss_fn().item()
            view[i] = orig - eps
            down = loss_fn().item()
            view[i] = orig
            numeric.append((up - down) / (2 * eps))
            analytic.append(p.grad.view(-1)[i].item())
    analytic, numeric = np.array(analytic), np.array(numeric)
    return float(np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12))


def tiny_float64_bundle():
    """1-block width-4 generators, 1-strided-layer discriminators, all float64."""
    spec_g = GeneratorSpec(base_width=4, num_residual_blocks=1)
    spec_d = DiscriminatorSpec(base_width=4, num_strided_layers=1)
    gens = {leg: build_generator(spec_g, i).double() for i, leg in enumerate(LEGS)}
    discs = {leg: build_discriminator(spec_d, 10 + i).double() for i, leg in enumerate(LEGS)}
    for net in (*gens.values(), *discs.values()):
        # keep the net away from ReLU kinks so finite differences are smooth
        for p in net.parameters():
            torch.nn.init.normal_(p, 0, 0.5, generator=torch.Generator().manual_seed(p.numel()))
    return ModelBundle(gens, discs)


def float64_images(seed, size=8):
    g = torch.Generator().manual_seed(seed)
    return [torch.rand(2, 3, size, size, generator=g, dtype=torch.float64) * 2 - 1 for _ in range(3)]


def loss_term_closures(bundle, a, b, c):
    """term name -> (closure returning the scalar loss, parameters it should differentiate)."""
    G, D = bundle.G, bundle.D
    fake = G("AB")(a).detach()
    terms = {
        "transitive_ab": (lambda: transitive_loss(G("AB"), G("BC"), G("AC"), a), ["AB", "BC", "AC"]),
        "transitive_ba": (lambda: transitive_loss(G("BA"), G("AC"), G("BC"), b), ["BA", "AC", "BC"]),
        "ground_truth": (lambda: ground_truth_loss(G("BC"), b, c), ["BC"]),
        "identity_ac": (lambda: identity_loss(G("AC"), c), ["AC"]),
        "identity_bc": (lambda: identity_loss(G("BC"), c), ["BC"]),
        "adv_ab": (lambda: gan_loss(D("AB")(G("AB")(a)), True), ["AB"]),
        "adv_ac": (lambda: gan_loss(D("AC")(G("AC")(a)), True, "log"), ["AC"]),
    }
    out = {k: (fn, [p for leg in legs for p in G(leg).parameters()]) for k, (fn, legs) in terms.items()}
    out["disc_ab"] = (lambda: 0.5 * (gan_loss(D("AB")(b), True) + gan_loss(D("AB")(fake), False)),
                      list(D("AB").parameters()))
    return out


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    """Small synthetic dataset: 3 train + 1 test videos of 4 frames at 32x32, plus a t2 test rendering."""
    root = tmp_path_factory.mktemp("toy")
    cfg = SynthConfig(seed=3, num_videos=4, frames_per_video=4, image_size=32, test_videos=1)
    generate_toy_tridomain(cfg, root, texture_ids=["t2"])
    return root


# criterion number -> (passed, detail); filled by test_acceptance, printed after the run
ACCEPTANCE_RESULTS = {}


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE_RESULTS[number] = (title, bool(passed), detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
