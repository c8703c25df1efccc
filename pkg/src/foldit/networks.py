"""Residual translation generators and patch discriminators.

Generator: c7s1-w, two stride-2 downsamplings, N residual blocks, two
transposed-conv upsamplings, c7s1-3, tanh. Discriminator: the 70x70 patch
classifier (three stride-2 4x4 convs, then two stride-1 4x4 convs).
"""

from dataclasses import dataclass

import torch
import torch.nn as nn

LEGS = ("AB", "BA", "AC", "BC")


@dataclass(frozen=True)
class GeneratorSpec:
    input_channels: int = 3
    output_channels: int = 3
    base_width: int = 64
    num_residual_blocks: int = 9
    downsampling_stages: int = 2

    def __post_init__(self):
        if self.num_residual_blocks < 1:
            raise ValueError("num_residual_blocks must be >= 1")
        if min(self.input_channels, self.output_channels, self.base_width) < 1:
            raise ValueError("channel counts must be positive")
        if self.downsampling_stages < 0:
            raise ValueError("downsampling_stages must be >= 0")

    @property
    def size_multiple(self):
        return 2 ** self.downsampling_stages


@dataclass(frozen=True)
class DiscriminatorSpec:
    input_channels: int = 3
    base_width: int = 64
    num_strided_layers: int = 3

    def __post_init__(self):
        if self.num_strided_layers < 1:
            raise ValueError("num_strided_layers must be >= 1")
        if min(self.input_channels, self.base_width) < 1:
            raise ValueError("channel counts must be positive")

    def output_size(self, size):
        for _ in range(self.num_strided_layers):
            size = (size + 2 - 4) // 2 + 1
        for _ in range(2):
            size = size + 2 - 4 + 1
        return size


class ResidualBlock(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, kernel_size=3),
            nn.InstanceNorm2d(channels),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, kernel_size=3),
            nn.InstanceNorm2d(channels),
        )

    def forward(self, x):
        return x + self.block(x)


class ResnetGenerator(nn.Module):
    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        w = spec.base_width
        layers = [
            nn.ReflectionPad2d(3),
            nn.Conv2d(spec.input_channels, w, kernel_size=7),
            nn.InstanceNorm2d(w),
            nn.ReLU(inplace=True),
        ]
        ch = w
        for _ in range(spec.downsampling_stages):
            layers += [nn.Conv2d(ch, ch * 2, kernel_size=3, stride=2, padding=1), nn.InstanceNorm2d(ch * 2), nn.ReLU(inplace=True)]
            ch *= 2
        layers += [ResidualBlock(ch) for _ in range(spec.num_residual_blocks)]
        for _ in range(spec.downsampling_stages):
            layers += [
                nn.ConvTranspose2d(ch, ch // 2, kernel_size=3, stride=2, padding=1, output_padding=1),
                nn.InstanceNorm2d(ch // 2),
                nn.ReLU(inplace=True),
            ]
            ch //= 2
        layers += [nn.ReflectionPad2d(3), nn.Conv2d(ch, spec.output_channels, kernel_size=7), nn.Tanh()]
        self.model = nn.Sequential(*layers)

    def forward(self, x):
        m = self.spec.size_multiple
        if x.shape[-1] % m or x.shape[-2] % m:
            raise ValueError(f"spatial size {tuple(x.shape[-2:])} must be divisible by {m}")
        if x.shape[-3] != self.spec.input_channels:
            raise ValueError(f"expected {self.spec.input_channels} channels, got {x.shape[-3]}")
        return self.model(x)


class PatchDiscriminator(nn.Module):
    """Emits one real/fake logit per overlapping input patch."""

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        w = spec.base_width
        layers = [nn.Conv2d(spec.input_channels, w, kernel_size=4, stride=2, padding=1), nn.LeakyReLU(0.2, inplace=True)]
        ch = w
        for i in range(1, spec.num_strided_layers):
            nxt = w * min(2 ** i, 8)
            layers += [nn.Conv2d(ch, nxt, kernel_size=4, stride=2, padding=1), nn.InstanceNorm2d(nxt), nn.LeakyReLU(0.2, inplace=True)]
            ch = nxt
        nxt = w * min(2 ** spec.num_strided_layers, 8)
        layers += [
            nn.Conv2d(ch, nxt, kernel_size=4, stride=1, padding=1),
            nn.InstanceNorm2d(nxt),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(nxt, 1, kernel_size=4, stride=1, padding=1),
        ]
        self.model = nn.Sequential(*layers)

    def forward(self, x):
        if x.shape[-3] != self.spec.input_channels:
            raise ValueError(f"expected {self.spec.input_channels} channels, got {x.shape[-3]}")
        if self.spec.output_size(min(x.shape[-2:])) < 1:
            raise ValueError(f"input {tuple(x.shape[-2:])} too small for {self.spec.num_strided_layers} strided layers")
        return self.model(x)


def _torch_generator(rng_state):
    if isinstance(rng_state, torch.Generator):
        return rng_state
    gen = torch.Generator()
    gen.manual_seed(int(rng_state))
    return gen


def init_weights(net, rng_state, std=0.02):
    gen = _torch_generator(rng_state)
    for module in net.modules():
        if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
            with torch.no_grad():
                nn.init.normal_(module.weight, 0.0, std, generator=gen)
                if module.bias is not None:
                    module.bias.zero_()
    return net


def build_generator(spec: GeneratorSpec, rng_state=0):
    return init_weights(ResnetGenerator(spec), rng_state)


def build_discriminator(spec: DiscriminatorSpec, rng_state=0):
    return init_weights(PatchDiscriminator(spec), rng_state)


class ModelBundle(nn.Module):
    """The four generators and their four discriminators, keyed by leg (``AB`` ...)."""

    def __init__(self, generators, discriminators):
        super().__init__()
        if set(generators) != set(LEGS) or set(discriminators) != set(LEGS):
            raise ValueError(f"need exactly the legs {LEGS}")
        self.generators = nn.ModuleDict({k: generators[k] for k in LEGS})
        self.discriminators = nn.ModuleDict({k: discriminators[k] for k in LEGS})
        ids = [id(p) for p in self.parameters()]
        all_ids = [id(p) for net in (*self.generators.values(), *self.discriminators.values()) for p in net.parameters()]
        if len(ids) != len(all_ids):
            raise ValueError("networks must not share parameters")

    def G(self, leg):
        return self.generators[leg]

    def D(self, leg):
        return self.discriminators[leg]


def build_bundle(gen_spec=GeneratorSpec(), disc_spec=DiscriminatorSpec(), seed=0):
    # distinct, reproducible init stream for each of the eight networks
    gens = {leg: build_generator(gen_spec, seed * 1000 + i) for i, leg in enumerate(LEGS)}
    discs = {leg: build_discriminator(disc_spec, seed * 1000 + 100 + i) for i, leg in enumerate(LEGS)}
    return ModelBundle(gens, discs)


class IdentityGenerator(nn.Module):
    """Affine per-channel map initialised to the identity.

    Stands in for a trained generator in fixtures where every translation
    should be a no-op; it still has parameters so optimisers can step it.
    """

    def __init__(self, channels=3):
        super().__init__()
        self.scale = nn.Parameter(torch.ones(channels, 1, 1))
        self.shift = nn.Parameter(torch.zeros(channels, 1, 1))

    def forward(self, x):
        return x * self.scale + self.shift


def forward(net, image):
    """Run ``net`` on a CHW or NCHW tensor (a single image is batched and unbatched)."""
    single = image.dim() == 3
    x = image.unsqueeze(0) if single else image
    if x.dim() != 4:
        raise ValueError(f"expected CHW or NCHW input, got shape {tuple(image.shape)}")
    out = net(x)
    return out[0] if single else out


def count_parameters(net):
    return sum(p.numel() for p in net.parameters())
