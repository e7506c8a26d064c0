"""ResNet generator and 70x70 PatchGAN discriminator."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from ..errors import ShapeError


@dataclass(frozen=True)
class GeneratorConfig:
    base_width: int = 64
    n_res_blocks: int = 6
    in_channels: int = 3
    out_channels: int = 3

    def __post_init__(self):
        if self.n_res_blocks < 1:
            raise ValueError("n_res_blocks must be >= 1")
        if self.base_width < 1:
            raise ValueError("base_width must be >= 1")

    @classmethod
    def for_size(cls, image_size: int, base_width: int = 64) -> "GeneratorConfig":
        return cls(base_width=base_width, n_res_blocks=6 if image_size <= 128 else 9)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DiscriminatorConfig:
    base_width: int = 64
    in_channels: int = 3
    # smallest accepted input side; the 70px receptive field by default
    min_input: int = 70

    def to_json(self) -> dict:
        return asdict(self)


def _norm(channels: int) -> nn.Module:
    return nn.InstanceNorm2d(channels, affine=False, track_running_stats=False)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            _norm(channels),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            _norm(channels),
        )

    def forward(self, x):
        return x + self.block(x)


class ResnetGenerator(nn.Module):
    """c7s1-w, d2w, d4w, R4w x n, u2w, uw, c7s1-3 with tanh output."""

    def __init__(self, config: GeneratorConfig = GeneratorConfig()):
        super().__init__()
        self.config = config
        w = config.base_width
        layers = [
            nn.ReflectionPad2d(3),
            nn.Conv2d(config.in_channels, w, 7),
            _norm(w),
            nn.ReLU(inplace=True),
        ]
        for mult in (1, 2):
            layers += [
                nn.Conv2d(w * mult, w * mult * 2, 3, stride=2, padding=1),
                _norm(w * mult * 2),
                nn.ReLU(inplace=True),
            ]
        layers += [ResidualBlock(w * 4) for _ in range(config.n_res_blocks)]
        for mult in (4, 2):
            layers += [
                nn.ConvTranspose2d(w * mult, w * mult // 2, 3, stride=2, padding=1, output_padding=1),
                _norm(w * mult // 2),
                nn.ReLU(inplace=True),
            ]
        layers += [nn.ReflectionPad2d(3), nn.Conv2d(w, config.out_channels, 7), nn.Tanh()]
        self.model = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        if h % 4 or w % 4:
            raise ShapeError(f"generator input {h}x{w} is not divisible by 4")
        if min(h, w) < 4:
            raise ShapeError(f"generator input {h}x{w} is too small for reflection padding")
        return self.model(x)


class PatchDiscriminator(nn.Module):
    """C64-C128-C256-C512 followed by a 1-channel stride-1 head (70px receptive field)."""

    def __init__(self, config: DiscriminatorConfig = DiscriminatorConfig()):
        super().__init__()
        self.config = config
        w = config.base_width
        self.model = nn.Sequential(
            nn.Conv2d(config.in_channels, w, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w, w * 2, 4, stride=2, padding=1),
            _norm(w * 2),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w * 2, w * 4, 4, stride=2, padding=1),
            _norm(w * 4),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w * 4, w * 8, 4, stride=1, padding=1),
            _norm(w * 8),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w * 8, 1, 4, stride=1, padding=1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        m = self.config.min_input
        if h < m or w < m or score_map_size(min(h, w)) < 1:
            raise ShapeError(f"discriminator input {h}x{w} is smaller than {m}x{m}")
        return self.model(x)


def score_map_size(size: int) -> int:
    """Side length of the score map for a square input, by conv arithmetic."""
    for stride in (2, 2, 2, 1, 1):
        size = (size + 2 * 1 - 4) // stride + 1
    return size


def init_weights(module: nn.Module, gain: float = 0.02) -> None:
    """Normal(0, gain) conv weights, zero biases."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, gain)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def to_batch(images, dtype=torch.float32) -> torch.Tensor:
    """HxWx3 array or NxHxWx3 stack (working range) -> NCHW tensor."""
    arr = np.asarray(images)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise ShapeError(f"expected HxWx3 or NxHxWx3, got {arr.shape}")
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2))).to(dtype)


def from_batch(batch: torch.Tensor) -> np.ndarray:
    """NCHW tensor -> NxHxWx3 float64 array."""
    return batch.detach().cpu().double().numpy().transpose(0, 2, 3, 1)


def generator_forward(model: ResnetGenerator, img: np.ndarray) -> np.ndarray:
    """Apply a generator to one HxWx3 image in [-1, 1]; returns HxWx3."""
    with torch.no_grad():
        return from_batch(model(to_batch(img, next(model.parameters()).dtype)))[0]


def discriminator_forward(model: PatchDiscriminator, img: np.ndarray) -> np.ndarray:
    """Score one HxWx3 image; returns the 2-D score map."""
    with torch.no_grad():
        return from_batch(model(to_batch(img, next(model.parameters()).dtype)))[0, ..., 0]
