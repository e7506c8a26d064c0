"""Least-squares adversarial, cycle and identity losses.

Expectations are batch means; every reduction is a mean over all elements,
so loss weights do not depend on resolution.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch

from ..errors import NumericError, ShapeError


@dataclass(frozen=True)
class LossWeights:
    lambda_adv: float = 1.0
    lambda_cyc: float = 10.0
    lambda_idt: float = 5.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a finite nonnegative real, got {value}")

    def to_json(self) -> dict:
        return asdict(self)


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def _nonempty(x: torch.Tensor, what: str) -> torch.Tensor:
    if x.numel() == 0:
        raise ValueError(f"{what} batch is empty")
    return x


def lsgan_discriminator_loss(real_scores, fake_scores) -> torch.Tensor:
    """mean((D(real) - 1)^2) + mean(D(fake)^2), without the 1/2 factor."""
    real = _nonempty(_as_tensor(real_scores), "real score")
    fake = _nonempty(_as_tensor(fake_scores), "fake score")
    return torch.mean((real - 1.0) ** 2) + torch.mean(fake**2)


def lsgan_generator_loss(fake_scores) -> torch.Tensor:
    fake = _nonempty(_as_tensor(fake_scores), "fake score")
    return torch.mean((fake - 1.0) ** 2)


def _l1(x: torch.Tensor, y: torch.Tensor, what: str) -> torch.Tensor:
    if x.shape != y.shape:
        raise ShapeError(f"{what}: shape mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    return torch.mean(torch.abs(x - y))


def cycle_loss(a, rec_a, b, rec_b) -> torch.Tensor:
    a, rec_a, b, rec_b = map(_as_tensor, (a, rec_a, b, rec_b))
    return _l1(rec_a, a, "cycle A") + _l1(rec_b, b, "cycle B")


def identity_loss(a, idt_a, b, idt_b) -> torch.Tensor:
    """mean|G_AB(b) - b| + mean|G_BA(a) - a|, with idt_a = G_BA(a), idt_b = G_AB(b)."""
    a, idt_a, b, idt_b = map(_as_tensor, (a, idt_a, b, idt_b))
    return _l1(idt_b, b, "identity B") + _l1(idt_a, a, "identity A")


@dataclass
class GeneratorLossParts:
    adv_ab: torch.Tensor | float
    adv_ba: torch.Tensor | float
    cycle: torch.Tensor | float
    identity: torch.Tensor | float


def total_generator_objective(parts: GeneratorLossParts, weights: LossWeights = LossWeights()):
    for name in ("adv_ab", "adv_ba", "cycle", "identity"):
        value = getattr(parts, name)
        value = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
        if not math.isfinite(value):
            raise NumericError(f"non-finite generator loss term {name!r}: {value}")
    return (
        weights.lambda_adv * (parts.adv_ab + parts.adv_ba)
        + weights.lambda_cyc * parts.cycle
        + weights.lambda_idt * parts.identity
    )
