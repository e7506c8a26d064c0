"""Central finite-difference checks of analytic loss gradients on small networks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch


@dataclass
class GradCheckResult:
    analytic: np.ndarray
    numeric: np.ndarray
    relative_error: np.ndarray

    @property
    def max_relative_error(self) -> float:
        return float(self.relative_error.max()) if self.relative_error.size else 0.0


def check_gradients(
    loss_fn: Callable[[], torch.Tensor],
    params: Sequence[torch.nn.Parameter],
    n_samples: int = 20,
    step: float = 1e-3,
    seed: int = 0,
    floor: float = 1e-8,
) -> GradCheckResult:
    """Compare autograd against ``(f(p + h) - f(p - h)) / 2h`` on sampled scalars.

    Relative error is ``|a - n| / max(|a|, |n|, floor)``. Parameters should be
    float64; the flat sampling is uniform over all entries of ``params``.
    """
    params = list(params)
    for p in params:
        p.grad = None
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    grads = [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]

    sizes = np.array([p.numel() for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(seed)
    flat = rng.choice(offsets[-1], size=min(n_samples, offsets[-1]), replace=False)

    analytic, numeric = [], []
    with torch.no_grad():
        for idx in flat:
            k = int(np.searchsorted(offsets, idx, side="right") - 1)
            p, local = params[k], int(idx - offsets[k])
            view = p.view(-1)
            orig = view[local].item()
            view[local] = orig + step
            f_plus = float(loss_fn())
            view[local] = orig - step
            f_minus = float(loss_fn())
            view[local] = orig
            numeric.append((f_plus - f_minus) / (2 * step))
            analytic.append(float(grads[k].view(-1)[local]))
    a, n = np.array(analytic), np.array(numeric)
    rel = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return GradCheckResult(a, n, rel)


def micro_config(seed: int = 0, init_gain: float = 0.02):
    """float64 base-width-4 models with one residual block."""
    from .networks import DiscriminatorConfig, GeneratorConfig
    from .train import TrainConfig

    # 24px is the smallest input the PatchGAN stack maps to a 1x1 score
    return TrainConfig(
        generator=GeneratorConfig(base_width=4, n_res_blocks=1),
        discriminator=DiscriminatorConfig(base_width=4, min_input=24),
        dtype="float64",
        seed=seed,
        init_gain=init_gain,
    )


def check_micro_losses(size: int = 24, step: float = 1e-3, n_samples: int = 20, seed: int = 0,
                       init_gain: float = 0.02) -> dict[str, GradCheckResult]:
    """Gradient checks of the total generator objective and the D_B loss."""
    from .losses import lsgan_discriminator_loss
    from .train import generator_losses, init_state

    state = init_state(micro_config(seed, init_gain))
    gen = torch.Generator().manual_seed(seed)
    a = torch.rand(1, 3, size, size, generator=gen, dtype=torch.float64) * 2 - 1
    b = torch.rand(1, 3, size, size, generator=gen, dtype=torch.float64) * 2 - 1
    g_params = [*state.G_AB.parameters(), *state.G_BA.parameters()]
    with torch.no_grad():
        fake_b = state.G_AB(a)
    return {
        "generator": check_gradients(lambda: generator_losses(state, a, b)[1], g_params, n_samples, step, seed),
        "discriminator": check_gradients(
            lambda: lsgan_discriminator_loss(state.D_B(b), state.D_B(fake_b)),
            list(state.D_B.parameters()), n_samples, step, seed,
        ),
    }
