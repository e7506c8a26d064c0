"""
Adversarial, cycle and identity losses
======================================

Small worked examples of the training objective, plus the replay pool the
discriminators draw their fake images from.
"""

import torch

from framerestore.cyclegan import (
    GeneratorLossParts,
    ImagePool,
    LossWeights,
    cycle_loss,
    lsgan_discriminator_loss,
    lsgan_generator_loss,
    total_generator_objective,
)

t = lambda *v: torch.tensor(v, dtype=torch.float64)  # noqa: E731

# least-squares adversarial terms: real scores pulled to 1, fakes to 0
print("D loss, real 0.5 / fake 0.5:", float(lsgan_discriminator_loss(t(0.5), t(0.5))))
print("D loss, perfect scores:     ", float(lsgan_discriminator_loss(t(1.0, 1.0), t(0.0))))
print("G loss, fake [0.25, 0.75]:  ", float(lsgan_generator_loss(t(0.25, 0.75))))

# cycle loss is a per-element L1 mean, so a constant offset shows up as itself
a = torch.zeros(1, 3, 8, 8, dtype=torch.float64)
print("cycle loss, offset 0.1:     ", float(cycle_loss(a, a + 0.1, a, a)))

parts = GeneratorLossParts(t(0.1), t(0.1), t(0.2), t(0.05))
print("weights:", LossWeights())
print("total objective:            ", float(total_generator_objective(parts)))

# the pool passes images through until it is full, then swaps about half of them
pool = ImagePool(capacity=3, swap_probability=0.5, seed=0)
for step in range(6):
    fake = torch.full((1, 1, 1, 1), float(step))
    got = pool.query(fake)
    stored = sorted(int(x.item()) for x in pool.buffer)
    print(f"step {step}: fed {step}, discriminator sees {int(got.item())}, pool holds {stored}")
