from __future__ import annotations

import numpy as np
import torch


class ImagePool:
    """Replay buffer of generated images fed to the discriminators.

    Until ``capacity`` images are stored every query image is returned as-is
    and stored. Afterwards each slot is, with probability
    ``swap_probability``, exchanged for a random stored image (which the new
    one replaces); otherwise the new image passes through. ``capacity=0``
    disables pooling.
    """

    def __init__(self, capacity: int = 50, swap_probability: float = 0.5, seed: int = 0):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        if not 0.0 <= swap_probability <= 1.0:
            raise ValueError("swap_probability must lie in [0, 1]")
        self.capacity = capacity
        self.swap_probability = swap_probability
        self.rng = np.random.default_rng(seed)
        self.buffer: list[torch.Tensor] = []

    def __len__(self) -> int:
        return len(self.buffer)

    def query(self, images: torch.Tensor) -> torch.Tensor:
        if self.capacity == 0:
            return images
        out = []
        for image in images.detach():
            image = image.clone()
            if len(self.buffer) < self.capacity:
                self.buffer.append(image)
                out.append(image)
            elif self.rng.random() < self.swap_probability:
                idx = int(self.rng.integers(len(self.buffer)))
                out.append(self.buffer[idx])
                self.buffer[idx] = image
            else:
                out.append(image)
        return torch.stack(out)

    def state_dict(self) -> dict:
        return {
            "capacity": self.capacity,
            "swap_probability": self.swap_probability,
            "rng": self.rng.bit_generator.state,
            "buffer": [t.clone() for t in self.buffer],
        }

    def load_state_dict(self, state: dict) -> None:
        self.capacity = state["capacity"]
        self.swap_probability = state["swap_probability"]
        self.rng = np.random.default_rng()
        self.rng.bit_generator.state = state["rng"]
        self.buffer = [t.clone() for t in state["buffer"]]
