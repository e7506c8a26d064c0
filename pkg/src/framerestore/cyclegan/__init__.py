"""Two-generator, two-discriminator unpaired translation engine."""

from .losses import (
    GeneratorLossParts,
    LossWeights,
    cycle_loss,
    identity_loss,
    lsgan_discriminator_loss,
    lsgan_generator_loss,
    total_generator_objective,
)
from .networks import (
    DiscriminatorConfig,
    GeneratorConfig,
    PatchDiscriminator,
    ResnetGenerator,
    discriminator_forward,
    generator_forward,
    score_map_size,
)
from .pool import ImagePool
from .train import (
    LossRecord,
    TrainConfig,
    TrainState,
    fit,
    init_state,
    latest_checkpoint,
    load_generator,
    train_step,
)
from .translate import IdentityTranslator, TimingReport, Translator, translate

__all__ = [
    "DiscriminatorConfig",
    "GeneratorConfig",
    "GeneratorLossParts",
    "IdentityTranslator",
    "ImagePool",
    "LossRecord",
    "LossWeights",
    "PatchDiscriminator",
    "ResnetGenerator",
    "TimingReport",
    "TrainConfig",
    "TrainState",
    "Translator",
    "cycle_loss",
    "discriminator_forward",
    "fit",
    "generator_forward",
    "identity_loss",
    "init_state",
    "latest_checkpoint",
    "load_generator",
    "lsgan_discriminator_loss",
    "lsgan_generator_loss",
    "score_map_size",
    "total_generator_objective",
    "train_step",
    "translate",
]
