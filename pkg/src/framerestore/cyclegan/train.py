"""Training state, single steps, and the epoch loop with checkpointing."""

from __future__ import annotations

import copy
import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from ..config import config_hash, deterministic_requested
from ..errors import ConfigError, DataError, NumericError, ShapeError
from ..imaging import DatasetManifest, load_image, normalize
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
    init_weights,
)
from .pool import ImagePool

log = logging.getLogger(__name__)

NETWORKS = ("G_AB", "G_BA", "D_A", "D_B")
_DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass(frozen=True)
class TrainConfig:
    generator: GeneratorConfig = GeneratorConfig()
    discriminator: DiscriminatorConfig = DiscriminatorConfig()
    weights: LossWeights = LossWeights()
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epochs: int = 10
    batch_size: int = 1
    pool_size: int = 50
    swap_probability: float = 0.5
    seed: int = 0
    deterministic: bool = False
    init_gain: float = 0.02
    dtype: str = "float32"

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.dtype not in _DTYPES:
            raise ConfigError(f"dtype must be one of {sorted(_DTYPES)}")

    def to_json(self) -> dict:
        out = asdict(self)
        out["generator"] = self.generator.to_json()
        out["discriminator"] = self.discriminator.to_json()
        out["weights"] = self.weights.to_json()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        try:
            data["generator"] = GeneratorConfig(**data.get("generator", {}))
            data["discriminator"] = DiscriminatorConfig(**data.get("discriminator", {}))
            data["weights"] = LossWeights(**data.get("weights", {}))
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid training config: {exc}") from exc

    @property
    def hash(self) -> str:
        return config_hash(self.to_json())

    @property
    def torch_dtype(self) -> torch.dtype:
        return _DTYPES[self.dtype]


@dataclass
class LossRecord:
    adv_ab: float
    adv_ba: float
    cycle: float
    identity: float
    generator_total: float
    d_a: float
    d_b: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainState:
    config: TrainConfig
    G_AB: ResnetGenerator
    G_BA: ResnetGenerator
    D_A: PatchDiscriminator
    D_B: PatchDiscriminator
    opt_G: torch.optim.Optimizer
    opt_D_A: torch.optim.Optimizer
    opt_D_B: torch.optim.Optimizer
    pool_A: ImagePool
    pool_B: ImagePool
    epoch: int = 0
    step: int = 0
    history: list[dict] = field(default_factory=list)

    def networks(self) -> dict:
        return {name: getattr(self, name) for name in NETWORKS}

    def set_lr(self, lr: float) -> None:
        for opt in (self.opt_G, self.opt_D_A, self.opt_D_B):
            for group in opt.param_groups:
                group["lr"] = lr

    def state_dict(self) -> dict:
        """A deep copy, so later training does not alter a saved snapshot."""
        return copy.deepcopy({
            "config": self.config.to_json(),
            "networks": {k: m.state_dict() for k, m in self.networks().items()},
            "optimizers": {
                "G": self.opt_G.state_dict(),
                "D_A": self.opt_D_A.state_dict(),
                "D_B": self.opt_D_B.state_dict(),
            },
            "pools": {"A": self.pool_A.state_dict(), "B": self.pool_B.state_dict()},
            "epoch": self.epoch,
            "step": self.step,
            "history": list(self.history),
            "torch_rng": torch.get_rng_state(),
        })

    @classmethod
    def from_state_dict(cls, data: dict) -> "TrainState":
        state = init_state(TrainConfig.from_json(data["config"]))
        for name, module in state.networks().items():
            module.load_state_dict(data["networks"][name])
        state.opt_G.load_state_dict(data["optimizers"]["G"])
        state.opt_D_A.load_state_dict(data["optimizers"]["D_A"])
        state.opt_D_B.load_state_dict(data["optimizers"]["D_B"])
        state.pool_A.load_state_dict(data["pools"]["A"])
        state.pool_B.load_state_dict(data["pools"]["B"])
        state.epoch = int(data["epoch"])
        state.step = int(data["step"])
        state.history = list(data["history"])
        torch.set_rng_state(data["torch_rng"])
        return state

    def save(self, path: str | Path) -> None:
        torch.save(self.state_dict(), path)

    @classmethod
    def load(cls, path: str | Path) -> "TrainState":
        try:
            data = torch.load(path, map_location="cpu", weights_only=False)
        except OSError as exc:
            raise DataError(f"cannot read training state {path}: {exc}") from exc
        return cls.from_state_dict(data)


def set_deterministic(seed: int) -> None:
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)


def init_state(config: TrainConfig) -> TrainState:
    if config.deterministic or deterministic_requested():
        set_deterministic(config.seed)
    dtype = config.torch_dtype
    with torch.random.fork_rng():
        torch.manual_seed(config.seed)
        nets = {}
        for name in NETWORKS:
            net = (
                ResnetGenerator(config.generator)
                if name.startswith("G")
                else PatchDiscriminator(config.discriminator)
            )
            init_weights(net, config.init_gain)
            nets[name] = net.to(dtype)
    betas = (config.beta1, config.beta2)
    return TrainState(
        config=config,
        **nets,
        opt_G=torch.optim.Adam(
            itertools.chain(nets["G_AB"].parameters(), nets["G_BA"].parameters()),
            lr=config.lr,
            betas=betas,
        ),
        opt_D_A=torch.optim.Adam(nets["D_A"].parameters(), lr=config.lr, betas=betas),
        opt_D_B=torch.optim.Adam(nets["D_B"].parameters(), lr=config.lr, betas=betas),
        pool_A=ImagePool(config.pool_size, config.swap_probability, seed=config.seed * 2 + 1),
        pool_B=ImagePool(config.pool_size, config.swap_probability, seed=config.seed * 2 + 2),
    )


def _set_requires_grad(modules, flag: bool) -> None:
    for m in modules:
        for p in m.parameters():
            p.requires_grad_(flag)


def _check_batches(batch_a: torch.Tensor, batch_b: torch.Tensor) -> None:
    for name, batch in (("A", batch_a), ("B", batch_b)):
        if batch.ndim != 4 or batch.shape[1] != 3:
            raise ShapeError(f"domain {name} batch must be Nx3xHxW, got {tuple(batch.shape)}")
        if batch.shape[0] == 0:
            raise ShapeError(f"domain {name} batch is empty")


def generator_losses(state: TrainState, a: torch.Tensor, b: torch.Tensor):
    """Forward both cycles; returns (loss parts, weighted total, fake_a, fake_b)."""
    w = state.config.weights
    fake_b = state.G_AB(a)
    rec_a = state.G_BA(fake_b)
    fake_a = state.G_BA(b)
    rec_b = state.G_AB(fake_a)
    if w.lambda_idt > 0:
        idt = identity_loss(a, state.G_BA(a), b, state.G_AB(b))
    else:
        idt = torch.zeros((), dtype=a.dtype)
    parts = GeneratorLossParts(
        adv_ab=lsgan_generator_loss(state.D_B(fake_b)),
        adv_ba=lsgan_generator_loss(state.D_A(fake_a)),
        cycle=cycle_loss(a, rec_a, b, rec_b),
        identity=idt,
    )
    return parts, total_generator_objective(parts, w), fake_a, fake_b


def generator_objective(state: TrainState, a: torch.Tensor, b: torch.Tensor) -> float:
    """Evaluate the total generator objective without touching any state."""
    with torch.no_grad():
        return float(generator_losses(state, a, b)[1])


def generator_step(state: TrainState, a: torch.Tensor, b: torch.Tensor):
    _set_requires_grad((state.D_A, state.D_B), False)
    try:
        state.opt_G.zero_grad(set_to_none=True)
        parts, total, fake_a, fake_b = generator_losses(state, a, b)
        if not torch.isfinite(total):
            raise NumericError(f"non-finite generator objective at step {state.step}")
        total.backward()
        state.opt_G.step()
    finally:
        _set_requires_grad((state.D_A, state.D_B), True)
    return parts, total, fake_a.detach(), fake_b.detach()


def _discriminator_update(disc, opt, real, fake, name: str, step: int) -> float:
    opt.zero_grad(set_to_none=True)
    loss = lsgan_discriminator_loss(disc(real), disc(fake))
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite {name} loss at step {step}")
    loss.backward()
    opt.step()
    return loss.item()


def discriminator_step(state, a, b, fake_a, fake_b) -> tuple[float, float]:
    pooled_b = state.pool_B.query(fake_b)
    pooled_a = state.pool_A.query(fake_a)
    if pooled_a.shape != fake_a.shape or pooled_b.shape != fake_b.shape:
        raise ShapeError("image pool changed the batch shape")
    d_b = _discriminator_update(state.D_B, state.opt_D_B, b, pooled_b, "D_B", state.step)
    d_a = _discriminator_update(state.D_A, state.opt_D_A, a, pooled_a, "D_A", state.step)
    return d_a, d_b


def train_step(batch_a: torch.Tensor, batch_b: torch.Tensor, state: TrainState):
    """One generator update (discriminators frozen), then one update each for D_A and D_B."""
    _check_batches(batch_a, batch_b)
    dtype = state.config.torch_dtype
    a, b = batch_a.to(dtype), batch_b.to(dtype)
    parts, total, fake_a, fake_b = generator_step(state, a, b)
    d_a, d_b = discriminator_step(state, a, b, fake_a, fake_b)
    state.step += 1
    record = LossRecord(
        adv_ab=parts.adv_ab.item(),
        adv_ba=parts.adv_ba.item(),
        cycle=parts.cycle.item(),
        identity=parts.identity.item(),
        generator_total=total.item(),
        d_a=d_a,
        d_b=d_b,
    )
    return state, record


def lr_factor(epoch: int, epochs: int) -> float:
    """Constant for the first half of the epochs, then linear decay towards 0."""
    n_const = epochs // 2 if epochs > 1 else 1
    if epoch < n_const:
        return 1.0
    return 1.0 - (epoch - n_const + 1) / (epochs - n_const + 1)


# ---------------------------------------------------------------------------
# data


def load_domain(source) -> torch.Tensor:
    """Manifest, list of uint8 rasters, or NCHW tensor -> float64 NCHW in [-1, 1]."""
    if isinstance(source, torch.Tensor):
        return source.double()
    if isinstance(source, DatasetManifest):
        images = [load_image(r.path) for r in source.records]
    else:
        images = list(source)
    if not images:
        raise DataError("training domain is empty")
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise ShapeError(f"training images differ in shape: {sorted(shapes)}")
    stack = np.stack([normalize(img) for img in images])
    return torch.from_numpy(stack.transpose(0, 3, 1, 2).copy())


def epoch_batches(n_a: int, n_b: int, batch_size: int, seed: int, epoch: int):
    """Index batches for one epoch; both domains are shuffled independently."""
    rng = np.random.default_rng([seed, epoch])
    perm_a, perm_b = rng.permutation(n_a), rng.permutation(n_b)
    n_steps = math.ceil(max(n_a, n_b) / batch_size)
    for s in range(n_steps):
        idx = np.arange(s * batch_size, (s + 1) * batch_size)
        yield perm_a[idx % n_a], perm_b[idx % n_b]


def run_epoch(state: TrainState, data_a: torch.Tensor, data_b: torch.Tensor,
              max_steps: int | None = None) -> list[LossRecord]:
    cfg = state.config
    state.set_lr(cfg.lr * lr_factor(state.epoch, cfg.epochs))
    records = []
    for i, (ia, ib) in enumerate(epoch_batches(len(data_a), len(data_b), cfg.batch_size, cfg.seed, state.epoch)):
        if max_steps is not None and i >= max_steps:
            break
        _, rec = train_step(data_a[ia], data_b[ib], state)
        records.append(rec)
    return records


def _mean_record(records: Sequence[LossRecord]) -> dict:
    keys = records[0].as_dict().keys()
    return {k: float(np.mean([r.as_dict()[k] for r in records])) for k in keys}


# ---------------------------------------------------------------------------
# checkpoints


def checkpoint_dir(out_dir: str | Path, epoch: int) -> Path:
    return Path(out_dir) / f"epoch_{epoch:04d}"


def save_checkpoint(state: TrainState, out_dir: str | Path, loss_means: dict) -> Path:
    path = checkpoint_dir(out_dir, state.epoch)
    try:
        path.mkdir(parents=True, exist_ok=True)
        for name, module in state.networks().items():
            torch.save(module.state_dict(), path / f"{name}.pt")
        state.save(path / "train_state.pt")
        manifest = {
            "epoch": state.epoch,
            "config_hash": state.config.hash,
            "seed": state.config.seed,
            "loss_means": loss_means,
            "config": state.config.to_json(),
        }
        (path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write checkpoint {path}: {exc}") from exc
    return path


def read_checkpoint_manifest(path: str | Path) -> dict:
    path = Path(path)
    try:
        return json.loads((path / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint manifest in {path}: {exc}") from exc


def load_generator(path: str | Path, direction: str = "AB",
                   expected: TrainConfig | None = None) -> ResnetGenerator:
    path = Path(path)
    meta = read_checkpoint_manifest(path)
    config = TrainConfig.from_json(meta["config"])
    if config.hash != meta.get("config_hash"):
        raise ConfigError(f"checkpoint {path}: stored config does not match its config_hash")
    if expected is not None and expected.generator != config.generator:
        raise ConfigError(
            f"checkpoint {path} was trained with generator {config.generator}, "
            f"expected {expected.generator}"
        )
    model = ResnetGenerator(config.generator).to(config.torch_dtype)
    try:
        weights = torch.load(path / f"G_{direction}.pt", map_location="cpu")
        model.load_state_dict(weights)
    except OSError as exc:
        raise DataError(f"cannot read generator weights in {path}: {exc}") from exc
    except RuntimeError as exc:
        raise ConfigError(f"checkpoint {path} does not match its generator config: {exc}") from exc
    return model.eval()


def latest_checkpoint(out_dir: str | Path) -> Path | None:
    found = sorted(Path(out_dir).glob("epoch_*/manifest.json"))
    return found[-1].parent if found else None


def fit(
    domain_a,
    domain_b,
    config: TrainConfig,
    out_dir: str | Path,
    resume: str | Path | None = None,
    stop_after: int | None = None,
    progress: Callable[[int, dict], None] | None = None,
) -> list[Path]:
    """Train for ``config.epochs`` epochs, writing one checkpoint per epoch.

    ``resume`` points at a checkpoint directory; training continues with the
    next epoch. ``stop_after`` ends the run early after that many epochs
    (counted from the start of the schedule) without altering the schedule.
    """
    data_a, data_b = load_domain(domain_a), load_domain(domain_b)
    if data_a.shape[1:] != data_b.shape[1:]:
        raise ShapeError(f"domains differ in image shape: {tuple(data_a.shape[1:])} vs {tuple(data_b.shape[1:])}")
    data_a, data_b = data_a.to(config.torch_dtype), data_b.to(config.torch_dtype)

    if resume is not None:
        state = TrainState.load(Path(resume) / "train_state.pt")
        if state.config.hash != config.hash:
            raise ConfigError(f"cannot resume from {resume}: config hash {state.config.hash} != {config.hash}")
    else:
        state = init_state(config)

    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create checkpoint directory {out_dir}: {exc}") from exc

    last = config.epochs if stop_after is None else min(config.epochs, stop_after)
    paths = []
    while state.epoch < last:
        records = run_epoch(state, data_a, data_b)
        means = _mean_record(records)
        state.epoch += 1
        state.history.append({"epoch": state.epoch, **means})
        paths.append(save_checkpoint(state, out_dir, means))
        log.info("epoch %d/%d %s", state.epoch, config.epochs, means)
        if progress is not None:
            progress(state.epoch, means)
    return paths
