"""Training loops for the demosaicking, denoising and joint networks."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classical
from .cfa import BayerPattern, NoiseSpec, add_noise, mosaic
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import Network
from .nn.optim import Adam, he_init
from .nn.specs import NetworkSpec
from .pipeline import (
    SCALE,
    DemosaicObjective,
    DemosaicStage,
    DenoiseObjective,
    DenoiseStage,
    JointStage,
    batch_masks,
    half_mse,
    half_mse_grad,
)

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, msg, checkpoint=None):
        super().__init__(msg)
        self.checkpoint = checkpoint


@dataclass
class TrainConfig:
    patch_size: int = 128
    batch: int = 64
    lr0: float = 1e-2
    decay_rate: float = 0.9
    decay_every: int = 3000
    epochs: int = 70
    augment: bool = True
    seed: int = 0
    n_blocks: int = 16
    block: str = "inception"
    preprocess: str = "gbtf"
    pattern: str = "RGGB"
    patches_per_image: int = 1
    max_iters: int | None = None
    # stop once the batch loss falls below stop_ratio * first-iteration loss
    stop_ratio: float | None = None
    val_fraction: float = 0.05
    dtype: str = "float32"
    checkpoint_dir: str | None = None
    # "he" everywhere, or "zero" for the tail conv so training starts at x_pre
    tail_init: str = "he"

    def __post_init__(self):
        if self.patch_size % 2 or self.patch_size < 2:
            raise ValueError("patch_size must be even and >= 2")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.tail_init not in ("he", "zero"):
            raise ValueError(f"tail_init must be 'he' or 'zero', got {self.tail_init!r}")

    def replace(self, **kw) -> "TrainConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_file(cls, path, **overrides) -> "TrainConfig":
        """Flat ``key = value`` text; ``#`` starts a comment.  Overrides win."""
        values = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: expected key = value, got {raw!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            values[k.replace("-", "_")] = v
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values: dict) -> "TrainConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kw = {}
        for k, v in values.items():
            if k not in fields:
                raise ValueError(f"unknown config key {k!r}")
            kw[k] = _coerce(fields[k].type, v)
        return cls(**kw)


def _coerce(typ: str, v):
    if not isinstance(v, str):
        return v
    if v.lower() in ("none", "null", ""):
        return None
    base = typ.split("|")[0].strip()
    if base == "bool":
        if v.lower() in ("1", "true", "yes", "on"):
            return True
        if v.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {v!r}")
    if base == "int":
        return int(v)
    if base == "float":
        return float(v)
    return v


def augment(x: np.ndarray, rng: np.random.Generator):
    """Independent Bernoulli(0.5) horizontal flip and 180-degree rotation."""
    flip = bool(rng.random() < 0.5)
    rot = bool(rng.random() < 0.5)
    if flip:
        x = x[:, :, ::-1]
    if rot:
        x = x[:, ::-1, ::-1]
    return np.ascontiguousarray(x), flip, rot


class PatchSampler:
    """Fixed list of Bayer-phase-aligned crops, reshuffled every epoch."""

    def __init__(self, images, patch_size: int, patches_per_image: int = 1,
                 rng: np.random.Generator | None = None):
        self.images = [np.asarray(im, dtype=np.float64) for im in images]
        self.patch_size = patch_size
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.crops = []
        for k, im in enumerate(self.images):
            h, w = im.shape[1:]
            if h < patch_size or w < patch_size:
                raise ValueError(f"image {k} ({h}x{w}) smaller than patch size {patch_size}")
            for _ in range(patches_per_image):
                top = 2 * int(self.rng.integers(0, (h - patch_size) // 2 + 1))
                left = 2 * int(self.rng.integers(0, (w - patch_size) // 2 + 1))
                self.crops.append((k, top, left))
        self.n_drawn = 0
        self.n_flipped = 0
        self.n_rotated = 0

    def __len__(self) -> int:
        return len(self.crops)

    def patch(self, i: int) -> np.ndarray:
        k, top, left = self.crops[i]
        p = self.patch_size
        return self.images[k][:, top:top + p, left:left + p]

    def draw(self, i: int, do_augment: bool) -> np.ndarray:
        x = self.patch(i)
        self.n_drawn += 1
        if do_augment:
            x, flip, rot = augment(x, self.rng)
            self.n_flipped += flip
            self.n_rotated += rot
        return np.array(x)

    def epoch(self, batch: int, do_augment: bool = True):
        order = self.rng.permutation(len(self.crops))
        for s in range(0, len(order), batch):
            yield np.stack([self.draw(i, do_augment) for i in order[s:s + batch]])


def split_validation(images: list, fraction: float, seed: int):
    """Hold out ``floor(fraction * n)`` images chosen by ``seed``."""
    n_val = int(math.floor(fraction * len(images)))
    if n_val == 0:
        return list(images), []
    idx = np.random.default_rng([seed, 5]).permutation(len(images))
    val = set(idx[:n_val].tolist())
    train = [im for i, im in enumerate(images) if i not in val]
    return train, [images[i] for i in sorted(val)]


def _new_net(cfg: TrainConfig, n_blocks: int | None = None, seed_offset: int = 0) -> Network:
    spec = NetworkSpec(cfg.block, cfg.n_blocks if n_blocks is None else n_blocks)
    net = he_init(Network(spec, dtype=cfg.dtype), cfg.seed + seed_offset)
    if cfg.tail_init == "zero":
        net.tail.weight.value[...] = 0
    return net


def _preprocess_batch(batch: np.ndarray, cfg: TrainConfig, sigma: float,
                      noise_rng: np.random.Generator | None):
    """Mosaic (+ noise) and classical demosaick each patch of a batch."""
    pattern = BayerPattern.parse(cfg.pattern)
    pre, retained = [], []
    for x in batch:
        y = mosaic(x, pattern)
        if sigma > 0:
            y = add_noise(y, NoiseSpec(sigma, int(noise_rng.integers(2 ** 63))))
        pre.append(classical.demosaic(y, cfg.preprocess))
        retained.append(y.embed())
    return np.stack(pre), np.stack(retained)


def demosaic_batch(dm: DemosaicStage, x_pre: np.ndarray, retained: np.ndarray) -> np.ndarray:
    """Stage 1 inference on a preprocessed batch (eval mode, no caches)."""
    net = dm.require()
    net.eval()
    res = net.infer(x_pre.astype(net.dtype) / SCALE).astype(np.float64) * SCALE
    m = batch_masks(dm.pattern, *x_pre.shape[:1], *x_pre.shape[2:])
    return np.where(m > 0.5, retained, x_pre + res)


def write_trace(path, trace) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "lr", "loss"])
        for it, lr, loss in trace:
            w.writerow([it, repr(lr), repr(loss)])
    return path


def _loop(kind: str, net: Network, sampler: PatchSampler, cfg: TrainConfig, make_batch,
          extra: dict) -> list[tuple[int, float, float]]:
    adam = Adam(net.parameters(), cfg.lr0, cfg.decay_rate, cfg.decay_every)
    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    meta = dict(extra, kind=kind, config=cfg.to_dict())
    trace = []
    first = None
    it = 0
    done = False
    for epoch in range(cfg.epochs):
        for batch in sampler.epoch(cfg.batch, cfg.augment):
            inputs, objective, target = make_batch(batch)
            net.train()
            adam.zero_grad()
            pred = objective.forward(inputs)
            loss = half_mse(pred, target)
            if not math.isfinite(loss):
                path = None
                if ckpt_dir is not None:
                    path = save_checkpoint(ckpt_dir / f"{kind}_diverged_it{it}.npz", net, adam,
                                           sampler.rng, dict(meta, iteration=it))
                    write_trace(ckpt_dir / f"{kind}_trace.csv", trace)
                raise TrainingDiverged(f"{kind}: non-finite loss at iteration {it}", path)
            objective.backward(half_mse_grad(pred, target))
            lr = adam.step()
            trace.append((it, lr, loss))
            first = loss if first is None else first
            it += 1
            if it % 50 == 0:
                log.info("%s it=%d lr=%.3g loss=%.6g", kind, it, lr, loss)
            if cfg.max_iters is not None and it >= cfg.max_iters:
                done = True
            if cfg.stop_ratio is not None and loss < cfg.stop_ratio * first:
                done = True
            if done:
                break
        if ckpt_dir is not None:
            save_checkpoint(ckpt_dir / f"{kind}_epoch{epoch + 1:03d}.npz", net, adam,
                            sampler.rng, dict(meta, epoch=epoch + 1, iteration=it))
            write_trace(ckpt_dir / f"{kind}_trace.csv", trace)
        if done:
            break
    net.eval()
    return trace


def _sampler(images, cfg: TrainConfig) -> PatchSampler:
    return PatchSampler(images, cfg.patch_size, cfg.patches_per_image,
                        np.random.default_rng([cfg.seed, 1]))


def train_demosaic(images, cfg: TrainConfig) -> DemosaicStage:
    """Noise-free training of the Stage 1 residual network."""
    if len(images) == 0:
        raise ValueError("need at least one training image")
    net = _new_net(cfg)
    sampler = _sampler(images, cfg)

    def make_batch(batch):
        x_pre, retained = _preprocess_batch(batch, cfg, 0.0, None)
        m = batch_masks(cfg.pattern, *x_pre.shape[:1], *x_pre.shape[2:])
        return x_pre, DemosaicObjective(net, m, retained), batch

    extra = {"preprocess": cfg.preprocess, "pattern": cfg.pattern}
    trace = _loop("dm", net, sampler, cfg, make_batch, extra)
    return DemosaicStage(net, cfg.preprocess, cfg.pattern, trace)


def train_denoise(images, sigma: float, dm: DemosaicStage, cfg: TrainConfig) -> DenoiseStage:
    """Train Stage 2 on the outputs of a frozen Stage 1 at noise level ``sigma``."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    dm.require()
    if len(images) == 0:
        raise ValueError("need at least one training image")
    net = _new_net(cfg, seed_offset=1)
    sampler = _sampler(images, cfg)
    noise_rng = np.random.default_rng([cfg.seed, 2])
    objective = DenoiseObjective(net)
    cfg_dm = cfg.replace(pattern=dm.pattern.value, preprocess=dm.preprocess.value)

    def make_batch(batch):
        x_pre, retained = _preprocess_batch(batch, cfg_dm, sigma, noise_rng)
        return demosaic_batch(dm, x_pre, retained), objective, batch

    trace = _loop("dn", net, sampler, cfg, make_batch, {"sigma_tag": sigma})
    return DenoiseStage(net, sigma, trace)


def train_joint_ablation(images, sigma: float, cfg: TrainConfig,
                         n_blocks: int | None = None) -> JointStage:
    """One network on noisy input, twice the body depth by default.

    Noisy CFA samples are *not* retained: the single network has to denoise
    every pixel, so the output is the plain residual ``x_pre + F(x_pre)``.
    """
    if len(images) == 0:
        raise ValueError("need at least one training image")
    net = _new_net(cfg, n_blocks=2 * cfg.n_blocks if n_blocks is None else n_blocks,
                   seed_offset=2)
    sampler = _sampler(images, cfg)
    noise_rng = np.random.default_rng([cfg.seed, 2])

    def make_batch(batch):
        x_pre, retained = _preprocess_batch(batch, cfg, sigma, noise_rng)
        m = batch_masks(cfg.pattern, *x_pre.shape[:1], *x_pre.shape[2:])
        return x_pre, DemosaicObjective(net, m, retained, retain=False), batch

    extra = {"sigma_tag": sigma, "preprocess": cfg.preprocess, "pattern": cfg.pattern}
    trace = _loop("joint", net, sampler, cfg, make_batch, extra)
    return JointStage(net, sigma, cfg.preprocess, trace)


def save_stage(path, stage) -> Path:
    if isinstance(stage, DemosaicStage):
        extra = {"kind": "dm", "preprocess": stage.preprocess.value, "pattern": stage.pattern.value}
    elif isinstance(stage, DenoiseStage):
        extra = {"kind": "dn", "sigma_tag": stage.sigma_tag}
    elif isinstance(stage, JointStage):
        extra = {"kind": "joint", "sigma_tag": stage.sigma_tag, "preprocess": stage.preprocess.value}
    else:
        raise TypeError(f"not a stage: {stage!r}")
    return save_checkpoint(path, stage.require(), extra=extra)


def load_stage(path):
    """Rebuild a stage from a checkpoint written by training or :func:`save_stage`."""
    ck = load_checkpoint(path)
    extra = ck.extra
    kind = extra.get("kind")
    ck.net.eval()
    if kind == "dm":
        return DemosaicStage(ck.net, extra.get("preprocess", "gbtf"), extra.get("pattern", "RGGB"))
    if kind == "dn":
        return DenoiseStage(ck.net, float(extra["sigma_tag"]))
    if kind == "joint":
        return JointStage(ck.net, float(extra["sigma_tag"]), extra.get("preprocess", "gbtf"))
    raise ValueError(f"{path}: checkpoint does not describe a stage (kind={kind!r})")
