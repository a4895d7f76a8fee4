"""Dataset sampling, Adam optimization and the epoch training loop.

Each epoch draws a fresh noise realization per clip (seeded by the tuple
(seed, epoch, clip index)), precomputes the patch search once on the noisy
clips, and then samples random feature crops with aligned noise-residual
targets.  Crops are drawn uniformly over eligible (clip, frame, position)
triples; eligible means the full search window fits, so the first and last
w_t/2 frames and a w_s/2 spatial margin are excluded.

Everything is deterministic given the config seed: noise, crop sampling and
network initialization all derive their streams from it with distinct tags.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import gather_features
from .metrics import psnr
from .network import (
    Network,
    NetworkConfig,
    loss_mse,
    loss_mse_grad,
)
from .noise import NoiseSpec
from .pipeline import denoise_sequence
from .search import SearchConfig, search_fast
from .video import Video

__all__ = [
    "TrainConfig",
    "AdamState",
    "adam_step",
    "lr_for_epoch",
    "make_epoch_dataset",
    "EpochData",
    "train",
    "TrainingDiverged",
    "TrainLogRow",
]

# stream tags; clip indices stay far below these
_SAMPLE_TAG = 1 << 40
_INIT_TAG = (1 << 40) + 1
_VAL_TAG = (1 << 40) + 2


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    noise: NoiseSpec
    search: SearchConfig
    network: NetworkConfig
    crop_size: int = 44
    batch_size: int = 128
    batches_per_epoch: int = 14000
    epochs: int = 20
    lr_schedule: tuple[tuple[int, float], ...] = ((0, 1e-3), (12, 1e-4), (17, 1e-6))
    seed: int = 0

    def __post_init__(self):
        if self.crop_size < 1 or self.batch_size < 1:
            raise ValueError("crop_size and batch_size must be >= 1")
        if self.batches_per_epoch < 1 or self.epochs < 1:
            raise ValueError("batches_per_epoch and epochs must be >= 1")
        sched = tuple(self.lr_schedule)
        if not sched or sched[0][0] != 0:
            raise ValueError("lr_schedule must start with an entry for epoch 0")
        if any(b[0] <= a[0] for a, b in zip(sched, sched[1:])):
            raise ValueError("lr_schedule epochs must be strictly increasing")
        expected = self.search.num_neighbors * self.network.out_channels
        if not self.network.no_patch and self.network.in_channels != expected:
            raise ValueError(
                f"network in_channels {self.network.in_channels} != "
                f"num_neighbors * channels = {expected}"
            )


def lr_for_epoch(schedule, epoch: int) -> float:
    rate = None
    for start, value in schedule:
        if epoch >= start:
            rate = value
    if rate is None:
        raise ValueError(f"no schedule entry covers epoch {epoch}")
    return rate


@dataclass
class AdamState:
    """First/second moment estimates per parameter, plus the step count."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in params.items()},
            v={k: np.zeros_like(a) for k, a in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    rate: float,
) -> AdamState:
    """Bias-corrected Adam update, in place on the parameter arrays."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        params[name] -= rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


@dataclass
class _ClipSamples:
    features: np.ndarray  # (F, n*C, H, W)
    targets: np.ndarray  # (F, C, H, W) noise residual
    y_lo: int
    x_lo: int
    ny: int
    nx: int


@dataclass
class EpochData:
    """Per-clip feature/target tensors and the crop-position bookkeeping."""

    clips: list[_ClipSamples]
    crop_size: int
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.counts = np.array(
            [c.features.shape[0] * c.ny * c.nx for c in self.clips], dtype=np.int64
        )

    def sample_batch(self, rng: np.random.Generator, batch_size: int):
        total = int(self.counts.sum())
        cum = np.cumsum(self.counts)
        draws = rng.integers(0, total, size=batch_size)
        cs = self.crop_size
        xs, ys = [], []
        for r in draws:
            ci = int(np.searchsorted(cum, r, side="right"))
            clip = self.clips[ci]
            rem = int(r) - (int(cum[ci - 1]) if ci else 0)
            per_frame = clip.ny * clip.nx
            f = rem // per_frame
            rem -= f * per_frame
            y0 = clip.y_lo + rem // clip.nx
            x0 = clip.x_lo + rem % clip.nx
            xs.append(clip.features[f, :, y0 : y0 + cs, x0 : x0 + cs])
            ys.append(clip.targets[f, :, y0 : y0 + cs, x0 : x0 + cs])
        return np.stack(xs), np.stack(ys)


def make_epoch_dataset(
    clean_videos: list[Video], cfg: TrainConfig, epoch: int
) -> EpochData:
    """Fresh noise + one search pass per clip; crops are sampled later."""
    search = cfg.search
    hwt = search.temporal_window // 2
    hws = search.spatial_window // 2
    cs = cfg.crop_size
    clips = []
    for vid_i, u in enumerate(clean_videos):
        frames = np.arange(hwt, u.frames - hwt)
        ny = u.rows - 2 * hws - cs + 1
        nx = u.cols - 2 * hws - cs + 1
        if frames.size == 0 or ny < 1 or nx < 1:
            raise ValueError(
                f"clip {vid_i} ({u!r}) leaves no valid {cs}x{cs} crops for "
                f"search window {search.spatial_window}x{search.spatial_window}"
                f"x{search.temporal_window}"
            )
        noisy = cfg.noise.apply(u, seed=(cfg.seed, epoch, vid_i))
        residual = noisy.data[frames] - u.data[frames]
        if cfg.network.no_patch:
            feats = noisy.data[frames]
        else:
            table = search_fast(noisy, search, frames=frames)
            feats = gather_features(noisy, table).data
        clips.append(
            _ClipSamples(
                features=feats,
                targets=residual,
                y_lo=hws,
                x_lo=hws,
                ny=ny,
                nx=nx,
            )
        )
    return EpochData(clips=clips, crop_size=cs)


@dataclass
class TrainLogRow:
    epoch: int
    lr: float
    train_loss: float
    val_psnr: float


def _validate(net: Network, cfg: TrainConfig, val_videos: list[Video]) -> float:
    """Mean PSNR of denoised central frames; validation noise is fixed per clip."""
    scores = []
    for vid_i, u in enumerate(val_videos):
        noisy = cfg.noise.apply(u, seed=(cfg.seed, _VAL_TAG, vid_i))
        center = u.frames // 2
        den = denoise_sequence(noisy, net, cfg.search, frames=[center])
        scores.append(psnr(u.data[center], den.data[0]))
    return float(np.mean(scores))


def train(
    clean_videos: list[Video],
    cfg: TrainConfig,
    val_videos: list[Video] | None = None,
    progress=None,
):
    """Run the epoch loop; returns (net, list of TrainLogRow)."""
    net = Network(cfg.network, seed=np.random.SeedSequence((cfg.seed, _INIT_TAG)))
    state = AdamState.for_params(
        {k: v for k, v in net.named_params().items() if k in net.trainable_names()}
    )
    log: list[TrainLogRow] = []
    for epoch in range(cfg.epochs):
        rate = lr_for_epoch(cfg.lr_schedule, epoch)
        data = make_epoch_dataset(clean_videos, cfg, epoch)
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence((cfg.seed, epoch, _SAMPLE_TAG)))
        )
        losses = np.empty(cfg.batches_per_epoch)
        params = {k: net.named_params()[k] for k in net.trainable_names()}
        for b in range(cfg.batches_per_epoch):
            x, y = data.sample_batch(rng, cfg.batch_size)
            residual = net.forward(x, training=True)
            loss = loss_mse(residual, y)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} batch {b} (lr {rate:g})"
                )
            losses[b] = loss
            net.backward(loss_mse_grad(residual, y).astype(net.dtype))
            grads = {k: net.named_grads()[k] for k in net.trainable_names()}
            adam_step(params, grads, state, rate)
        val = _validate(net, cfg, val_videos) if val_videos else float("nan")
        row = TrainLogRow(epoch=epoch, lr=rate, train_loss=float(losses.mean()), val_psnr=val)
        log.append(row)
        if progress is not None:
            progress(row)
    return net, log


def log_to_csv(log: list[TrainLogRow]) -> str:
    lines = ["epoch,lr,train_loss,val_psnr"]
    for row in log:
        lines.append(f"{row.epoch},{row.lr!r},{row.train_loss!r},{row.val_psnr!r}")
    return "\n".join(lines) + "\n"
