"""Desk-scale noise-prediction network, its training loop and checkpoints.

The network is a three-level convolutional encoder-decoder with skip
connections. A sinusoidal embedding of the timestep is projected and added
to the feature maps at every level.
"""

import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .diffusion import make_schedule

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"PFADCKPT"
CHECKPOINT_VERSION = 1


def timestep_embedding(t, dim):
    """Sinusoidal embedding of integer timesteps, shape (len(t), dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half)
    args = t.float()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1)


class ConvBlock(nn.Module):
    def __init__(self, c_in, c_out, time_dim):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.norm1 = nn.GroupNorm(min(8, c_out), c_out)
        self.norm2 = nn.GroupNorm(min(8, c_out), c_out)
        self.time = nn.Linear(time_dim, c_out)

    def forward(self, x, emb):
        h = F.silu(self.norm1(self.conv1(x)))
        h = h + self.time(emb)[:, :, None, None]
        return F.silu(self.norm2(self.conv2(h)))


class ToyUNet(nn.Module):
    def __init__(self, base_channels=16, time_dim=64):
        super().__init__()
        c1, c2, c3 = base_channels, 2 * base_channels, 4 * base_channels
        self.base_channels = base_channels
        self.time_dim = time_dim
        self.time_mlp = nn.Sequential(
            nn.Linear(time_dim, time_dim), nn.SiLU(), nn.Linear(time_dim, time_dim))
        self.enc1 = ConvBlock(1, c1, time_dim)
        self.enc2 = ConvBlock(c1, c2, time_dim)
        self.mid = ConvBlock(c2, c3, time_dim)
        self.up2 = nn.Conv2d(c3, c2, 3, padding=1)
        self.dec2 = ConvBlock(2 * c2, c2, time_dim)
        self.up1 = nn.Conv2d(c2, c1, 3, padding=1)
        self.dec1 = ConvBlock(2 * c1, c1, time_dim)
        self.out = nn.Conv2d(c1, 1, 1)

    def forward(self, x, t):
        emb = self.time_mlp(timestep_embedding(t, self.time_dim))
        h1 = self.enc1(x, emb)
        h2 = self.enc2(F.avg_pool2d(h1, 2), emb)
        h3 = self.mid(F.avg_pool2d(h2, 2), emb)
        u2 = self.up2(F.interpolate(h3, scale_factor=2, mode="nearest"))
        d2 = self.dec2(torch.cat([u2, h2], dim=1), emb)
        u1 = self.up1(F.interpolate(d2, scale_factor=2, mode="nearest"))
        d1 = self.dec1(torch.cat([u1, h1], dim=1), emb)
        return self.out(d1)


class ToyDenoiser:
    """Numpy-facing wrapper implementing the denoiser call contract.

    Accepts ``(H, W)`` or ``(N, H, W)`` float arrays. H and W must be
    divisible by 4. Inference runs under ``torch.no_grad`` and never mutates
    the weights, so one instance can be shared between threads.
    """

    def __init__(self, model, schedule):
        self.model = model.eval()
        self.schedule = schedule

    def __call__(self, x_t, t):
        x = np.asarray(x_t, dtype=np.float32)
        squeeze = x.ndim == 2
        batch = torch.from_numpy(np.ascontiguousarray(x.reshape(-1, 1, *x.shape[-2:])))
        steps = torch.full((batch.shape[0],), int(t), dtype=torch.long)
        with torch.no_grad():
            out = self.model(batch, steps).numpy().astype(np.float64)
        return out[:, 0] if not squeeze else out[0, 0]

    def num_parameters(self):
        return sum(p.numel() for p in self.model.parameters())

    def save(self, path):
        save_checkpoint(path, self.model, self.schedule)

    @classmethod
    def load(cls, path):
        model, schedule = load_checkpoint(path)
        return cls(model, schedule)


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 4
    lr: float = 1e-4
    seed: int = 0
    base_channels: int = 16
    time_dim: int = 64
    holdout_fraction: float = 0.1
    holdout_draws: int = 4
    log_every: int = 0


@dataclass
class TrainResult:
    denoiser: ToyDenoiser
    initial_loss: float
    final_loss: float
    history: list = field(default_factory=list)


class TrainingDivergedError(RuntimeError):
    pass


def _noisy_batch(schedule, x0, gen):
    t = torch.randint(1, schedule.T + 1, (x0.shape[0],), generator=gen)
    abar = torch.tensor(np.array(schedule.alpha_bar), dtype=torch.float32)[t - 1][:, None, None, None]
    eps = torch.randn(x0.shape, generator=gen)
    return abar.sqrt() * x0 + (1 - abar).sqrt() * eps, t, eps


def _heldout_loss(model, schedule, data, draws, seed):
    gen = torch.Generator().manual_seed(seed)
    total = 0.0
    with torch.no_grad():
        for _ in range(draws):
            x_t, t, eps = _noisy_batch(schedule, data, gen)
            total += F.mse_loss(model(x_t, t), eps).item()
    return total / draws


def train_toy_denoiser(corpus, schedule, config=None):
    """Fit a :class:`ToyUNet` to ``corpus`` with the epsilon-prediction loss.

    The held-out split is scored with a fixed set of (t, noise) draws so
    ``initial_loss`` and ``final_loss`` are directly comparable.
    """
    config = config or TrainConfig()
    corpus = np.asarray(corpus, dtype=np.float32)
    if corpus.ndim != 3 or corpus.shape[0] == 0:
        raise ValueError("corpus must be a non-empty stack of equally sized images")
    if config.steps <= 0:
        raise ValueError("training budget (steps) must be positive")

    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    order = np.random.default_rng(config.seed).permutation(len(corpus))
    n_hold = max(1, int(round(config.holdout_fraction * len(corpus)))) if len(corpus) > 1 else 0
    hold_idx, train_idx = order[:n_hold], order[n_hold:]
    data = torch.from_numpy(corpus[:, None])
    train = data[train_idx]
    heldout = data[hold_idx] if n_hold else data

    model = ToyUNet(config.base_channels, config.time_dim)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    eval_seed = config.seed + 1
    initial = _heldout_loss(model, schedule, heldout, config.holdout_draws, eval_seed)
    history = [(0, initial)]

    model.train()
    for step in range(1, config.steps + 1):
        idx = torch.randint(0, train.shape[0], (config.batch_size,), generator=gen)
        x_t, t, eps = _noisy_batch(schedule, train[idx], gen)
        loss = F.mse_loss(model(x_t, t), eps)
        if not torch.isfinite(loss):
            raise TrainingDivergedError(f"loss became {loss.item()} at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        if config.log_every and step % config.log_every == 0:
            held = _heldout_loss(model, schedule, heldout, config.holdout_draws, eval_seed)
            history.append((step, held))
            log.info("step %d train %.4f heldout %.4f", step, loss.item(), held)

    model.eval()
    final = _heldout_loss(model, schedule, heldout, config.holdout_draws, eval_seed)
    history.append((config.steps, final))
    return TrainResult(ToyDenoiser(model, schedule), initial, final, history)


def save_checkpoint(path, model, schedule):
    """Write ``model`` weights and the schedule parameters.

    Layout (little-endian): magic, u32 version, u32 T, f64 beta_start,
    f64 beta_end, u32 base_channels, u32 time_dim, u32 tensor count, per
    tensor u32 ndim followed by its dims, u64 total weight count, then all
    weights as float32 in ``state_dict`` order.
    """
    tensors = [v.detach().cpu().float().contiguous() for v in model.state_dict().values()]
    out = bytearray(CHECKPOINT_MAGIC)
    out += struct.pack("<I", CHECKPOINT_VERSION)
    out += struct.pack("<Idd", schedule.T, schedule.beta_start, schedule.beta_end)
    out += struct.pack("<II", model.base_channels, model.time_dim)
    out += struct.pack("<I", len(tensors))
    for v in tensors:
        out += struct.pack("<I", v.ndim) + struct.pack(f"<{v.ndim}I", *v.shape)
    total = sum(v.numel() for v in tensors)
    out += struct.pack("<Q", total)
    for v in tensors:
        out += v.numpy().astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(out))


class CheckpointError(ValueError):
    pass


def load_checkpoint(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    off = 8
    (version,) = struct.unpack_from("<I", buf, off)
    off += 4
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    T, beta_start, beta_end = struct.unpack_from("<Idd", buf, off)
    off += struct.calcsize("<Idd")
    base_channels, time_dim = struct.unpack_from("<II", buf, off)
    off += 8
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    shapes = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", buf, off)
        off += 4
        shapes.append(struct.unpack_from(f"<{ndim}I", buf, off))
        off += 4 * ndim
    (total,) = struct.unpack_from("<Q", buf, off)
    off += 8
    if total != sum(int(np.prod(s)) for s in shapes):
        raise CheckpointError(f"{path}: weight count does not match layer table")
    if len(buf) - off != 4 * total:
        raise CheckpointError(f"{path}: expected {total} weights, found {(len(buf) - off) // 4}")

    model = ToyUNet(base_channels, time_dim)
    state = model.state_dict()
    if [tuple(v.shape) for v in state.values()] != [tuple(s) for s in shapes]:
        raise CheckpointError(f"{path}: layer table does not match the network layout")
    flat = np.frombuffer(buf, dtype="<f4", offset=off, count=total)
    pos = 0
    for key, shape in zip(state, shapes):
        n = int(np.prod(shape))
        state[key] = torch.from_numpy(flat[pos:pos + n].astype(np.float32).reshape(shape))
        pos += n
    model.load_state_dict(state)
    return model.eval(), make_schedule(T, beta_start, beta_end)
