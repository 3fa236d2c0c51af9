"""Pixel-frequency guided reverse diffusion for motion artifact removal.

At every reverse step the sampler's proposal is reorganised twice:

* in k-space, the low band of the corrupted input is copied verbatim and the
  high band is a mask-weighted blend of input and proposal, then brought back
  to pixels through the modulus of the inverse transform;
* in pixels, the proposal is blended with a forward-noised copy of the input
  under the same mask.

The two results are mixed with a weight that drifts from ``1 - a/e`` at the
start of sampling towards ``1 - a`` at the end. The binary checkerboard flips
parity on every step and is scaled by ``1 - sqrt(abar_t)`` so guidance from
the corrupted image fades as sampling proceeds.
"""

from dataclasses import dataclass, field

import numpy as np

from .diffusion import forward_sample, reverse_step
from .kspace import apply_filter, clamp, dft2, idft2, magnitude, make_filter_pair
from .metrics import psnr

MASK_MODES = ("alternate", "none", "full")


@dataclass(frozen=True)
class PurifyConfig:
    """Knobs of the purification loop.

    ``gamma_override`` pins the dual-domain weight (1.0 keeps only the
    frequency branch, 0.0 only the pixel branch). ``mask_mode`` selects the
    alternating checkerboard, no guidance mask (all zeros) or full guidance
    (all ones). ``weight_freq``/``weight_pixel`` toggle the ``1 - sqrt(abar)``
    factor separately per branch.
    """

    T: int = 1000
    a: float = 0.7
    cutoff: float = np.pi / 10
    grid_size: int = 16
    phase_axis: int = 0
    seed: int = 0
    gamma_override: float | None = None
    mask_mode: str = "alternate"
    weight_freq: bool = True
    weight_pixel: bool = True
    trace: bool = False

    def __post_init__(self):
        if not (0.0 <= self.a <= 1.0):
            raise ValueError(f"a must lie in [0, 1], got {self.a}")
        if not (0.0 < self.cutoff < np.pi):
            raise ValueError(f"cutoff must lie in (0, pi), got {self.cutoff}")
        if self.grid_size < 1:
            raise ValueError("grid_size must be >= 1")
        if self.mask_mode not in MASK_MODES:
            raise ValueError(f"mask_mode must be one of {MASK_MODES}")
        if self.gamma_override is not None and not (0.0 <= self.gamma_override <= 1.0):
            raise ValueError("gamma_override must lie in [0, 1]")

    def validate_for(self, shape):
        if self.grid_size > min(shape[-2:]):
            raise ValueError(f"grid_size {self.grid_size} exceeds image size {shape[-2:]}")


@dataclass
class StepRecord:
    t: int
    omega: float
    gamma: float
    psnr: float | None = None


@dataclass
class PurifyTrace:
    records: list = field(default_factory=list)

    def to_tsv(self):
        lines = ["t\tomega\tgamma\tpsnr"]
        for r in self.records:
            p = "" if r.psnr is None else f"{r.psnr:.6f}"
            lines.append(f"{r.t}\t{r.omega:.9f}\t{r.gamma:.9f}\t{p}")
        return "\n".join(lines) + "\n"


class NonFiniteLatentError(FloatingPointError):
    def __init__(self, step):
        super().__init__(f"non-finite latent produced at step {step}")
        self.step = step


def checkerboard(height, width, grid_size, parity=0):
    """Binary checkerboard: ``(r // g + c // g + parity)`` even means on."""
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    r = np.arange(height)[:, None] // grid_size
    c = np.arange(width)[None, :] // grid_size
    return ((r + c + parity) % 2 == 0).astype(np.float64)


def step_parity(t, T):
    """Parity used at step ``t``; the first step (t = T) uses 0."""
    return (T - t) % 2


def mask_weight(schedule, t):
    return 1.0 - np.sqrt(schedule.abar(t))


def gamma(t, T, a):
    return 1.0 - a * np.exp(-t / T)


def freq_reorganize(x_ori_kspace, x_gen, mask, filters):
    """Low band from the input, mask-blended high band, back to pixels."""
    low, high = filters
    f_gen = dft2(x_gen)
    if f_gen.shape[-2:] != x_ori_kspace.shape[-2:] or np.shape(mask)[-2:] != f_gen.shape[-2:]:
        raise ValueError("shape mismatch between input spectrum, proposal and mask")
    blended = (apply_filter(high, x_ori_kspace) * mask
               + apply_filter(high, f_gen) * (1.0 - mask)
               + apply_filter(low, x_ori_kspace))
    return magnitude(idft2(blended))


def pixel_reorganize(x_forward, x_gen, mask):
    if np.shape(x_forward) != np.shape(x_gen):
        raise ValueError("shape mismatch between forward sample and proposal")
    return x_forward * mask + x_gen * (1.0 - mask)


def _draw(rngs, shape):
    return np.stack([g.standard_normal(shape) for g in rngs])


def purify(x_ori, config, schedule, denoiser, reference=None, index_offset=0):
    """Run the guided reverse chain on one image or a stack of images.

    Image ``i`` of a stack draws its noise from ``default_rng([seed, i +
    index_offset])``, so results do not depend on how a corpus is batched.
    Returns ``(output, trace)`` for a single image and ``(outputs, traces)``
    for a stack; traces are ``None`` unless ``config.trace`` is set.
    """
    x_ori = np.asarray(x_ori, dtype=np.float64)
    single = x_ori.ndim == 2
    batch = x_ori[None] if single else x_ori
    if schedule.T != config.T:
        raise ValueError(f"config.T={config.T} but schedule has T={schedule.T}")
    config.validate_for(batch.shape)
    if reference is not None:
        reference = np.asarray(reference, dtype=np.float64).reshape(batch.shape)

    n, h, w = batch.shape
    rngs = [np.random.default_rng([config.seed, i + index_offset]) for i in range(n)]
    filters = make_filter_pair(config.cutoff, config.phase_axis)
    f_ori = dft2(batch)
    traces = [PurifyTrace() for _ in range(n)] if config.trace else None

    x = _draw(rngs, (h, w))
    T = config.T
    for t in range(T, 0, -1):
        x_gen = reverse_step(schedule, denoiser, x, t, _draw(rngs, (h, w)))

        omega = mask_weight(schedule, t)
        if config.mask_mode == "alternate":
            m = checkerboard(h, w, config.grid_size, step_parity(t, T))
        elif config.mask_mode == "none":
            m = np.zeros((h, w))
        else:
            m = np.ones((h, w))
        full = config.mask_mode == "full"
        mask_f = m * omega if config.weight_freq and not full else m
        mask_p = m * omega if config.weight_pixel and not full else m

        x_freq = freq_reorganize(f_ori, x_gen, mask_f, filters)
        x_for = forward_sample(schedule, batch, t, _draw(rngs, (h, w)))
        x_pix = pixel_reorganize(x_for, x_gen, mask_p)

        g = gamma(t, T, config.a) if config.gamma_override is None else config.gamma_override
        x = g * x_freq + (1.0 - g) * x_pix
        if not np.all(np.isfinite(x)):
            raise NonFiniteLatentError(t)

        if traces is not None:
            for i, tr in enumerate(traces):
                p = None if reference is None else psnr(clamp(x[i]), reference[i])
                tr.records.append(StepRecord(t, float(omega), float(g), p))

    out = clamp(x)
    if single:
        return out[0], (traces[0] if traces else None)
    return out, traces
