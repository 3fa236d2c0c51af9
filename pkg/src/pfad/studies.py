"""Desk-scale experiment harness: ablation arms and hyperparameter sweeps."""

from dataclasses import replace

import numpy as np

from .metrics import corpus_mean, evaluate_pair
from .motion import RigidMotionParams, simulate_rigid
from .phantom import phantom_corpus
from .purify import purify

DOMAIN_ARMS = {
    "frequency only": {"gamma_override": 1.0},
    "pixel only": {"gamma_override": 0.0},
    "both": {},
}

MASK_ARMS = {
    "no mask": {"mask_mode": "none"},
    "mask, no weight": {"weight_freq": False, "weight_pixel": False},
    "weight in frequency only": {"weight_pixel": False},
    "weight in pixel only": {"weight_freq": False},
    "mask + weight": {},
}

BALANCE_VALUES = (0.1, 0.3, 0.5, 0.7, 0.9)
CUTOFF_VALUES = (np.pi / 5, np.pi / 10, np.pi / 20)
GRID_VALUES = (1, 4, 16, 32, 64)


def desk_corpus(count=32, size=64, seed=100, pixel_spacing_cm=0.28):
    """Clean phantoms and their rigid-motion corrupted copies."""
    clean = phantom_corpus(count, size=size, seed=seed)
    corrupted = np.stack([
        simulate_rigid(x, RigidMotionParams.sample(seed * 1000 + i, pixel_spacing_cm=pixel_spacing_cm))
        for i, x in enumerate(clean)])
    return clean, corrupted


def score(outputs, clean):
    """Per-image reports and their corpus mean."""
    per_image = [evaluate_pair(y, x) for y, x in zip(outputs, clean)]
    return per_image, corpus_mean(per_image)


def run_arms(corrupted, clean, base, schedule, denoiser, arms):
    """Purify ``corrupted`` once per arm; returns ``{name: (per_image, mean)}``."""
    return {name: score(purify(corrupted, replace(base, **kw), schedule, denoiser)[0], clean)
            for name, kw in arms.items()}


def sweep(corrupted, clean, base, schedule, denoiser, field, values):
    return run_arms(corrupted, clean, base, schedule, denoiser,
                    {v: {field: v} for v in values})


def results_table(results, label="arm"):
    """Tab-separated table of corpus means with the combined total column."""
    lines = [f"{label}\tpsnr\tssim\tgmsd\ttotal"]
    for name, (_, m) in results.items():
        key = f"{name:.4g}" if isinstance(name, float) else str(name)
        lines.append(f"{key}\t{m.psnr:.4f}\t{m.ssim:.4f}\t{m.gmsd:.4f}\t{m.total:.4f}")
    return "\n".join(lines) + "\n"
