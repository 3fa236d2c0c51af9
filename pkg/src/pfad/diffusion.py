"""DDPM noise schedule, forward sampling and ancestral reverse steps.

Timesteps are 1-based (``t = 1..T``); schedule arrays are stored 0-based so
``schedule.alpha_bar[t - 1]`` is the cumulative product up to step ``t``.
Latents are never clamped here.
"""

from dataclasses import dataclass
from typing import Protocol

import numpy as np

DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 2e-2
DEFAULT_T = 1000


class Denoiser(Protocol):
    """Anything that predicts the injected noise of ``x_t`` at step ``t``."""

    def __call__(self, x_t: np.ndarray, t: int) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    T: int
    beta_start: float
    beta_end: float
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray

    def check_step(self, t):
        if not (1 <= t <= self.T):
            raise ValueError(f"step {t} outside [1, {self.T}]")

    def abar(self, t):
        self.check_step(t)
        return float(self.alpha_bar[t - 1])


def make_schedule(T=DEFAULT_T, beta_start=DEFAULT_BETA_START, beta_end=DEFAULT_BETA_END):
    """Linear beta schedule; reverse variance ``sigma_t**2 = beta_t``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    sigma = np.sqrt(beta)
    for arr in (beta, alpha, alpha_bar, sigma):
        arr.setflags(write=False)
    return NoiseSchedule(int(T), float(beta_start), float(beta_end),
                         beta, alpha, alpha_bar, sigma)


def rescaled_schedule(T):
    """Default beta range stretched by ``1000 / T`` for short chains."""
    scale = DEFAULT_T / T
    return make_schedule(T, DEFAULT_BETA_START * scale, DEFAULT_BETA_END * scale)


def forward_sample(schedule, x0, t, noise):
    """Closed-form marginal ``sqrt(abar_t) x0 + sqrt(1 - abar_t) noise``."""
    abar = schedule.abar(t)
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != x0.shape:
        raise ValueError(f"noise shape {noise.shape} != image shape {x0.shape}")
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * noise


def forward_step(schedule, x_prev, t, noise):
    """One step of the Markov kernel q(x_t | x_{t-1})."""
    schedule.check_step(t)
    beta = schedule.beta[t - 1]
    return np.sqrt(1.0 - beta) * x_prev + np.sqrt(beta) * noise


def posterior_mean(schedule, x_t, t, eps_hat):
    """``mu = (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t)``."""
    beta = schedule.beta[t - 1]
    abar = schedule.alpha_bar[t - 1]
    return (x_t - beta / np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(1.0 - beta)


def reverse_step(schedule, denoiser, x_t, t, noise):
    """Ancestral sample of x_{t-1}; the noise term is dropped at ``t == 1``."""
    schedule.check_step(t)
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(denoiser(x_t, t), dtype=np.float64)
    if eps_hat.shape != x_t.shape:
        raise ValueError(
            f"denoiser returned shape {eps_hat.shape}, expected {x_t.shape}")
    mean = posterior_mean(schedule, x_t, t, eps_hat)
    if t == 1:
        return mean
    return mean + schedule.sigma[t - 1] * noise


def sample_chain(schedule, denoiser, shape, rng):
    """Unguided ancestral sampling from x_T ~ N(0, I) down to x_0."""
    x = rng.standard_normal(shape)
    for t in range(schedule.T, 0, -1):
        x = reverse_step(schedule, denoiser, x, t, rng.standard_normal(shape))
    return x


class OracleDenoiser:
    """Test double that knows the clean target.

    For any ``x_t`` it returns the unique ``eps`` satisfying
    ``x_t = sqrt(abar_t) * target + sqrt(1 - abar_t) * eps``.
    """

    def __init__(self, target, schedule):
        self.target = np.asarray(target, dtype=np.float64)
        self.schedule = schedule

    def __call__(self, x_t, t):
        abar = self.schedule.abar(t)
        return (np.asarray(x_t) - np.sqrt(abar) * self.target) / np.sqrt(1.0 - abar)
