"""Synthetic soft-edged ellipse phantoms.

A phantom is a centred disk ("body") with further randomly placed, rotated
ellipses painted on top of it. Edges are smoothed with a tanh profile so the
images are band-limited enough to look like reconstructed MR slices while
still carrying the high-frequency content motion artifacts corrupt.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhantomSpec:
    size: int = 64
    ellipse_count: int = 6
    intensity_range: tuple = (0.1, 0.9)
    seed: int = 0
    edge_width: float = 0.6  # pixels

    def __post_init__(self):
        if self.size < 16:
            raise ValueError("phantom size must be >= 16")
        if self.ellipse_count < 1:
            raise ValueError("ellipse_count must be >= 1")
        lo, hi = self.intensity_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError("intensity_range must satisfy 0 <= lo <= hi <= 1")


def _ellipse_alpha(yy, xx, cy, cx, ay, ax, theta, edge_width):
    c, s = np.cos(theta), np.sin(theta)
    dy, dx = yy - cy, xx - cx
    u = c * dx + s * dy
    v = -s * dx + c * dy
    rho = np.sqrt((u / ax) ** 2 + (v / ay) ** 2)
    # Convert the radial distance to pixels along the ellipse's mean radius.
    dist = (rho - 1.0) * 0.5 * (ax + ay)
    return 0.5 * (1.0 - np.tanh(dist / edge_width))


def generate_phantom(spec):
    """Deterministic phantom image in [0, 1] for ``spec``."""
    rng = np.random.default_rng(spec.seed)
    n = spec.size
    lo, hi = spec.intensity_range
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    centre = (n - 1) / 2.0
    img = np.zeros((n, n))

    body_r = 0.42 * n
    alpha = _ellipse_alpha(yy, xx, centre, centre, body_r, body_r, 0.0, spec.edge_width)
    img = img * (1 - alpha) + rng.uniform(lo, hi) * alpha

    for _ in range(spec.ellipse_count - 1):
        ay, ax = rng.uniform(0.05, 0.22, size=2) * n
        # keep the inner structures inside the body
        reach = max(body_r - max(ay, ax), 0.0)
        r, phi = reach * np.sqrt(rng.uniform()), rng.uniform(0, 2 * np.pi)
        cy, cx = centre + r * np.sin(phi), centre + r * np.cos(phi)
        theta = rng.uniform(0, np.pi)
        alpha = _ellipse_alpha(yy, xx, cy, cx, ay, ax, theta, spec.edge_width)
        img = img * (1 - alpha) + rng.uniform(lo, hi) * alpha

    return np.clip(img, 0.0, 1.0)


def phantom_corpus(count, size=64, seed=0, **kwargs):
    """Stack of ``count`` phantoms; image ``i`` uses seed ``(seed, i)``."""
    return np.stack([
        generate_phantom(PhantomSpec(size=size, seed=child_seed(seed, i), **kwargs))
        for i in range(count)
    ])


def child_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])
