"""Motion artifact simulation by k-space phase perturbation.

Rows of k-space (along the phase-encode axis) whose angular frequency
exceeds ``k0`` in magnitude are treated as acquired after the subject moved;
only those rows are perturbed. Translations enter as a linear phase ramp,
respiratory motion as a sinusoidally modulated ramp, and in-plane rotation
by substituting the late rows with those of the rotated object.
"""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .kspace import clamp, dft2, frequencies, idft2, magnitude

# 0.7 mm isotropic voxels of the brain corpus the defaults are modelled on.
DEFAULT_PIXEL_SPACING_CM = 0.07


def _check_k0(k0):
    if not (0.0 < k0 < np.pi):
        raise ValueError(f"k0 must lie in (0, pi), got {k0!r}")


@dataclass(frozen=True)
class RigidMotionParams:
    delta_k: float = 2.75
    rotation_deg: float = 0.0
    k0: float = np.pi / 10
    pixel_spacing_cm: float = DEFAULT_PIXEL_SPACING_CM
    seed: int = 0

    def __post_init__(self):
        if self.delta_k < 0:
            raise ValueError("delta_k must be >= 0")
        if abs(self.rotation_deg) > 90:
            raise ValueError("|rotation_deg| must be <= 90")
        if self.pixel_spacing_cm <= 0:
            raise ValueError("pixel_spacing_cm must be > 0")
        _check_k0(self.k0)

    @property
    def shift_pixels(self):
        return self.delta_k / self.pixel_spacing_cm

    def to_dict(self):
        return asdict(self)

    @classmethod
    def sample(cls, seed, delta_range=(2.5, 3.0), rotation_range=(-2.0, 2.0),
               k0=np.pi / 10, pixel_spacing_cm=DEFAULT_PIXEL_SPACING_CM):
        """Draw translation and rotation uniformly from the given ranges."""
        rng = np.random.default_rng(seed)
        return cls(
            delta_k=float(rng.uniform(*delta_range)),
            rotation_deg=float(rng.uniform(*rotation_range)),
            k0=k0,
            pixel_spacing_cm=pixel_spacing_cm,
            seed=seed,
        )


@dataclass(frozen=True)
class RespiratoryParams:
    delta_k: float = 1.15
    period_m: float = 1.0
    phase_n: float = 0.0
    k0: float = np.pi / 10
    pixel_spacing_cm: float = DEFAULT_PIXEL_SPACING_CM
    seed: int = 0

    def __post_init__(self):
        if self.delta_k < 0:
            raise ValueError("delta_k must be >= 0")
        if self.period_m <= 0:
            raise ValueError("period_m must be > 0")
        if not (0.0 <= self.phase_n < 2 * np.pi):
            raise ValueError("phase_n must lie in [0, 2*pi)")
        if self.pixel_spacing_cm <= 0:
            raise ValueError("pixel_spacing_cm must be > 0")
        _check_k0(self.k0)

    @property
    def amplitude_pixels(self):
        return self.delta_k / self.pixel_spacing_cm

    def to_dict(self):
        return asdict(self)

    @classmethod
    def sample(cls, seed, delta_range=(1.1, 1.2), period_range=(0.1, 5.0),
               phase_range=(0.0, np.pi / 4), k0=np.pi / 10,
               pixel_spacing_cm=DEFAULT_PIXEL_SPACING_CM):
        rng = np.random.default_rng(seed)
        return cls(
            delta_k=float(rng.uniform(*delta_range)),
            period_m=float(rng.uniform(*period_range)),
            phase_n=float(rng.uniform(*phase_range)),
            k0=k0,
            pixel_spacing_cm=pixel_spacing_cm,
            seed=seed,
        )


def _row_shape(axis, n):
    return (n, 1) if axis == 0 else (1, n)


def perturbed_rows(n, k0):
    """Boolean selector of the bins with ``|k| > k0`` on a centered axis."""
    return np.abs(frequencies(n)) > k0


def perturb_phase(grid, phi, k0, axis=0):
    """Multiply rows with ``|k_y| > k0`` by ``exp(-1j * phi(k_y))``.

    ``phi`` maps an array of angular frequencies to phases in radians.
    Rows inside the ``|k_y| <= k0`` band are returned untouched.
    """
    _check_k0(k0)
    grid = np.asarray(grid, dtype=np.complex128)
    n = grid.shape[-2 + axis]
    k = frequencies(n)
    phase = np.asarray(phi(k), dtype=np.float64)
    if phase.shape != k.shape or not np.all(np.isfinite(phase)):
        raise ValueError("phi must return one finite phase per row")
    factor = np.where(perturbed_rows(n, k0), np.exp(-1j * phase), 1.0)
    return grid * factor.reshape(_row_shape(axis, n))


def translation_phase(shift_pixels):
    """Linear ramp ``k * s``: a circular shift by ``s`` pixels."""
    return lambda k: k * shift_pixels


def respiratory_phase(amplitude_pixels, period_m, phase_n):
    return lambda k: k * amplitude_pixels * np.sin(period_m * k + phase_n)


def rotate(image, angle_deg):
    """Bilinear in-plane rotation about the image centre, zero fill outside."""
    if angle_deg == 0:
        return np.array(image, dtype=np.float64)
    return ndimage.rotate(image, angle_deg, reshape=False, order=1,
                          mode="constant", cval=0.0)


def corrupt_kspace_rigid(clean, params, axis=0):
    """Motion-corrupted k-space (before magnitude and clamping)."""
    clean = np.asarray(clean, dtype=np.float64)
    grid = dft2(clean)
    moved = dft2(rotate(clean, params.rotation_deg)) if params.rotation_deg else grid
    n = grid.shape[-2 + axis]
    late = perturbed_rows(n, params.k0).reshape(_row_shape(axis, n))
    # Late rows come from the moved object; the phase ramp leaves early rows alone.
    mixed = np.where(late, moved, grid)
    return perturb_phase(mixed, translation_phase(params.shift_pixels), params.k0, axis)


def corrupt_kspace_respiratory(clean, params, axis=0):
    grid = dft2(clean)
    phi = respiratory_phase(params.amplitude_pixels, params.period_m, params.phase_n)
    return perturb_phase(grid, phi, params.k0, axis)


def simulate_rigid(clean, params, axis=0):
    """Rigid (translation + rotation) motion artifacts, clamped to [0, 1]."""
    return clamp(magnitude(idft2(corrupt_kspace_rigid(clean, params, axis))))


def simulate_respiratory(clean, params, axis=0):
    """Respiratory motion artifacts, clamped to [0, 1]."""
    return clamp(magnitude(idft2(corrupt_kspace_respiratory(clean, params, axis))))


def simulate(clean, kind, params, axis=0):
    if kind == "rigid":
        return simulate_rigid(clean, params, axis)
    if kind == "respiratory":
        return simulate_respiratory(clean, params, axis)
    raise ValueError(f"unknown simulator kind {kind!r}")


def params_from_dict(kind, record):
    cls = {"rigid": RigidMotionParams, "respiratory": RespiratoryParams}[kind]
    return cls(**record)
