"""Image/k-space transforms and ideal phase-encode filters.

Conventions used throughout the package:

* images are real ``float64`` arrays whose last two axes are (rows, columns);
  any leading axes are treated as a batch;
* k-space grids are complex arrays of the same shape with the DC bin at the
  grid centre (``fftshift`` convention) and unitary normalisation, so
  ``sum(|G|**2) == sum(x**2)``;
* the phase-encoding axis defaults to the row axis (``axis=0`` of the image).
"""

from dataclasses import dataclass

import numpy as np

_AXES = (-2, -1)

# Bins whose |k| equals the cutoff up to rounding belong to the low band.
_BOUNDARY_TOL = 1e-12


def dft2(image):
    """Centered, unitary 2-D DFT over the last two axes.

    Real input is promoted to float64; complex rasters are accepted so that
    ``dft2(idft2(G)) == G``.
    """
    image = np.asarray(image)
    if not np.iscomplexobj(image):
        image = image.astype(np.float64)
    return np.fft.fftshift(np.fft.fft2(image, axes=_AXES, norm="ortho"), axes=_AXES)


def idft2(grid):
    """Inverse of :func:`dft2`. Returns a complex raster."""
    grid = np.asarray(grid, dtype=np.complex128)
    return np.fft.ifft2(np.fft.ifftshift(grid, axes=_AXES), axes=_AXES, norm="ortho")


def magnitude(raster):
    """Elementwise modulus. No clamping is applied here."""
    return np.abs(raster)


def clamp(image):
    return np.clip(image, 0.0, 1.0)


def frequencies(n):
    """Angular frequency (radians/sample) of each bin of a centered axis of length n.

    Bin ``r`` maps to ``2*pi*(r - n//2)/n``, which spans ``[-pi, pi)``.
    """
    return 2.0 * np.pi * (np.arange(n) - n // 2) / n


@dataclass(frozen=True)
class FrequencyFilter:
    """Ideal (binary) filter acting on ``|k|`` along one image axis.

    ``axis`` indexes the image axes, so 0 means rows (the phase-encode axis
    by default) and 1 means columns. The low-pass band is the closed interval
    ``|k| <= cutoff``; the high-pass band is its complement.
    """

    cutoff: float
    axis: int = 0
    kind: str = "low"

    def __post_init__(self):
        if not (0.0 < self.cutoff <= np.pi):
            raise ValueError(f"cutoff must lie in (0, pi], got {self.cutoff!r}")
        if self.axis not in (0, 1):
            raise ValueError(f"axis must be 0 or 1, got {self.axis!r}")
        if self.kind not in ("low", "high"):
            raise ValueError(f"kind must be 'low' or 'high', got {self.kind!r}")

    def band(self, n):
        """Boolean pass-band over the ``n`` bins of the filtered axis."""
        low = np.abs(frequencies(n)) <= self.cutoff + _BOUNDARY_TOL
        return low if self.kind == "low" else ~low

    def mask(self, shape):
        """Binary float mask for a grid of ``shape`` (last two axes used)."""
        if len(shape) < 2:
            raise ValueError(f"expected a grid with at least 2 dims, got shape {shape}")
        rows, cols = shape[-2:]
        n = (rows, cols)[self.axis]
        if n < 2:
            raise ValueError(f"filtered axis must have length >= 2, got {n}")
        band = self.band(n).astype(np.float64)
        if self.axis == 0:
            return np.broadcast_to(band[:, None], (rows, cols))
        return np.broadcast_to(band[None, :], (rows, cols))

    def complement(self):
        return FrequencyFilter(self.cutoff, self.axis, "high" if self.kind == "low" else "low")


def make_filter(cutoff, axis=0, kind="low"):
    return FrequencyFilter(float(cutoff), int(axis), kind)


def make_filter_pair(cutoff, axis=0):
    """Return the complementary ``(low, high)`` pair sharing one cutoff."""
    low = make_filter(cutoff, axis, "low")
    return low, low.complement()


def apply_filter(filt, grid):
    grid = np.asarray(grid)
    return grid * filt.mask(grid.shape)
