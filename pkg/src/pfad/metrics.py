"""Full-reference image quality metrics and the Mann-Whitney U test.

All image metrics assume intensities in [0, 1] (data range 1.0).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, special

PSNR_CAP = 99.0
_MSE_FLOOR = 1e-10

# Exact permutation p-values are used while the smaller sample is below
# EXACT_MAX_MIN_N and the pooled size keeps the subset-sum table small.
EXACT_MAX_MIN_N = 8
EXACT_MAX_TOTAL_N = 400


def _pair(x, ref):
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {ref.shape}")
    return x, ref


def psnr(x, ref):
    """PSNR in dB with peak 1.0, capped at ``PSNR_CAP`` for (near-)identical images."""
    x, ref = _pair(x, ref)
    mse = float(np.mean((x - ref) ** 2))
    if mse < _MSE_FLOOR:
        return PSNR_CAP
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP)


def gaussian_window(size=11, sigma=1.5):
    g = np.exp(-0.5 * ((np.arange(size) - (size - 1) / 2) / sigma) ** 2)
    g /= g.sum()
    return np.outer(g, g)


def ssim(x, ref, window_size=11, sigma=1.5, k1=0.01, k2=0.03, data_range=1.0):
    """Mean single-scale SSIM over all fully covered window positions."""
    x, ref = _pair(x, ref)
    if min(x.shape) < window_size:
        raise ValueError(f"image {x.shape} smaller than the {window_size}px window")
    win = gaussian_window(window_size, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2

    def filt(a):
        return signal.correlate2d(a, win, mode="valid")

    mu_x, mu_y = filt(x), filt(ref)
    sxx = filt(x * x) - mu_x ** 2
    syy = filt(ref * ref) - mu_y ** 2
    sxy = filt(x * ref) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


_PREWITT_X = np.array([[1, 0, -1], [1, 0, -1], [1, 0, -1]], dtype=np.float64) / 3.0

# 170 on the 0..255 scale, re-expressed for unit data range.
GMSD_C = 170.0 / 255.0 ** 2


def _half(a):
    """2x2 box average sampled at even indices (zero beyond the last row/column)."""
    h, w = a.shape
    a = np.pad(a, ((0, h % 2), (0, w % 2)))
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def _gradient_magnitude(a):
    gx = signal.convolve2d(a, _PREWITT_X, mode="same")
    gy = signal.convolve2d(a, _PREWITT_X.T, mode="same")
    return np.sqrt(gx ** 2 + gy ** 2)


def gmsd(x, ref, c=GMSD_C):
    """Gradient magnitude similarity deviation; 0 for identical images."""
    x, ref = _pair(x, ref)
    g1 = _gradient_magnitude(_half(x))
    g2 = _gradient_magnitude(_half(ref))
    gms = (2 * g1 * g2 + c) / (g1 ** 2 + g2 ** 2 + c)
    return float(np.std(gms, ddof=1))


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    gmsd: float

    @property
    def total(self):
        """Higher-is-better metrics added, lower-is-better subtracted."""
        return self.psnr + self.ssim - self.gmsd


def evaluate_pair(x, ref):
    return MetricReport(psnr(x, ref), ssim(x, ref), gmsd(x, ref))


def corpus_mean(reports):
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    return MetricReport(
        float(np.mean([r.psnr for r in reports])),
        float(np.mean([r.ssim for r in reports])),
        float(np.mean([r.gmsd for r in reports])),
    )


@dataclass(frozen=True)
class UTestResult:
    u_statistic: float
    p_value: float
    n1: int
    n2: int
    method: str


def rankdata(values):
    """Ranks starting at 1, ties receive the mean of the ranks they span."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_two_sided(ranks, n1, u_obs):
    """Permutation p-value of U via a subset-sum count over doubled ranks.

    ``counts[j, s]`` is the number of j-subsets of the pooled ranks whose
    doubled rank sum is ``s``; doubling makes midranks integral. Subsets of
    the smaller group size suffice because |U - n1*n2/2| is the same for
    either group.
    """
    n = len(ranks)
    k = min(n1, n - n1)
    r2 = np.rint(2 * ranks).astype(np.int64)
    total = int(r2.sum())
    counts = np.zeros((k + 1, total + 1))
    counts[0, 0] = 1.0
    for v in r2:
        counts[1:, v:] += counts[:-1, :total + 1 - v].copy()
    dist = counts[k]
    sums = np.nonzero(dist)[0]
    dev = np.abs(sums - k * (k + 1) - n1 * (n - n1))
    dev_obs = abs(2 * u_obs - n1 * (n - n1))
    # tolerance guards against rounding in the midrank-derived u_obs
    hits = dist[sums[dev >= dev_obs - 1e-9]].sum()
    return float(min(1.0, hits / special.comb(n, k, exact=True)))


def _normal_two_sided(ranks, n1, n2, u):
    n = n1 + n2
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (n * (n - 1))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return 1.0
    mean = n1 * n2 / 2.0
    # continuity correction of one half toward the mean
    z = (abs(u - mean) - 0.5) / math.sqrt(var)
    return float(min(1.0, 2.0 * special.ndtr(-max(z, 0.0))))


def mann_whitney_u(sample_a, sample_b, method="auto"):
    """Two-sided Mann-Whitney U test.

    ``U`` counts pairs with ``a > b`` (ties count one half). With
    ``method="auto"`` the exact permutation distribution is used while
    ``min(n1, n2) < 8`` (and the pooled size is at most 400), the
    tie-corrected normal approximation with continuity correction otherwise.
    """
    a = np.asarray(sample_a, dtype=np.float64).ravel()
    b = np.asarray(sample_b, dtype=np.float64).ravel()
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    ranks = rankdata(np.concatenate([a, b]))
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    if method == "auto":
        small = min(n1, n2) < EXACT_MAX_MIN_N and n1 + n2 <= EXACT_MAX_TOTAL_N
        method = "exact" if small else "normal"
    if method == "exact":
        p = _exact_two_sided(ranks, n1, u)
    elif method == "normal":
        p = _normal_two_sided(ranks, n1, n2, u)
    else:
        raise ValueError(f"unknown method {method!r}")
    return UTestResult(u, p, n1, n2, method)

