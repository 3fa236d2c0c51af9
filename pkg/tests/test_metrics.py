import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage, stats
from skimage.metrics import structural_similarity

from pfad.metrics import (PSNR_CAP, gmsd, mann_whitney_u, psnr, rankdata, ssim)


def brute_force_p(a, b):
    """Two-sided permutation p-value by enumerating every relabelling."""
    pooled = np.concatenate([a, b]).astype(float)
    n1 = len(a)
    ranks = stats.rankdata(pooled)
    centre = n1 * len(b) / 2
    u_obs = ranks[:n1].sum() - n1 * (n1 + 1) / 2
    hits = total = 0
    for idx in itertools.combinations(range(len(pooled)), n1):
        u = ranks[list(idx)].sum() - n1 * (n1 + 1) / 2
        total += 1
        hits += abs(u - centre) >= abs(u_obs - centre) - 1e-9
    return hits / total


def test_psnr_arithmetic(rng):
    ref = rng.uniform(0, 0.9, (32, 32))
    assert psnr(ref, ref) == PSNR_CAP
    assert psnr(ref + 0.1, ref) == pytest.approx(20.0, abs=1e-9)
    board = np.indices((32, 32)).sum(0) % 2
    x = np.full((32, 32), 0.5)
    y = np.where(board, 1.0, 0.0)
    assert psnr(x, y) == pytest.approx(10 * np.log10(4), abs=1e-9)


def test_psnr_shift_invariance(rng):
    x, ref = rng.uniform(0, 0.5, (2, 16, 16))
    assert psnr(x + 0.3, ref + 0.3) == pytest.approx(psnr(x, ref), abs=1e-9)


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_ssim_matches_reference_implementation(phantom64, rng):
    noisy = np.clip(phantom64 + rng.normal(0, 0.05, phantom64.shape), 0, 1)
    ref = structural_similarity(noisy, phantom64, data_range=1.0, gaussian_weights=True,
                                sigma=1.5, use_sample_covariance=False)
    assert ssim(noisy, phantom64) == pytest.approx(ref, abs=1e-9)


def test_ssim_identity_and_inversion(phantom64):
    assert ssim(phantom64, phantom64) == pytest.approx(1.0, abs=1e-12)
    assert ssim(1 - phantom64, phantom64) < 0.3


def test_ssim_decreases_with_noise(phantom64):
    rng = np.random.default_rng(0)
    scores = [ssim(phantom64 + rng.normal(0, s, phantom64.shape), phantom64)
              for s in (0.05, 0.1, 0.2)]
    assert all(0 < v < 1 for v in scores)
    assert scores[0] > scores[1] > scores[2]


def test_ssim_small_image_rejected():
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 20)), np.zeros((8, 20)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_ssim_bounded(seed):
    r = np.random.default_rng(seed)
    x, y = r.random((2, 16, 16)) * r.random()
    assert -1 <= ssim(x, y) <= 1


def gmsd_oracle(x, ref):
    """GMSD written from the published recipe with ndimage primitives."""
    def prep(a):
        # 2x2 mean filter anchored at the top-left sample, then keep even rows/cols
        a = ndimage.uniform_filter(a, size=2, mode="constant", origin=(-1, -1))
        return a[::2, ::2]

    def grad(a):
        k = np.array([[1, 0, -1]] * 3) / 3.0
        gx = ndimage.convolve(a, k, mode="constant")
        gy = ndimage.convolve(a, k.T, mode="constant")
        return np.hypot(gx, gy)

    g1, g2 = grad(prep(x)), grad(prep(ref))
    c = 170 / 255 ** 2
    return np.std((2 * g1 * g2 + c) / (g1 ** 2 + g2 ** 2 + c), ddof=1)


@pytest.mark.parametrize("shape", [(64, 64), (33, 47)])
def test_gmsd_matches_oracle(rng, shape):
    ref = rng.random(shape)
    x = ndimage.gaussian_filter(ref, 1.0)
    assert gmsd(x, ref) == pytest.approx(gmsd_oracle(x, ref), rel=1e-9)


def test_gmsd_cases(phantom64):
    assert gmsd(phantom64, phantom64) == 0.0
    blurred = ndimage.gaussian_filter(phantom64, 1.5)
    assert gmsd(blurred, phantom64) > 0
    assert gmsd(blurred, phantom64) == gmsd(phantom64, blurred)


def test_rankdata_midranks():
    np.testing.assert_array_equal(rankdata([3, 1, 3, 2]), stats.rankdata([3, 1, 3, 2]))


def test_u_test_textbook_case():
    res = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert res.u_statistic == 0 and res.method == "exact"
    assert res.p_value == pytest.approx(0.1, abs=1e-15)


def test_u_test_identical_samples():
    res = mann_whitney_u([1.0, 2.0, 5.0], [1.0, 2.0, 5.0])
    assert res.u_statistic == 4.5 and res.p_value == 1.0


def test_u_test_relabel_symmetry(rng):
    a, b = rng.normal(size=6), rng.normal(0.7, size=4)
    r1, r2 = mann_whitney_u(a, b), mann_whitney_u(b, a)
    assert r1.u_statistic + r2.u_statistic == 24
    assert r1.p_value == r2.p_value


def test_u_test_empty():
    with pytest.raises(ValueError):
        mann_whitney_u([], [1.0])


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=9).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(st.integers(0, 6), min_size=1, max_size=10 - len(a)))))
def test_u_test_exact_equals_enumeration(pair):
    a, b = map(np.array, pair)
    res = mann_whitney_u(a, b)
    assert res.method == "exact"
    assert 0 <= res.u_statistic <= len(a) * len(b)
    assert res.p_value == brute_force_p(a, b)


def test_u_test_normal_branch_matches_scipy(rng):
    a = rng.normal(size=20).round(1)
    b = rng.normal(0.4, size=25).round(1)
    res = mann_whitney_u(a, b)
    ref = stats.mannwhitneyu(a, b, method="asymptotic", use_continuity=True)
    assert res.method == "normal"
    assert res.u_statistic == ref.statistic
    assert res.p_value == pytest.approx(ref.pvalue, rel=1e-12)


def test_u_test_disjoint_samples_significant():
    res = mann_whitney_u(np.arange(8) + 10.0, np.arange(8))
    assert res.p_value < 0.05
