"""The image quality metrics and the rank-sum test on small examples."""

import numpy as np

from pfad.metrics import gmsd, mann_whitney_u, psnr, ssim

rng = np.random.default_rng(0)
ref = rng.uniform(0, 0.9, (64, 64))

print(psnr(ref + 0.1, ref))  # constant error 0.1 -> 20 dB
print(psnr(ref, ref))        # identical -> capped at 99 dB
print(ssim(ref, ref), gmsd(ref, ref))

noisy = np.clip(ref + rng.normal(0, 0.05, ref.shape), 0, 1)
print(f"noisy: psnr {psnr(noisy, ref):.2f} ssim {ssim(noisy, ref):.3f} gmsd {gmsd(noisy, ref):.3f}")

# Small samples use the exact permutation distribution, ties included.
print(mann_whitney_u([1, 2, 3], [4, 5, 6]))   # p = 0.1
print(mann_whitney_u([1, 2, 2, 3], [2, 3, 4, 4, 5]))
# Large samples fall back to the normal approximation.
print(mann_whitney_u(rng.normal(size=40), rng.normal(0.5, 1, 40)))
