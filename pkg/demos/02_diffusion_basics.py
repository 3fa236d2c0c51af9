"""The forward noising process and an oracle reverse chain.

``OracleDenoiser`` knows the clean image, so the reverse chain converges
onto it.  That makes it a handy check of the sampler arithmetic without any
training.  Runs in about a second.
"""

import numpy as np

from pfad.diffusion import (OracleDenoiser, forward_sample, make_schedule,
                            rescaled_schedule, sample_chain)
from pfad.metrics import psnr
from pfad.phantom import PhantomSpec, generate_phantom

full = make_schedule(1000)  # beta linear in [1e-4, 2e-2]
print("alpha_bar at t = 1, 500, 1000:", full.abar(1), full.abar(500), full.abar(1000))

# Short chains use the rescaled schedule so alpha_bar_T still reaches ~0.
short = rescaled_schedule(100)
print("T=100 alpha_bar_T:", short.abar(100))

x0 = generate_phantom(PhantomSpec(size=64, seed=1))
rng = np.random.default_rng(0)
for t in (1, 10, 50, 100):
    xt = forward_sample(short, x0, t, rng.standard_normal(x0.shape))
    print(f"t={t:3d}  psnr(x_t, x0) = {psnr(np.clip(xt, 0, 1), x0):6.2f} dB")

# Reverse chain from pure noise with the oracle.
out = sample_chain(short, OracleDenoiser(x0, short), x0.shape, np.random.default_rng(1))
print("oracle chain result:", round(psnr(np.clip(out, 0, 1), x0), 2), "dB")
