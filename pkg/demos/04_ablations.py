"""Ablations and sweeps over the purification settings.

    python3 demos/04_ablations.py model.ckpt

Needs a trained checkpoint (see ``pfad train`` or demo 03).  Each arm
purifies 16 images, about ten seconds per arm.
"""

import sys

import numpy as np

from pfad.metrics import mann_whitney_u
from pfad.network import ToyDenoiser
from pfad.purify import PurifyConfig
from pfad.studies import (BALANCE_VALUES, CUTOFF_VALUES, DOMAIN_ARMS, GRID_VALUES,
                          MASK_ARMS, desk_corpus, results_table, run_arms, sweep)

denoiser = ToyDenoiser.load(sys.argv[1])
schedule = denoiser.schedule
clean, corrupted = desk_corpus(16, seed=100)
base = PurifyConfig(T=schedule.T, seed=0)

domain = run_arms(corrupted, clean, base, schedule, denoiser, DOMAIN_ARMS)
print(results_table(domain))
print(results_table(run_arms(corrupted, clean, base, schedule, denoiser, MASK_ARMS)))

# Is the combined sampler better than pixel-only, image by image?
both = [r.psnr for r in domain["both"][0]]
pixel = [r.psnr for r in domain["pixel only"][0]]
print(mann_whitney_u(both, pixel))

print(results_table(sweep(corrupted, clean, base, schedule, denoiser, "a", BALANCE_VALUES), "a"))
print(results_table(sweep(corrupted, clean, base, schedule, denoiser, "cutoff", CUTOFF_VALUES),
                    "cutoff"))
print(results_table(sweep(corrupted, clean, base, schedule, denoiser, "grid_size", GRID_VALUES),
                    "grid"))
