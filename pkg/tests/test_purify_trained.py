"""Purification with trained toy denoisers (slow: each model trains for minutes)."""

import numpy as np

from pfad.metrics import psnr
from pfad.phantom import phantom_corpus
from pfad.purify import PurifyConfig, purify


def test_clean_input_is_approximately_preserved(trained_denoiser_t1000):
    # Defaults: a=0.7, cutoff=pi/10, 16 cells, full-length chain.
    result, _ = trained_denoiser_t1000
    den = result.denoiser
    clean = phantom_corpus(8, size=64, seed=1)
    out, _ = purify(clean, PurifyConfig(T=1000), den.schedule, den)
    scores = [psnr(y, x) for y, x in zip(out, clean)]
    print("clean-input psnr per image", np.round(scores, 2))
    assert np.mean(scores) >= 25


def test_trace_tracks_reference(trained_denoiser):
    result, _ = trained_denoiser
    den = result.denoiser
    clean = phantom_corpus(2, size=64, seed=4)
    _, traces = purify(clean, PurifyConfig(T=100, trace=True), den.schedule, den, reference=clean)
    steps = traces[0].records
    assert [r.t for r in steps] == list(range(100, 0, -1))
    # Guidance fades out and the final estimate is far closer than pure noise.
    assert steps[0].omega > steps[-1].omega
    assert steps[-1].psnr > steps[0].psnr + 10
