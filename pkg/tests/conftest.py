import time

import numpy as np
import pytest

from pfad.diffusion import rescaled_schedule
from pfad.network import TrainConfig, train_toy_denoiser
from pfad.phantom import PhantomSpec, generate_phantom, phantom_corpus

# Desk-scale training budget for the purification checks (batch 4, lr 1e-4).
TRAIN_STEPS = 6000
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def phantom64():
    return generate_phantom(PhantomSpec(size=64, seed=3))


def _train(T):
    corpus = phantom_corpus(256, size=64, seed=0)
    start = time.perf_counter()
    result = train_toy_denoiser(corpus, rescaled_schedule(T), TrainConfig(steps=TRAIN_STEPS, seed=0))
    return result, time.perf_counter() - start


@pytest.fixture(scope="session")
def trained_denoiser():
    """Toy denoiser for T=100 trained once per session on 256 phantoms, plus its wall time."""
    return _train(100)


@pytest.fixture(scope="session")
def trained_denoiser_t1000():
    """Same network and budget, trained on the full-length T=1000 schedule."""
    return _train(1000)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
