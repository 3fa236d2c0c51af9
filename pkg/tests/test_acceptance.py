"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from pfad import cli
from pfad.diffusion import (OracleDenoiser, forward_sample, make_schedule,
                            rescaled_schedule, sample_chain)
from pfad.kspace import apply_filter, dft2, frequencies, make_filter_pair
from pfad.metrics import PSNR_CAP, gmsd, mann_whitney_u, psnr, ssim
from pfad.motion import (RespiratoryParams, RigidMotionParams,
                         corrupt_kspace_respiratory, corrupt_kspace_rigid,
                         simulate_respiratory, simulate_rigid)
from pfad.phantom import PhantomSpec, generate_phantom, phantom_corpus
from pfad.purify import PurifyConfig, checkerboard, mask_weight, step_parity
from pfad.studies import (BALANCE_VALUES, DOMAIN_ARMS, MASK_ARMS, desk_corpus,
                          results_table, run_arms, score)
from test_metrics import brute_force_p


@contextmanager
def criterion(number, title):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        ACCEPTANCE_LINES.append(f"[{number:02d}] FAIL  {title}")
        raise
    ACCEPTANCE_LINES.append(
        f"[{number:02d}] PASS  {title} ({time.perf_counter() - start:.1f}s)")


def test_01_filter_complementarity():
    with criterion(1, "filter complementarity is bit-exact"):
        start = time.perf_counter()
        rng = np.random.default_rng(1)
        for _ in range(100):
            h, w = rng.integers(2, 129, size=2)
            g = rng.normal(size=(h, w)) + 1j * rng.normal(size=(h, w))
            low, high = make_filter_pair(rng.uniform(1e-3, np.pi), int(rng.integers(0, 2)))
            assert np.array_equal(apply_filter(low, g) + apply_filter(high, g), g)
        assert time.perf_counter() - start < 5


def test_02_simulator_invariants():
    with criterion(2, "phase-only simulation keeps magnitudes and the low band"):
        start = time.perf_counter()
        corpus = phantom_corpus(32, size=64, seed=8)
        low = np.abs(frequencies(64)) <= np.pi / 10
        for i, x in enumerate(corpus):
            clean_k = dft2(x)
            nz = np.abs(clean_k) > 0
            for bad_k in (
                corrupt_kspace_rigid(x, RigidMotionParams(delta_k=2.5 + 0.5 * i / 31, pixel_spacing_cm=0.28)),
                corrupt_kspace_respiratory(x, RespiratoryParams.sample(i, pixel_spacing_cm=0.28)),
            ):
                rel = np.abs(np.abs(bad_k) - np.abs(clean_k))[nz] / np.abs(clean_k)[nz]
                assert rel.max() < 1e-9
                assert np.array_equal(bad_k[low], clean_k[low])
            still = simulate_rigid(x, RigidMotionParams(delta_k=0.0, rotation_deg=0.0))
            assert np.max(np.abs(still - x)) < 1e-6
            still = simulate_respiratory(x, RespiratoryParams(delta_k=0.0))
            assert np.max(np.abs(still - x)) < 1e-6
        assert time.perf_counter() - start < 10


def test_03_mask_algebra():
    with criterion(3, "alternating masks are exact complements"):
        start = time.perf_counter()
        T = 100
        s = rescaled_schedule(T)
        coverage = np.zeros((64, 64))
        prev = None
        for t in range(T, 0, -1):
            m = checkerboard(64, 64, 16, step_parity(t, T))
            if prev is not None:
                assert np.array_equal(m, 1 - prev)
            weighted = mask_weight(s, t) * m
            assert weighted.min() >= 0 and weighted.max() <= 1
            coverage += m
            prev = m
        assert np.all(coverage == 50)
        assert time.perf_counter() - start < 1


def test_04_schedule_and_forward_process():
    with criterion(4, "schedule identity and forward-process variance"):
        start = time.perf_counter()
        s = make_schedule(1000)
        assert np.max(np.abs(np.exp(np.cumsum(np.log(1 - s.beta))) - s.alpha_bar)) < 1e-12
        rng = np.random.default_rng(4)
        x0 = rng.random((4, 4))
        for t in (10, 500, 1000):
            draws = forward_sample(s, np.broadcast_to(x0, (10_000, 4, 4)), t,
                                   rng.standard_normal((10_000, 4, 4)))
            target = 1 - s.alpha_bar[t - 1]
            assert np.max(np.abs(draws.var(axis=0) / target - 1)) < 0.05
        assert time.perf_counter() - start < 30


def test_05_oracle_chain_convergence():
    with criterion(5, "oracle reverse chain reaches >= 30 dB"):
        start = time.perf_counter()
        s = rescaled_schedule(100)
        scores = []
        for seed in range(8):
            target = generate_phantom(PhantomSpec(size=64, seed=500 + seed))
            out = sample_chain(s, OracleDenoiser(target, s), target.shape,
                               np.random.default_rng(seed))
            scores.append(psnr(np.clip(out, 0, 1), target))
        assert np.median(scores) >= 30
        assert time.perf_counter() - start < 120


@pytest.fixture(scope="module")
def desk(trained_denoiser):
    result, train_seconds = trained_denoiser
    clean, corrupted = desk_corpus(32, seed=100)
    base = PurifyConfig(T=100, a=0.7, cutoff=np.pi / 10, grid_size=16, seed=0)
    den = result.denoiser
    runs = {"both": run_arms(corrupted, clean, base, den.schedule, den, {"both": {}})["both"]}
    return dict(clean=clean, corrupted=corrupted, base=base, den=den,
                train_seconds=train_seconds, runs=runs)


def _arms(desk, arms):
    out = {}
    for name, kw in arms.items():
        if not kw:
            out[name] = desk["runs"]["both"]
            continue
        key = tuple(sorted(kw.items()))
        if key not in desk["runs"]:
            desk["runs"][key] = run_arms(desk["corrupted"], desk["clean"], desk["base"],
                                         desk["den"].schedule, desk["den"], {name: kw})[name]
        out[name] = desk["runs"][key]
    return out


def test_06_directional_artifact_removal(desk):
    with criterion(6, "purification beats the corrupted input on PSNR and SSIM"):
        assert desk["train_seconds"] < 30 * 60
        _, before = score(desk["corrupted"], desk["clean"])
        _, after = desk["runs"]["both"]
        print(f"corrupted psnr {before.psnr:.3f} ssim {before.ssim:.4f}; "
              f"purified psnr {after.psnr:.3f} ssim {after.ssim:.4f}")
        assert after.psnr > before.psnr
        assert after.ssim > before.ssim


def test_07_ablation_structure(desk, tmp_path):
    with criterion(7, "ablation arms run; frequency-only beats pixel-only"):
        domain = _arms(desk, DOMAIN_ARMS)
        masks = _arms(desk, MASK_ARMS)
        (tmp_path / "domain.tsv").write_text(results_table(domain))
        (tmp_path / "masks.tsv").write_text(results_table(masks))
        print(results_table(domain) + results_table(masks))
        for table in (domain, masks):
            means = [(m.psnr, m.ssim, m.gmsd) for _, m in table.values()]
            assert len(set(means)) == len(means)
        assert domain["frequency only"][1].psnr > domain["pixel only"][1].psnr


def test_08_balance_sweep(desk, tmp_path):
    with criterion(8, "sweep over a emits the combined total"):
        results = _arms(desk, {a: ({} if a == 0.7 else {"a": a}) for a in BALANCE_VALUES})
        table = results_table(results, label="a")
        (tmp_path / "sweep_a.tsv").write_text(table)
        print(table)
        rows = table.strip().splitlines()
        assert rows[0].split("\t")[-1] == "total" and len(rows) == 1 + len(BALANCE_VALUES)
        for row in rows[1:]:
            _, p, s, g, total = row.split("\t")
            assert float(total) == pytest.approx(float(p) + float(s) - float(g), abs=2e-4)


def test_09_metric_oracles():
    with criterion(9, "metric arithmetic and exact U-test agreement"):
        start = time.perf_counter()
        ref = np.random.default_rng(9).uniform(0, 0.9, (64, 64))
        assert abs(psnr(ref + 0.1, ref) - 20.0) < 1e-9
        assert psnr(ref, ref) == PSNR_CAP
        board = np.indices((64, 64)).sum(0) % 2
        assert abs(psnr(np.full((64, 64), 0.5), board.astype(float)) - 10 * np.log10(4)) < 1e-9
        assert ssim(ref, ref) == pytest.approx(1.0, abs=1e-12)
        assert gmsd(ref, ref) == 0.0
        rng = np.random.default_rng(10)
        for n1 in range(1, 10):
            for n2 in range(1, 11 - n1):
                for _ in range(3):
                    a, b = rng.integers(0, 5, n1), rng.integers(0, 5, n2)
                    res = mann_whitney_u(a, b)
                    assert res.method == "exact"
                    assert res.p_value == brute_force_p(a, b)
        assert time.perf_counter() - start < 10


def _pipeline(root):
    def run(*argv):
        assert cli.main([str(a) for a in argv]) == 0

    sim, train, pur, ev = (root / d for d in ("sim", "train", "purify", "eval"))
    run("simulate", "--out", sim, "--phantom_count", 4, "--seed", 3, "--phantom_size", 32)
    run("train", "--out", train, "--manifest", sim / "manifest.json", "--steps", 30,
        "--seed", 3)
    run("purify", "--out", pur, "--manifest", sim / "manifest.json",
        "--checkpoint", train / "denoiser.ckpt", "--seed", 3, "--trace", "true")
    run("evaluate", "--out", ev, "--candidate_dir", pur / "purified",
        "--reference_dir", sim / "clean", "--baseline_dir", sim / "corrupted")
    return {name: (ev / name).read_bytes() for name in ("report.json", "report.tsv")}


def test_10_pipeline_reproducibility(tmp_path):
    with criterion(10, "simulate-train-purify-evaluate is byte-identical across runs"):
        first = _pipeline(tmp_path / "run1")
        second = _pipeline(tmp_path / "run2")
        assert first == second
        doc = json.loads(first["report.json"])
        assert doc["report_version"] == 1 and len(doc["images"]) == 4
