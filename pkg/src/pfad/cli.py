"""``pfad simulate|train|purify|evaluate --config <path> [--key value ...] --out <dir>``.

Exit codes: 0 success, 1 if any item failed, 2 on configuration errors.
"""

import argparse
import json
import logging
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import metrics
from .config import ConfigError, FIELD_TYPES, load_config
from .diffusion import OracleDenoiser, make_schedule, rescaled_schedule
from .imageio import (DatasetManifest, ManifestEntry, list_images, read_image,
                      write_image)
from .motion import RespiratoryParams, RigidMotionParams, params_from_dict, simulate
from .network import CheckpointError, ToyDenoiser, TrainConfig, train_toy_denoiser
from .phantom import PhantomSpec, child_seed, generate_phantom
from .purify import PurifyConfig, purify

log = logging.getLogger("pfad")

REPORT_VERSION = 1
EXIT_OK, EXIT_ITEM_FAILURE, EXIT_CONFIG = 0, 1, 2


def _workers(cfg):
    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


def _map(cfg, fn, items):
    """Apply ``fn`` to every item on a bounded pool, collecting exceptions."""
    def guarded(item):
        try:
            return fn(item), None
        except Exception as exc:  # reported per item, the batch carries on
            return None, exc

    with ThreadPoolExecutor(max_workers=_workers(cfg)) as pool:
        return list(pool.map(guarded, items))


def _schedule(cfg):
    if cfg.beta_start > 0 and cfg.beta_end > 0:
        return make_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    return rescaled_schedule(cfg.T)


def _stem(name):
    return os.path.splitext(name)[0]


# -- simulate ---------------------------------------------------------------

def sample_params(cfg, seed):
    if cfg.simulator == "rigid":
        return RigidMotionParams.sample(
            seed, (cfg.delta_min, cfg.delta_max),
            (-cfg.rotation_max_deg, cfg.rotation_max_deg),
            cfg.k0, cfg.pixel_spacing_cm)
    return RespiratoryParams.sample(
        seed, (cfg.resp_delta_min, cfg.resp_delta_max),
        (cfg.resp_period_min, cfg.resp_period_max),
        (0.0, cfg.resp_phase_max), cfg.k0, cfg.pixel_spacing_cm)


def cmd_simulate(cfg, out):
    ext = "." + cfg.image_format
    if cfg.input_dir:
        names = list_images(cfg.input_dir)
        if not names:
            raise ConfigError(f"no images found in {cfg.input_dir}")
        sources = [(_stem(n), lambda n=n: read_image(os.path.join(cfg.input_dir, n)))
                   for n in names]
    else:
        sources = []
        for i in range(cfg.phantom_count):
            spec = PhantomSpec(size=cfg.phantom_size, ellipse_count=cfg.phantom_ellipses,
                               seed=child_seed(cfg.seed, i))
            sources.append((f"phantom_{i:04d}", lambda spec=spec: generate_phantom(spec)))

    os.makedirs(os.path.join(out, "clean"), exist_ok=True)
    os.makedirs(os.path.join(out, "corrupted"), exist_ok=True)

    def one(job):
        i, (stem, load) = job
        clean_rel = os.path.join("clean", stem + ext)
        corrupt_rel = os.path.join("corrupted", stem + ext)
        write_image(os.path.join(out, clean_rel), load())
        # simulate from the stored copy so the manifest regenerates bit-identically
        clean = read_image(os.path.join(out, clean_rel))
        seed = child_seed(cfg.seed + 1, i)
        params = sample_params(cfg, seed)
        corrupted = simulate(clean, cfg.simulator, params, cfg.phase_axis)
        write_image(os.path.join(out, corrupt_rel), corrupted)
        return ManifestEntry(clean_rel, corrupt_rel, cfg.simulator, params.to_dict(), seed)

    results = _map(cfg, one, list(enumerate(sources)))
    manifest = DatasetManifest([e for e, err in results if err is None])
    manifest.save(os.path.join(out, "manifest.json"))
    failures = [(s[0], err) for s, (_, err) in zip(sources, results) if err is not None]
    for stem, err in failures:
        log.error("simulate %s: %s", stem, err)
    print(f"simulated {len(manifest.entries)} images into {out}")
    return EXIT_ITEM_FAILURE if failures else EXIT_OK


def regenerate_corrupted(entry, axis=0):
    """Recompute an entry's corrupted image from its recorded parameters."""
    params = params_from_dict(entry.kind, entry.params)
    return simulate(read_image(entry.clean_path), entry.kind, params, axis)


# -- train ------------------------------------------------------------------

def _training_corpus(cfg):
    if cfg.manifest:
        return np.stack([read_image(e.clean_path)
                         for e in DatasetManifest.load(cfg.manifest).entries])
    if cfg.train_dir:
        return np.stack([read_image(os.path.join(cfg.train_dir, n))
                         for n in list_images(cfg.train_dir)])
    return np.stack([
        generate_phantom(PhantomSpec(size=cfg.phantom_size, ellipse_count=cfg.phantom_ellipses,
                                     seed=child_seed(cfg.seed + 2, i)))
        for i in range(cfg.train_count)])


def cmd_train(cfg, out):
    if cfg.steps <= 0:
        raise ConfigError("steps (training budget) must be positive")
    corpus = _training_corpus(cfg)
    schedule = _schedule(cfg)
    result = train_toy_denoiser(corpus, schedule, TrainConfig(
        steps=cfg.steps, batch_size=cfg.batch_size, lr=cfg.lr, seed=cfg.seed,
        base_channels=cfg.base_channels, holdout_fraction=cfg.holdout_fraction))
    os.makedirs(out, exist_ok=True)
    result.denoiser.save(os.path.join(out, "denoiser.ckpt"))
    with open(os.path.join(out, "train_log.tsv"), "w") as fh:
        fh.write("step\theldout_loss\n")
        for step, loss in result.history:
            fh.write(f"{step}\t{loss:.6f}\n")
    print(f"initial held-out loss {result.initial_loss:.6f}")
    print(f"final held-out loss {result.final_loss:.6f}")
    return EXIT_OK


# -- purify -----------------------------------------------------------------

def _purify_inputs(cfg):
    """List of (name, input path, reference path or None)."""
    if cfg.manifest:
        return [(os.path.basename(e.corrupted_path), e.corrupted_path, e.clean_path)
                for e in DatasetManifest.load(cfg.manifest).entries]
    if not cfg.input_dir:
        raise ConfigError("purify needs input_dir or manifest")
    items = []
    for n in list_images(cfg.input_dir):
        ref = os.path.join(cfg.reference_dir, n) if cfg.reference_dir else None
        items.append((n, os.path.join(cfg.input_dir, n), ref))
    return items


def cmd_purify(cfg, out):
    if cfg.oracle:
        schedule, shared = _schedule(cfg), None
    else:
        if not cfg.checkpoint:
            raise ConfigError("purify needs checkpoint or oracle = true")
        try:
            shared = ToyDenoiser.load(cfg.checkpoint)
        except (OSError, CheckpointError) as exc:
            raise ConfigError(str(exc)) from None
        schedule = shared.schedule
    pcfg = PurifyConfig(
        T=schedule.T, a=cfg.a, cutoff=cfg.cutoff, grid_size=cfg.grid_size,
        phase_axis=cfg.phase_axis, seed=cfg.seed,
        gamma_override=cfg.gamma_override if cfg.gamma_override >= 0 else None,
        mask_mode=cfg.mask_mode, weight_freq=cfg.weight_freq,
        weight_pixel=cfg.weight_pixel, trace=cfg.trace)

    items = _purify_inputs(cfg)
    os.makedirs(os.path.join(out, "purified"), exist_ok=True)
    if cfg.trace:
        os.makedirs(os.path.join(out, "traces"), exist_ok=True)

    def one(job):
        index, (name, path, ref_path) = job
        x = read_image(path)
        ref = read_image(ref_path) if ref_path and os.path.exists(ref_path) else None
        if cfg.oracle:
            target = (read_image(os.path.join(cfg.oracle_target_dir, name))
                      if cfg.oracle_target_dir else x)
            if target.shape != x.shape:
                raise ValueError(f"oracle target shape {target.shape} != input {x.shape}")
            den = OracleDenoiser(target, schedule)
        else:
            den = shared
        y, trace = purify(x, pcfg, schedule, den, reference=ref, index_offset=index)
        write_image(os.path.join(out, "purified", name), y)
        if trace is not None:
            with open(os.path.join(out, "traces", _stem(name) + ".tsv"), "w") as fh:
                fh.write(trace.to_tsv())
        if ref is None:
            return name, None
        return name, (metrics.psnr(x, ref), metrics.psnr(y, ref))

    results = _map(cfg, one, list(enumerate(items)))
    failed = 0
    rows = []
    for (name, _, _), (res, err) in zip(items, results):
        if err is not None:
            failed += 1
            log.error("purify %s: %s", name, err)
        elif res[1] is not None:
            rows.append((name, *res[1]))
    if rows:
        with open(os.path.join(out, "purify_report.tsv"), "w") as fh:
            fh.write("name\tpsnr_input\tpsnr_output\tpsnr_gain\n")
            for name, before, after in rows:
                fh.write(f"{name}\t{before:.6f}\t{after:.6f}\t{after - before:.6f}\n")
    print(f"purified {len(items) - failed}/{len(items)} images into {out}")
    return EXIT_ITEM_FAILURE if failed else EXIT_OK


# -- evaluate ---------------------------------------------------------------

METRIC_NAMES = ("psnr", "ssim", "gmsd")


def _score_dir(cfg, cand_dir, ref_dir, names):
    def one(name):
        return metrics.evaluate_pair(read_image(os.path.join(cand_dir, name)),
                                     read_image(os.path.join(ref_dir, name)))
    return _map(cfg, one, names)


def cmd_evaluate(cfg, out):
    if not (cfg.candidate_dir and cfg.reference_dir):
        raise ConfigError("evaluate needs candidate_dir and reference_dir")
    cand = set(list_images(cfg.candidate_dir))
    ref = set(list_images(cfg.reference_dir))
    errors = [f"missing in candidate_dir: {n}" for n in sorted(ref - cand)]
    errors += [f"missing in reference_dir: {n}" for n in sorted(cand - ref)]
    names = sorted(cand & ref)

    per_image = {}
    for name, (rep, err) in zip(names, _score_dir(cfg, cfg.candidate_dir, cfg.reference_dir, names)):
        if err is not None:
            errors.append(f"{name}: {err}")
        else:
            per_image[name] = rep

    baseline = {}
    if cfg.baseline_dir:
        base_names = sorted(set(list_images(cfg.baseline_dir)) & ref)
        for name, (rep, err) in zip(base_names, _score_dir(cfg, cfg.baseline_dir, cfg.reference_dir, base_names)):
            if err is not None:
                errors.append(f"baseline {name}: {err}")
            else:
                baseline[name] = rep

    doc = build_report(per_image, baseline, errors)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, "report.tsv"), "w") as fh:
        fh.write(report_tsv(doc))
    for e in errors:
        log.error("evaluate: %s", e)
    if doc["mean"]:
        m = doc["mean"]
        print(f"mean psnr {m['psnr']:.4f} ssim {m['ssim']:.4f} gmsd {m['gmsd']:.4f} over {len(per_image)} images")
    return EXIT_ITEM_FAILURE if errors else EXIT_OK


def _rep_dict(rep):
    return {"psnr": rep.psnr, "ssim": rep.ssim, "gmsd": rep.gmsd, "total": rep.total}


def build_report(per_image, baseline=None, errors=()):
    """Versioned report document.

    Fields: ``report_version``; ``psnr_cap_db``; ``images`` (name -> psnr,
    ssim, gmsd, total); ``mean`` (same fields over all images, or null);
    ``baseline_mean``; ``u_tests`` (metric -> u_statistic, p_value, n1, n2,
    method) comparing candidate against baseline per-image values;
    ``errors`` (list of strings).
    """
    baseline = baseline or {}
    doc = {
        "report_version": REPORT_VERSION,
        "psnr_cap_db": metrics.PSNR_CAP,
        "images": {n: _rep_dict(r) for n, r in sorted(per_image.items())},
        "mean": _rep_dict(metrics.corpus_mean(per_image.values())) if per_image else None,
        "baseline_mean": _rep_dict(metrics.corpus_mean(baseline.values())) if baseline else None,
        "u_tests": {},
        "errors": list(errors),
    }
    if per_image and baseline:
        for key in METRIC_NAMES:
            res = metrics.mann_whitney_u([getattr(r, key) for r in per_image.values()],
                                         [getattr(r, key) for r in baseline.values()])
            doc["u_tests"][key] = {"u_statistic": res.u_statistic, "p_value": res.p_value,
                                   "n1": res.n1, "n2": res.n2, "method": res.method}
    return doc


def report_tsv(doc):
    lines = ["name\tpsnr\tssim\tgmsd\ttotal"]
    rows = list(doc["images"].items())
    if doc["mean"]:
        rows.append(("MEAN", doc["mean"]))
    if doc["baseline_mean"]:
        rows.append(("BASELINE_MEAN", doc["baseline_mean"]))
    for name, r in rows:
        lines.append(f"{name}\t{r['psnr']:.6f}\t{r['ssim']:.6f}\t{r['gmsd']:.6f}\t{r['total']:.6f}")
    for key, t in doc["u_tests"].items():
        lines.append(f"UTEST_{key}\tU={t['u_statistic']:.1f}\tp={t['p_value']:.6g}\t"
                     f"n1={t['n1']}\tn2={t['n2']}")
    return "\n".join(lines) + "\n"


# -- entry point ------------------------------------------------------------

COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "purify": cmd_purify,
    "evaluate": cmd_evaluate,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="pfad", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    group = parser.add_argument_group("configuration overrides")
    for key in FIELD_TYPES:
        flags = {f"--{key}", f"--{key.replace('_', '-')}"}
        group.add_argument(*sorted(flags), dest=f"cfg_{key}", metavar="VALUE",
                           default=argparse.SUPPRESS)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_")}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"pfad: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
