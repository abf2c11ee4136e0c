"""Command-line entry point: ``parce <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .competency import CompetencyEstimator, calibrate
from .config import CLASS_NAMES, VARIANTS, load_settings
from .data import build_corpus, ood_scenes, read_manifest, write_corpus
from .errors import ParceError
from .metrics import summarize
from .navigation import EpisodeLog, EpisodeResult, builtin_scenario, load_scenario, run_benchmark, run_episode
from .perception import Classifier, train_classifier
from .pipeline import build_estimator, load_estimator, save_estimator
from .reconstruction import LinearAutoencoder, fit_autoencoder
from .world import sky_mask

log = logging.getLogger("parce")


def _settings(args):
    return load_settings(args.config, args.seed)


def cmd_gen_data(args):
    s = _settings(args)
    d = s.data
    corpus = build_corpus(d.tiles_per_class, s.seed, s.camera, d.test_fraction, d.holdout_fraction)
    manifest = write_corpus(corpus, args.out)
    print(f"wrote {len(corpus.train)} train, {len(corpus.holdout)} holdout, {len(corpus.test)} test tiles -> {manifest}")
    n_ood = d.n_ood if args.ood is None else args.ood
    if n_ood > 0:
        ood = ood_scenes(n_ood, s.seed + 1, s.camera)
        out = Path(args.out) / "ood"
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for i, (img, mask) in enumerate(zip(ood.images, ood.masks)):
            io.write_ppm(out / f"ood_{i:04d}.ppm", img)
            io.write_pgm(out / f"ood_{i:04d}_mask.pgm", mask.astype(float))
            rows.append((f"ood/ood_{i:04d}.ppm", f"ood/ood_{i:04d}_mask.pgm", int(ood.terrain[i])))
        io.write_csv(Path(args.out) / "ood_manifest.csv", ("ppm_path", "mask_path", "terrain_id"), rows)
        print(f"wrote {n_ood} OOD composites -> {out}")
    return 0


def cmd_train(args):
    s = _settings(args)
    data = read_manifest(args.manifest)
    d = s.data
    hist = []
    clf = train_classifier(data["train"], d.epochs, d.learning_rate, s.seed, d.l2, CLASS_NAMES, len(CLASS_NAMES), hist)
    clf.save(args.out)
    for split, ds in data.items():
        acc = np.mean(np.argmax(clf.logits(ds.images), axis=1) == ds.labels)
        print(f"{split} accuracy {acc:.4f}")
    print(f"final training loss {hist[-1]:.6f}; classifier -> {args.out}")
    return 0


def cmd_fit_ae(args):
    s = _settings(args)
    data = read_manifest(args.manifest)
    ae = fit_autoencoder(data["train"], args.rank or s.data.rank, s.seed)
    ae.save(args.out)
    print(f"autoencoder rank {ae.basis.shape[1]} -> {args.out}")
    return 0


def cmd_calibrate(args):
    s = _settings(args)
    data = read_manifest(args.manifest)
    ae = LinearAutoencoder.load(args.ae)
    model = calibrate(
        ae,
        data["holdout"],
        args.mode,
        s.segmentation,
        sky_mask(s.camera) if args.mode == "regional" else None,
        len(CLASS_NAMES),
        s.competency.sigma_min,
        s.competency.context_trim or None,
    )
    model.save_csv(args.out)
    for c, (m, sd, n) in enumerate(zip(model.mu, model.sigma, model.n_samples)):
        print(f"class {c} ({CLASS_NAMES[c]}): mu={m:.6g} sigma={sd:.6g} n={n}")
    return 0


def _estimator(args, s):
    if args.models:
        return load_estimator(args.models, s)
    log.info("no --models directory given; training a fresh bundle")
    return build_estimator(s)


def cmd_build_models(args):
    s = _settings(args)
    est = build_estimator(s)
    save_estimator(est, args.out)
    print(f"model bundle -> {args.out}")
    return 0


def cmd_score(args):
    s = _settings(args)
    est = _estimator(args, s)
    img = io.read_ppm(args.image)
    rec = est.score(img, regional=est.regional_model is not None)
    print(f"overall {rec.overall:.6f}")
    print(f"predicted {CLASS_NAMES[rec.posterior.predicted]} p={rec.posterior.confidence:.6f} loss={rec.loss:.6g}")
    if rec.regional is not None:
        out = Path(args.map or Path(args.image).with_suffix(".map.pgm"))
        io.write_pgm(out, rec.regional)
        if args.csv:
            h, w = rec.regional.shape
            rows = [(r, c, repr(float(rec.regional[r, c]))) for r in range(h) for c in range(w)]
            io.write_csv(args.csv, ("row", "col", "competency"), rows)
        print(f"regional map -> {out} ({rec.segments.n_segments} segments, min {rec.regional.min():.4f})")
    return 0


def _scenario(arg):
    p = Path(arg)
    return load_scenario(p) if p.suffix == ".ini" or p.exists() else builtin_scenario(int(arg))


def cmd_navigate(args):
    s = _settings(args)
    if args.variant not in VARIANTS:
        raise ParceError(f"variant must be one of {VARIANTS}")
    sc = _scenario(args.scenario)
    est = _estimator(args, s) if args.variant != "baseline" else None
    elog = EpisodeLog()
    res = run_episode(sc, args.variant, est, s.seed, s, elog, overlay_every=args.overlay_every)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = f"# scenario analog {sc.scenario_id} ({sc.name}); geometry is a synthetic stand-in\n"
    io.write_csv(out / "episode.csv", EpisodeResult.FIELDS, [res.row()], comment=header)
    states = np.array(elog.states)
    inputs = np.array(elog.inputs + [(np.nan, np.nan)])
    rows = [(k, *(repr(float(v)) for v in st), *(repr(float(v)) for v in u)) for k, (st, u) in enumerate(zip(states, inputs))]
    io.write_csv(out / "trajectory.csv", ("k", "x", "y", "theta", "v", "omega", "t", "s"), rows)
    if elog.plans:
        keys = list(elog.plans[0])
        io.write_csv(out / "plans.csv", keys, [[p[k] for k in keys] for p in elog.plans])
    for step_i, img in elog.overlays:
        io.write_ppm(out / f"overlay_{step_i:05d}.ppm", img)
    print(
        f"{res.outcome}: collided={res.collided} time={res.nav_time:.1f}s "
        f"path={res.path_length:.2f}m maneuvers={res.n_maneuvers} -> {out}"
    )
    return 0


def cmd_benchmark(args):
    s = _settings(args)
    est = _estimator(args, s)
    scen = [_scenario(a) for a in args.scenarios] if args.scenarios else (1, 2, 3, 4, 5)
    variants = tuple(args.variants) if args.variants else VARIANTS

    def progress(r, dt):
        log.info("scenario %s %-20s seed %d: %s collided=%d (%.2fs)", r.scenario_id, r.variant, r.seed, r.outcome, r.collided, dt)

    table = run_benchmark(scen, variants, args.trials, est, s, s.seed, progress)
    table.write(args.out)
    print(table.format())
    print(f"tables -> {args.out}")
    return 0


def _scores(path, column):
    rows = io.read_csv(path)
    if not rows:
        raise ParceError(f"{path}: no rows")
    col = column if column in rows[0] else list(rows[0])[-1]
    return np.array([float(r[col]) for r in rows])


def cmd_metrics(args):
    pos = _scores(args.pos, args.column)
    neg = _scores(args.neg, args.column)
    m = summarize(pos, neg)
    io.write_csv(args.out, ("ks", "auroc", "fpr95"), [(m["ks"], m["auroc"], m["fpr95"])]) if args.out else None
    print(f"ks {m['ks']:.6f}\nauroc {m['auroc']:.6f}\nfpr95 {m['fpr95']:.6f}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="parce", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="INI settings file")
        sp.add_argument("--seed", type=int, help="overrides [run] seed")
        sp.set_defaults(fn=fn)
        return sp

    sp = add("gen-data", cmd_gen_data, "generate the tile corpus and OOD composites")
    sp.add_argument("--out", required=True)
    sp.add_argument("--ood", type=int, help="number of OOD composites (default from config)")

    sp = add("train", cmd_train, "train the classifier from a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)

    sp = add("fit-ae", cmd_fit_ae, "fit the linear autoencoder")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--rank", type=int)

    sp = add("calibrate", cmd_calibrate, "fit per-class loss statistics on the holdout split")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--ae", required=True)
    sp.add_argument("--mode", choices=("overall", "regional"), default="overall")
    sp.add_argument("--out", required=True)

    sp = add("build-models", cmd_build_models, "generate data, train and calibrate in one go")
    sp.add_argument("--out", required=True)

    sp = add("score", cmd_score, "score one PPM image")
    sp.add_argument("image")
    sp.add_argument("--models", help="directory written by build-models")
    sp.add_argument("--map", help="output PGM for the regional map")
    sp.add_argument("--csv", help="optional CSV of exact per-pixel values")

    sp = add("navigate", cmd_navigate, "run one closed-loop episode")
    sp.add_argument("--scenario", required=True, help="scenario id 1-5 or an INI path")
    sp.add_argument("--variant", required=True, choices=VARIANTS)
    sp.add_argument("--models")
    sp.add_argument("--out", default="episode_out")
    sp.add_argument("--overlay-every", type=int, default=1, help="write an overlay every N planning cycles (0 = none)")

    sp = add("benchmark", cmd_benchmark, "run the scenario x variant benchmark")
    sp.add_argument("--models")
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--scenarios", nargs="*")
    sp.add_argument("--variants", nargs="*", choices=VARIANTS)
    sp.add_argument("--out", default="benchmark_out")

    sp = add("metrics", cmd_metrics, "KS / AUROC / FPR@95 between two score CSVs")
    sp.add_argument("--pos", required=True, help="scores of the group to detect (lower = detected)")
    sp.add_argument("--neg", required=True)
    sp.add_argument("--column", default="score")
    sp.add_argument("--out")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except ParceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
