"""Command-line interface.

Subcommands cover the whole workflow: ingest a corpus, generate aspect
datasets, train scorers and the mask ensemble, run single stages on one
image, run the full pipeline over a panorama collection, and report.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or a
missing artifact.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import dataset as ds
from . import dramatic, enhance, learner, pipeline, report, scoring, synthetic
from .cropsearch import CropSearchGrid, crop_image, search_crops
from .filters import FilterId
from .panorama import load_manifest, load_panorama
from .raster import load_image, save_png

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _fail_config(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_CONFIG


def _require(path, what: str) -> Path | None:
    p = Path(path)
    if not p.exists():
        return None
    return p


IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


def cmd_ingest(args) -> int:
    src = Path(args.images)
    if src.is_dir():
        paths = sorted(p for p in src.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    elif src.exists():
        paths = [src]
    else:
        return _fail_config(f"no such image source: {src}")
    if not paths:
        return _fail_config(f"no images found under {src}")
    corpus = ds.ingest_corpus(paths, manifest_id=args.id, training_size=args.size)
    if args.min_saturation > 0:
        corpus = ds.filter_corpus_by_saturation(corpus, args.min_saturation)
    ds.save_corpus_manifest(corpus, args.out)
    print(f"corpus {args.id}: kept {len(corpus)} of {len(paths)} images -> {args.out}")
    return EXIT_OK


def cmd_gen_data(args) -> int:
    manifest = _require(args.corpus, "corpus manifest")
    if manifest is None:
        return _fail_config(f"missing corpus manifest: {args.corpus}")
    corpus = ds.load_corpus_manifest(manifest)
    examples = scoring.build_aspect_dataset(corpus, args.aspect, args.seed)
    index = ds.save_dataset(examples, args.out)
    print(f"wrote {len(examples)} examples -> {index}")
    return EXIT_OK


def cmd_train(args) -> int:
    data_dir = _require(args.data, "dataset directory")
    if data_dir is None:
        return _fail_config(f"missing dataset directory: {args.data}")
    examples = ds.load_dataset(data_dir)
    cfg = learner.TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        hidden_sizes=tuple(args.hidden),
    )
    model = learner.train(examples, cfg)
    size = examples[0].image.width
    scorer = scoring.AspectScorer(args.aspect, model, size)
    scoring.save_scorer(
        scorer,
        args.out,
        metadata={
            "seed": args.seed,
            "dataset": str(data_dir),
            "dataset_hash": scoring.dataset_fingerprint(examples),
            "config": {
                "learning_rate": cfg.learning_rate,
                "epochs": cfg.epochs,
                "batch_size": cfg.batch_size,
                "hidden_sizes": list(cfg.hidden_sizes),
            },
        },
    )
    print(f"trained {args.aspect} scorer on {len(examples)} examples, final mse {model.train_log[-1]:.6f} -> {args.out}")
    return EXIT_OK


def cmd_train_mask(args) -> int:
    manifest = _require(args.corpus, "corpus manifest")
    if manifest is None:
        return _fail_config(f"missing corpus manifest: {args.corpus}")
    overall_path = _require(args.overall, "overall scorer")
    if overall_path is None:
        return _fail_config(f"missing overall scorer: {args.overall}")
    corpus = ds.load_corpus_manifest(manifest)
    overall = scoring.load_scorer(overall_path)
    cfg = dramatic.GanConfig(
        batch_size=args.batch_size,
        lr_generator=args.lr_generator,
        lr_discriminator=args.lr_discriminator,
        brighten_amount=args.brighten,
        seed=args.seed,
    )
    ensemble = dramatic.train_ensemble(
        corpus,
        n_models=args.models,
        steps=args.steps,
        snapshot_interval=args.interval,
        cfg=cfg,
        overall_scorer=overall,
        keep_top=args.keep,
    )
    manifest_path = dramatic.save_ensemble(ensemble, args.out)
    kept = ", ".join(f"{s.snapshot_id}({s.contribution})" for s in ensemble.snapshots)
    print(f"kept {len(ensemble.snapshots)} snapshots [{kept}] -> {manifest_path}")
    return EXIT_OK


def _load_scorer_or_none(path):
    p = _require(path, "scorer")
    return None if p is None else scoring.load_scorer(p)


def cmd_crop(args) -> int:
    img_path = _require(args.image, "image")
    if img_path is None:
        return _fail_config(f"missing image: {args.image}")
    composition = _load_scorer_or_none(args.composition)
    overall = _load_scorer_or_none(args.overall)
    if composition is None:
        return _fail_config(f"missing composition scorer: {args.composition}")
    if overall is None:
        return _fail_config(f"missing overall scorer: {args.overall}")
    img = load_image(img_path)
    result = search_crops(
        img, args.weight, args.k, CropSearchGrid(), composition, overall, args.train_size
    )
    for i, sc in enumerate(result.crops):
        w = sc.window
        print(
            f"{i}: {w.w}x{w.h}+{w.x}+{w.y} hybrid={sc.hybrid_score:.4f} "
            f"(composition={sc.composition_score:.4f}, overall={sc.overall_score:.4f})"
        )
        if args.out:
            out_dir = Path(args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            save_png(crop_image(img, w), out_dir / f"crop_{i}.png")
    if result.short_count:
        print(f"note: only {len(result.crops)} of {args.k} distinct windows available")
    return EXIT_OK


def cmd_enhance(args) -> int:
    img_path = _require(args.image, "image")
    if img_path is None:
        return _fail_config(f"missing image: {args.image}")
    scorer = _load_scorer_or_none(args.scorer)
    if scorer is None:
        return _fail_config(f"missing scorer: {args.scorer}")
    img = load_image(img_path)
    grid = _grid_for(args.filter, args.grid)
    result = enhance.optimize_filter_1d(img, grid, scorer)
    print(f"best {args.filter} parameter: {result.best_value:g} (score {result.best_score:.4f})")
    for value, score in result.trace:
        print(f"  {value:g}\t{score:.6f}")
    if args.out:
        save_png(result.best_image, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _grid_for(filter_name: str, grid_arg: str | None) -> enhance.SearchGrid:
    filter_id = FilterId(filter_name)
    if grid_arg:
        values = tuple(float(v) for v in grid_arg.split(","))
        return enhance.SearchGrid(filter_id, values)
    if filter_id is FilterId.SATURATION:
        return enhance.saturation_search_grid()
    if filter_id is FilterId.HDR:
        return enhance.hdr_search_grid()
    raise ValueError(f"no default grid for filter {filter_name}; pass --grid")


def cmd_dramatic(args) -> int:
    img_path = _require(args.image, "image")
    if img_path is None:
        return _fail_config(f"missing image: {args.image}")
    ensemble_path = _require(args.ensemble, "ensemble")
    if ensemble_path is None:
        return _fail_config(f"missing mask ensemble: {args.ensemble}")
    overall = _load_scorer_or_none(args.overall)
    if overall is None:
        return _fail_config(f"missing overall scorer: {args.overall}")
    img = load_image(img_path)
    ensemble = dramatic.load_ensemble(ensemble_path)
    choice = dramatic.best_dramatic(img, ensemble, overall, brighten_amount=args.brighten)
    save_png(choice.image, args.out)
    print(f"snapshot {choice.snapshot_id} (overall {choice.overall_score:.4f}) -> {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    from dataclasses import replace

    cfg = pipeline.PipelineConfig()
    cfg_dir = None
    if args.config:
        cfg_path = _require(args.config, "config")
        if cfg_path is None:
            return _fail_config(f"missing config file: {args.config}")
        cfg = pipeline.load_config(cfg_path)
        cfg_dir = cfg_path.parent
    overrides = {}
    for name in ("seed", "view_size", "training_size"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if overrides:
        cfg = replace(cfg, **overrides)
    manifest = _require(args.panoramas, "panorama manifest")
    if manifest is None:
        return _fail_config(f"missing panorama manifest: {args.panoramas}")
    # Model paths come from the config's `models` block; flags override.
    model_paths = dict(cfg.model_paths)
    if cfg_dir is not None:
        model_paths = {
            k: str(p if (p := Path(v)).is_absolute() else cfg_dir / v)
            for k, v in model_paths.items()
        }
    for name in ("composition", "saturation", "hdr", "overall", "ensemble"):
        flag = getattr(args, name)
        if flag is not None:
            model_paths[name] = flag
    missing = [n for n in ("composition", "saturation", "hdr", "overall", "ensemble") if n not in model_paths]
    if missing:
        return _fail_config(f"no path given for: {', '.join(missing)} (flags or config models block)")
    try:
        bundle = pipeline.load_bundle(model_paths)
    except FileNotFoundError as exc:
        return _fail_config(str(exc))
    pano_paths = load_manifest(manifest)
    if not pano_paths:
        return _fail_config(f"panorama manifest {manifest} lists no panoramas")
    panoramas = []
    for path in pano_paths:
        try:
            panoramas.append((Path(path).stem, load_panorama(path)))
        except (OSError, ValueError) as exc:
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
    if not panoramas:
        return _fail_config("no readable panoramas in the collection")
    candidates, stats = pipeline.run_pipeline(panoramas, bundle, cfg)
    manifest_path = report.emit_gallery(candidates, args.out)
    print(
        f"{stats.panoramas} panoramas, {stats.views} views, "
        f"{stats.candidates_before_dedupe} candidates, {stats.survivors} kept -> {manifest_path}"
    )
    return EXIT_OK


def cmd_rank(args) -> int:
    overall = _load_scorer_or_none(args.overall)
    if overall is None:
        return _fail_config(f"missing overall scorer: {args.overall}")
    rows = []
    for path in args.images:
        p = _require(path, "image")
        if p is None:
            return _fail_config(f"missing image: {path}")
        rows.append((str(path), overall.score(load_image(p))))
    percentiles = scoring.rank_to_percentile([score for _, score in rows])
    mapping = scoring.ScaleMapping(args.scale_a, args.scale_b)
    ranked = sorted(zip(rows, percentiles), key=lambda t: -t[0][1])
    for (path, score), pct in ranked:
        level = scoring.predicted_level(mapping, score)
        print(f"{score:.4f}\tpct={pct:.3f}\tlevel={level:.2f}\t{path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    img_path = _require(args.image, "image")
    if img_path is None:
        return _fail_config(f"missing image: {args.image}")
    scorers = {}
    for spec in args.scorers:
        name, _, path = spec.partition("=")
        if not path:
            return _fail_config(f"scorer spec {spec!r} must look like name=path")
        p = _require(path, "scorer")
        if p is None:
            return _fail_config(f"missing scorer: {path}")
        scorers[name] = scoring.load_scorer(p)
    if not scorers:
        return _fail_config("no scorers given")
    img = load_image(img_path)
    filter_id = FilterId(args.filter)
    if args.grid:
        values = [float(v) for v in args.grid.split(",")]
        rows = enhance.sweep_at_values(img, filter_id, values, scorers)
    else:
        rows = enhance.sweep_filter(img, filter_id, args.points, scorers)
    enhance.write_sweep_csv(rows, args.out)
    print(f"wrote {len(rows)} sweep rows -> {args.out}")
    return EXIT_OK


def cmd_fit_scale(args) -> int:
    ratings_path = _require(args.ratings, "ratings csv")
    if ratings_path is None:
        return _fail_config(f"missing ratings csv: {args.ratings}")
    scores_path = _require(args.scores, "scores csv")
    if scores_path is None:
        return _fail_config(f"missing scores csv: {args.scores}")
    records = scoring.read_ratings_csv(ratings_path)
    means = scoring.consensus(records).per_image
    pairs = []
    with open(scores_path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() == "image_id":
                continue
            image_id, score = row[0].strip(), float(row[1])
            if image_id in means:
                pairs.append((score, means[image_id][0]))
    if len(pairs) < 2:
        return _fail_config("fewer than two (score, rating) pairs after joining the files")
    mapping = scoring.fit_scale_mapping(pairs)
    out = {"a": mapping.a, "b": mapping.b, "degenerate": mapping.degenerate}
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_report(args) -> int:
    manifest = _require(args.manifest, "manifest")
    if manifest is None:
        return _fail_config(f"missing manifest: {args.manifest}")
    index = report.regenerate_report(manifest, args.out)
    print(f"wrote {index}")
    return EXIT_OK


def cmd_make_fixtures(args) -> int:
    paths = synthetic.write_fixture_tree(
        args.out,
        n_corpus=args.corpus,
        n_panoramas=args.panoramas,
        seed=args.seed,
        size=args.size,
        pano_height=args.pano_height,
    )
    print(f"corpus manifest: {paths['corpus']}")
    print(f"panorama manifest: {paths['panoramas']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vphoto", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a corpus manifest from images")
    p.add_argument("--images", required=True, help="image file or directory")
    p.add_argument("--out", required=True)
    p.add_argument("--id", default="corpus")
    p.add_argument("--size", type=int, default=ds.DEFAULT_TRAINING_SIZE)
    p.add_argument("--min-saturation", type=float, default=ds.DEFAULT_MIN_SATURATION)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gen-data", help="generate an aspect training dataset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--aspect", required=True, choices=scoring.ASPECTS)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train an aspect scorer from a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--aspect", required=True, choices=scoring.ASPECTS)
    p.add_argument("--out", required=True)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--hidden", type=int, nargs="*", default=[64])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-mask", help="train the dramatic mask ensemble")
    p.add_argument("--corpus", required=True)
    p.add_argument("--overall", required=True, help="overall scorer used for pruning")
    p.add_argument("--out", required=True)
    p.add_argument("--models", type=int, default=3)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--interval", type=int, default=50)
    p.add_argument("--keep", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr-generator", type=float, default=0.01)
    p.add_argument("--lr-discriminator", type=float, default=0.02)
    p.add_argument("--brighten", type=float, default=dramatic.DEFAULT_BRIGHTEN_AMOUNT)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_mask)

    p = sub.add_parser("crop", help="find the best crops of one image")
    p.add_argument("--image", required=True)
    p.add_argument("--composition", required=True)
    p.add_argument("--overall", required=True)
    p.add_argument("--weight", type=float, default=0.5, help="composition weight c")
    p.add_argument("-k", type=int, default=3)
    p.add_argument("--train-size", type=int, default=ds.DEFAULT_TRAINING_SIZE)
    p.add_argument("--out", help="directory for cropped images")
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("enhance", help="1-d filter search on one image")
    p.add_argument("--image", required=True)
    p.add_argument("--scorer", required=True)
    p.add_argument("--filter", required=True, choices=[f.value for f in FilterId])
    p.add_argument("--grid", help="comma-separated parameter values")
    p.add_argument("--out", help="write the enhanced image here")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("dramatic", help="apply the best ensemble mask to one image")
    p.add_argument("--image", required=True)
    p.add_argument("--ensemble", required=True)
    p.add_argument("--overall", required=True)
    p.add_argument("--brighten", type=float, default=dramatic.DEFAULT_BRIGHTEN_AMOUNT)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dramatic)

    p = sub.add_parser("run", help="run the full pipeline over a panorama collection")
    p.add_argument("--panoramas", required=True, help="panorama manifest file")
    p.add_argument("--composition", help="scorer path (overrides config)")
    p.add_argument("--saturation", help="scorer path (overrides config)")
    p.add_argument("--hdr", help="scorer path (overrides config)")
    p.add_argument("--overall", help="scorer path (overrides config)")
    p.add_argument("--ensemble", help="ensemble dir (overrides config)")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--view-size", type=int, dest="view_size")
    p.add_argument("--training-size", type=int, dest="training_size")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rank", help="rank images by overall score")
    p.add_argument("--overall", required=True)
    p.add_argument("--scale-a", type=float, default=3.0)
    p.add_argument("--scale-b", type=float, default=1.0)
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("sweep", help="score curves along one filter parameter")
    p.add_argument("--image", required=True)
    p.add_argument("--filter", required=True, choices=[f.value for f in FilterId])
    p.add_argument("--scorers", nargs="+", required=True, help="name=path pairs")
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--grid", help="comma-separated parameter values")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit-scale", help="fit the aesthetic scale mapping")
    p.add_argument("--ratings", required=True, help="image_id,rater_id,score csv")
    p.add_argument("--scores", required=True, help="image_id,overall_score csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_scale)

    p = sub.add_parser("report", help="regenerate the gallery from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("make-fixtures", help="write synthetic corpus and panoramas")
    p.add_argument("--out", required=True)
    p.add_argument("--corpus", type=int, default=20)
    p.add_argument("--panoramas", type=int, default=3)
    p.add_argument("--size", type=int, default=ds.DEFAULT_TRAINING_SIZE)
    p.add_argument("--pano-height", type=int, default=256)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_make_fixtures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
