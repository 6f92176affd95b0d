"""Operator command line.

Subcommands: slice, tune, run, compare, score, eval, serve. Exit codes are
0 for success, 1 for runtime errors, 2 for usage errors. Diagnostics go to
standard error at the level selected by the PALPS_LOG environment variable
(error|warn|info|debug); data goes to files or standard output only.

Run configuration is layered: command-line flags override the config file
(TOML or JSON), which overrides a named preset, which overrides defaults.
The fully resolved configuration is echoed into the run-log header, so every
run is self-describing. Seeds are mandatory for ``run`` and ``compare``;
there is no wall-clock fallback.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import tomli

from . import __version__
from .dataset import (
    ManifestError,
    compute_stats,
    downsample,
    load_manifest,
    manifest_to_dict,
    percentile,
    slice_tiles,
    tune_rpf_params,
)
from .detector import Detection, SyntheticDetector, SyntheticDetectorParams
from .engine import ActiveLearningEngine, EngineError, RunConfig, RunLog, canonical_json
from .evaluation import (
    curve_points,
    density_report_csv,
    emit_curves,
    evaluate_detections,
    hours_to_target,
    pearson_r,
    rmse,
)
from .geometry import BoundingBox
from .oracle import OracleConfig, annotate_type1
from .rng import stream
from .sampling import rpf as rpf_filter
from .sampling import (
    baseline_entropy,
    baseline_least_confidence,
    baseline_margin,
    max_ent_var,
    max_entropy,
    max_variance,
)

log = logging.getLogger("palps")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _configure_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("PALPS_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=target.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _tile_spec(text: str):
    try:
        w_text, h_text = text.lower().split("x", 1)
        w, h = float(w_text), float(h_text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError(f"tile dimensions must be positive, got {text!r}")
    return w, h


def _csv_list(text: str) -> list[str]:
    return [item for item in (part.strip() for part in text.split(",")) if item]


def load_preset(name: str) -> dict:
    path = resources.files("palps").joinpath("presets", f"{name}.json")
    try:
        preset = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        available = sorted(
            p.name.removesuffix(".json")
            for p in resources.files("palps").joinpath("presets").iterdir()
        )
        raise ValueError(f"unknown preset {name!r}; available: {available}")
    preset.pop("comment", None)
    return preset


def _load_config_file(path: str) -> dict:
    raw = Path(path).read_bytes()
    if path.endswith(".toml"):
        return tomli.loads(raw.decode("utf-8"))
    return json.loads(raw.decode("utf-8"))


def resolve_run_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> RunConfig:
    """Merge defaults < preset < config file < flags into a RunConfig."""
    merged: dict = {}
    if getattr(args, "preset", None):
        merged.update(load_preset(args.preset))
    if getattr(args, "config", None):
        merged.update(_load_config_file(args.config))
    flag_map = {
        "method": "method",
        "seed": "seed",
        "b_w": "b_w",
        "b_s": "b_s",
        "initial_labeled": "initial_labeled",
        "budget": "budget",
        "episode_cap": "episode_cap",
        "test_fraction": "test_fraction",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            merged[key] = value
    if getattr(args, "epsilon", None) is not None or getattr(args, "alpha", None) is not None:
        rpf_d = dict(merged.get("rpf") or {})
        if args.epsilon is not None:
            rpf_d["epsilon"] = args.epsilon
        if args.alpha is not None:
            rpf_d["alpha"] = args.alpha
        merged["rpf"] = rpf_d
    oracle_d = dict(merged.get("oracle") or {})
    if getattr(args, "oracle", None) is not None:
        oracle_d["mode"] = args.oracle
    if getattr(args, "click_jitter", None) is not None:
        oracle_d["click_jitter_frac"] = args.click_jitter
    if oracle_d:
        merged["oracle"] = oracle_d
    if merged.get("seed") is None:
        parser.error("a seed is required (--seed or the config file); runs must be reproducible")
    oracle_d = dict(merged.get("oracle") or {})
    oracle_d.setdefault("seed", merged["seed"])
    merged["oracle"] = oracle_d
    return RunConfig.from_dict(merged)


# --- subcommands -------------------------------------------------------------


def cmd_slice(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.input)
    if args.downsample != 1.0:
        manifest = downsample(manifest, args.downsample)
    if args.tile is not None:
        tile_w, tile_h = args.tile
        manifest = slice_tiles(manifest, tile_w, tile_h, args.partial)
    atomic_write_text(args.output, json.dumps(manifest_to_dict(manifest), indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.output} ({len(manifest.images)} images, {manifest.total_objects()} objects)")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    from .dataset import SyntheticConfig, generate_synthetic

    obj_lo, obj_hi = args.objects
    size_lo, size_hi = args.box_size
    diff_lo, diff_hi = args.difficulty
    config = SyntheticConfig(
        num_images=args.images,
        width=args.width,
        height=args.height,
        objects_per_image=(int(obj_lo), int(obj_hi)),
        box_size_range=(size_lo, size_hi),
        min_center_separation=args.min_separation,
        difficulty_range=(diff_lo, diff_hi),
        name=args.name,
    )
    manifest = generate_synthetic(config, seed=args.seed)
    atomic_write_text(args.output, json.dumps(manifest_to_dict(manifest), indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.output} ({len(manifest.images)} images, {manifest.total_objects()} objects)")
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.input)
    stats = compute_stats(manifest)
    params = tune_rpf_params(
        stats,
        eps_percentile=args.eps_percentile,
        alpha_percentile=args.alpha_percentile,
        rounding=args.rounding,
    )
    print(f"images: {len(manifest.images)}  objects: {len(stats.box_areas)}  "
          f"images with >=2 objects: {len(stats.min_pairwise_center_distances)}")
    print("percentile  min_center_distance  box_area")
    for p in range(0, 101, 10):
        d = percentile(stats.min_pairwise_center_distances, p)
        a = percentile(stats.box_areas, p)
        print(f"{p:>10d}  {d:>19.2f}  {a:>8.1f}")
    print(f"epsilon = {params.epsilon!r}  (percentile {args.eps_percentile}, rounding {args.rounding})")
    print(f"alpha = {params.alpha!r}  (percentile {args.alpha_percentile}, rounding {args.rounding})")
    return 0


def _run_paths(out_dir: str, config: RunConfig) -> tuple[Path, Path]:
    base = f"{config.method}_seed{config.seed}"
    out = Path(out_dir)
    return out / f"{base}.ndjson", out / f"{base}_curves.csv"


def _execute_run(
    config: RunConfig, manifest, log_path: Path, curves_path: Path, resume: bool = False
) -> RunLog:
    """Run one simulated-oracle episode loop, flushing the log per episode.

    With ``resume`` the existing log (final or ``.partial``) is replayed and
    the loop continues from the last complete episode; named-stream seeding
    makes the continuation identical to an uninterrupted run.
    """
    from .engine import manifest_digest, read_run_log

    engine = ActiveLearningEngine(config, manifest)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    partial = log_path.with_name(log_path.name + ".partial")
    prior: RunLog | None = None
    if resume:
        source = next((p for p in (log_path, partial) if p.exists()), None)
        if source is None:
            raise EngineError(f"nothing to resume at {log_path}")
        prior = read_run_log(source)

    with open(partial, "w", encoding="utf-8") as fh:
        preamble_done = False

        def write_preamble() -> None:
            nonlocal preamble_done
            if preamble_done:
                return
            if prior is not None:
                fh.write("\n".join(prior.to_lines()) + "\n")
            else:
                header = RunLog(
                    config=config.to_dict(),
                    manifest_sha256=manifest_digest(manifest),
                    initial_labeled_ids=engine.initial_ids,
                    test_ids=engine.test_ids,
                    episodes=[],
                ).header_dict()
                fh.write(canonical_json(header) + "\n")
            fh.flush()
            preamble_done = True

        def sink(entry) -> None:
            write_preamble()
            fh.write(entry.to_json_line() + "\n")
            fh.flush()

        run_log = engine.resume(prior, sink=sink) if prior is not None else engine.run(sink=sink)
        write_preamble()
    os.replace(partial, log_path)
    if run_log.episodes:
        atomic_write_text(curves_path, emit_curves(run_log.episodes))
    return run_log


def cmd_run(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = resolve_run_config(args, parser)
    manifest = load_manifest(args.manifest)
    log_path, curves_path = _run_paths(args.out, config)
    if config.oracle.mode == "human":
        return _run_human(args, config, manifest, log_path, curves_path)
    run_log = _execute_run(config, manifest, log_path, curves_path, resume=args.resume)
    final_map = run_log.episodes[-1].eval.get("map_at_50") if run_log.episodes else None
    print(f"wrote {log_path}")
    if run_log.episodes:
        print(f"wrote {curves_path}")
    print(f"episodes: {len(run_log.episodes)}  final map_at_50: {final_map}")
    return 0


def _run_human(args, config: RunConfig, manifest, log_path: Path, curves_path: Path) -> int:
    """Start the annotation service with this run registered, block until a
    human completes it through the UI, then write the usual outputs."""
    import uvicorn

    from .service import RunManager, create_app

    manager = RunManager()
    handle = manager.create_run(config, manifest)
    app = create_app(manager)
    server = uvicorn.Server(uvicorn.Config(app, host=args.host, port=args.port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    print(f"annotation service listening on http://{args.host}:{args.port} (run id {handle.run_id})")
    print("waiting for annotations...")
    try:
        with handle.cond:
            while handle.phase not in ("done", "failed"):
                handle.cond.wait(timeout=1.0)
    except KeyboardInterrupt:
        print("interrupted; shutting down", file=sys.stderr)
        server.should_exit = True
        thread.join(timeout=10)
        return 1
    server.should_exit = True
    thread.join(timeout=10)
    if handle.phase == "failed":
        log.error("run failed: %s", handle.error)
        return 1
    assert handle.run_log is not None
    atomic_write_text(log_path, "\n".join(handle.run_log.to_lines()) + "\n")
    if handle.run_log.episodes:
        atomic_write_text(curves_path, emit_curves(handle.run_log.episodes))
    print(f"wrote {log_path}")
    return 0


def cmd_compare(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    methods = args.methods
    seeds = args.seeds
    if not methods:
        parser.error("--methods must name at least one method")
    if not seeds:
        parser.error("--seeds must name at least one seed")
    manifest = load_manifest(args.manifest)
    jobs = [(method, seed) for method in methods for seed in seeds]

    def one(job):
        method, seed = job
        ns = argparse.Namespace(**vars(args))
        ns.method, ns.seed = method, seed
        config = resolve_run_config(ns, parser)
        log_path, curves_path = _run_paths(args.out, config)
        run_log = _execute_run(config, manifest, log_path, curves_path)
        return method, seed, run_log

    results: dict[tuple[str, int], RunLog] = {}
    failures: list[tuple[str, int, str]] = []
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            futures = {pool.submit(one, job): job for job in jobs}
            for future, job in futures.items():
                try:
                    method, seed, run_log = future.result()
                    results[(method, seed)] = run_log
                except Exception as exc:
                    failures.append((*job, str(exc)))
    else:
        for job in jobs:
            try:
                method, seed, run_log = one(job)
                results[(method, seed)] = run_log
            except Exception as exc:
                failures.append((*job, str(exc)))

    rows = ["method,seed,episode,images_labeled,annotation_hours,map_at_50"]
    for (method, seed), run_log in sorted(results.items()):
        rows.extend(emit_curves(run_log.episodes, include_seed=seed).splitlines()[1:])
    atomic_write_text(Path(args.out) / "compare.csv", "\r\n".join(rows) + "\r\n")

    print(f"{'method':<10} {'seeds':>5} {'final_map(mean)':>16} {'hours(mean)':>12}"
          + (f" {'hours_to_' + str(args.target_map):>14}" if args.target_map else ""))
    for method in methods:
        per_seed = [results[(method, s)] for s in seeds if (method, s) in results]
        if not per_seed:
            print(f"{method:<10} {'failed':>5}")
            continue
        finals = [r.episodes[-1].eval.get("map_at_50") for r in per_seed if r.episodes]
        hours = [float(r.episodes[-1].ledger["seconds_total"]) / 3600.0 for r in per_seed if r.episodes]
        line = (
            f"{method:<10} {len(per_seed):>5} "
            f"{_mean_or_dash(finals):>16} {_mean_or_dash(hours):>12}"
        )
        if args.target_map:
            reach = [
                hours_to_target(curve_points(r.episodes), args.target_map) for r in per_seed
            ]
            reached = [h for h in reach if h is not None]
            line += f" {_mean_or_dash(reached):>14}"
        print(line)
    for method, seed, message in failures:
        log.error("run %s seed %s failed: %s", method, seed, message)
    return 1 if failures else 0


def _mean_or_dash(values) -> str:
    values = [v for v in values if v is not None]
    if not values:
        return "-"
    return f"{sum(values) / len(values):.4f}"


def cmd_score(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Debug scorer: one CSV row (image_id, method, value) per image."""
    from .engine import parse_method

    manifest = load_manifest(args.manifest)
    stage1, stage2 = parse_method(args.method) if args.method != "rand" else ("rand", None)
    method = args.method
    detector = SyntheticDetector(SyntheticDetectorParams(), seed=args.seed)
    by_id = manifest.by_id()
    ids = sorted(by_id)
    rng = stream(args.seed, "score-train")
    order = rng.permutation(len(ids))
    train_ids = sorted(ids[i] for i in order[: min(args.train_count, len(ids))])
    model = detector.train([(by_id[i], by_id[i].objects) for i in train_ids])
    oracle_cfg = OracleConfig(seed=args.seed, click_jitter_frac=args.click_jitter or 0.0)

    needs_rpf = stage2 is not None
    if needs_rpf and (args.epsilon is None or args.alpha is None):
        parser.error(f"method {method!r} needs --epsilon and --alpha")
    from .dataset import RpfParams

    lines = ["image_id,method,value"]
    for image_id in ids:
        image = by_id[image_id]
        out = detector.detect(model, image)
        if method == "rand":
            value = 0.0
        elif stage2 is None:
            value = {
                "lc": baseline_least_confidence,
                "mar": baseline_margin,
                "ent": baseline_entropy,
            }[stage1](out).value
        else:
            weak = annotate_type1(image, oracle_cfg)
            filtered = rpf_filter(out.proposals, weak, RpfParams(args.epsilon, args.alpha))
            value = {
                "mv": max_variance,
                "me": max_entropy,
                "mev": max_ent_var,
            }[stage2](filtered).value
        lines.append(f"{image_id},{method},{value!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _load_detections_file(path: str) -> dict[str, list[Detection]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != 1:
        raise ValueError(f"unsupported detections format_version {doc.get('format_version')!r}")
    out: dict[str, list[Detection]] = {}
    for image_id, entries in doc.get("detections", {}).items():
        out[image_id] = [
            Detection(
                box=BoundingBox(e["box"]["x_min"], e["box"]["y_min"], e["box"]["x_max"], e["box"]["y_max"]),
                score=float(e["score"]),
            )
            for e in entries
        ]
    return out


def cmd_eval(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    manifest = load_manifest(args.manifest)
    by_id = manifest.by_id()
    if args.detections:
        stored = _load_detections_file(args.detections)
        per_image = [(stored.get(i, []), by_id[i].objects) for i in sorted(by_id)]
        pairs = [(i, len(stored.get(i, [])), len(by_id[i].objects)) for i in sorted(by_id)]
    elif args.detector_cmd:
        from .wire import ExternalDetector

        client = ExternalDetector.spawn(args.detector_cmd)
        try:
            train_manifest = load_manifest(args.train_manifest) if args.train_manifest else manifest
            model_id = client.train([(img, img.objects) for img in train_manifest.images])
            outputs = {i: client.detect(model_id, by_id[i]) for i in sorted(by_id)}
        finally:
            client.close()
        per_image = [(outputs[i].detections, by_id[i].objects) for i in sorted(by_id)]
        pairs = [(i, len(outputs[i].detections), len(by_id[i].objects)) for i in sorted(by_id)]
    else:
        parser.error("eval needs --detections FILE or --detector-cmd ARGV")
        return 2

    result = evaluate_detections(per_image, iou_threshold=args.iou)
    print(f"map_at_50: {result['map_at_50']!r}")
    print(f"total_gt: {result['total_gt']}  detections: {result['total_detections']}  "
          f"tp: {result['tp']}  fp: {result['fp']}")
    if args.density_out:
        from .evaluation import DensityReport

        predicted = [p for _, p, _ in pairs]
        actual = [a for _, _, a in pairs]
        report = DensityReport(pairs=tuple(pairs), r=pearson_r(predicted, actual), rmse=rmse(predicted, actual))
        atomic_write_text(args.density_out, density_report_csv(report))
        print(f"wrote {args.density_out} (r={report.r:.4f}, rmse={report.rmse:.4f})")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(cors_origins=_csv_list(args.cors_origins))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="palps",
        description="Point-supervised active learning for single-class object detection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_slice = sub.add_parser("slice", help="downsample a manifest and slice it into tiles")
    p_slice.add_argument("--in", dest="input", required=True, help="input manifest JSON")
    p_slice.add_argument("--out", dest="output", required=True, help="output manifest JSON")
    p_slice.add_argument("--downsample", type=float, default=1.0, help="divide all coordinates by this factor")
    p_slice.add_argument("--tile", type=_tile_spec, default=None, help="tile size as WxH, e.g. 500x500")
    p_slice.add_argument(
        "--partial",
        choices=["drop_image", "drop_object"],
        default="drop_image",
        help="how to treat objects cut by a tile edge",
    )

    def _pair(text: str):
        parts = _csv_list(text)
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
        return float(parts[0]), float(parts[1])

    p_synth = sub.add_parser("synth", help="generate a seeded synthetic dataset manifest")
    p_synth.add_argument("--out", dest="output", required=True, help="output manifest JSON")
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--images", type=int, default=200, help="number of images")
    p_synth.add_argument("--width", type=float, default=500.0)
    p_synth.add_argument("--height", type=float, default=500.0)
    p_synth.add_argument("--objects", type=_pair, default=(2.0, 5.0), help="objects per image as MIN,MAX")
    p_synth.add_argument("--box-size", type=_pair, default=(30.0, 80.0), help="box side range as MIN,MAX")
    p_synth.add_argument("--min-separation", type=float, default=60.0,
                         help="minimum center-to-center distance between objects")
    p_synth.add_argument("--difficulty", type=_pair, default=(0.0, 1.0),
                         help="per-image difficulty range as LO,HI")
    p_synth.add_argument("--name", default="synthetic", help="dataset name")

    p_tune = sub.add_parser("tune", help="tune filter parameters from dataset statistics")
    p_tune.add_argument("--in", dest="input", required=True, help="input manifest JSON")
    p_tune.add_argument("--eps-percentile", type=float, default=20.0,
                        help="percentile of per-image minimum center distances for epsilon")
    p_tune.add_argument("--alpha-percentile", type=float, default=90.0,
                        help="percentile of box areas for alpha")
    p_tune.add_argument("--rounding", choices=["none", "one_sig_fig", "two_sig_figs"],
                        default="two_sig_figs", help="rounding applied to the tuned values")

    def add_run_config_flags(p) -> None:
        p.add_argument("--config", default=None, help="run config file (TOML or JSON)")
        p.add_argument("--preset", default=None,
                       help="named preset (wheat_table1, wheat_tuning_text, sorghum_table1, sorghum_tuning_text)")
        p.add_argument("--b-w", dest="b_w", type=int, default=None, help="weak-query batch size per episode")
        p.add_argument("--b-s", dest="b_s", type=int, default=None, help="strong-query batch size per episode")
        p.add_argument("--initial-labeled", type=int, default=None, help="size of the seed labeled pool")
        p.add_argument("--budget", type=int, default=None, help="image-count query budget")
        p.add_argument("--episode-cap", type=int, default=None, help="stop after this many episodes")
        p.add_argument("--test-fraction", type=float, default=None, help="held-out fraction for evaluation")
        p.add_argument("--epsilon", type=float, default=None, help="filter search radius (pixels)")
        p.add_argument("--alpha", type=float, default=None, help="filter max proposal area (square pixels)")
        p.add_argument("--click-jitter", type=float, default=None,
                       help="simulated click jitter as a fraction of box half-extent")

    p_run = sub.add_parser("run", help="run one active learning experiment")
    p_run.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p_run.add_argument("--method", default=None,
                       help="query method: rand|lc|mar|ent or {stage1}_{mv|me|mev}, e.g. ent_mev")
    p_run.add_argument("--seed", type=int, default=None, help="run seed (required here or in the config file)")
    p_run.add_argument("--out", default="runs", help="output directory for the run log and curves")
    p_run.add_argument("--oracle", choices=["simulated", "human"], default=None,
                       help="annotation source; human starts the annotation service and blocks")
    p_run.add_argument("--resume", action="store_true",
                       help="continue an interrupted run from its log file")
    p_run.add_argument("--host", default="127.0.0.1", help="service host for --oracle human")
    p_run.add_argument("--port", type=int, default=9400, help="service port for --oracle human")
    add_run_config_flags(p_run)

    p_cmp = sub.add_parser("compare", help="run a method list over shared seeds and merge the curves")
    p_cmp.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p_cmp.add_argument("--methods", type=_csv_list, required=True, help="comma-separated method list")
    p_cmp.add_argument("--seeds", type=lambda t: [int(x) for x in _csv_list(t)], required=True,
                       help="comma-separated seed list")
    p_cmp.add_argument("--out", default="runs", help="output directory (per-run logs plus compare.csv)")
    p_cmp.add_argument("--target-map", type=float, default=None,
                       help="also report hours to reach this test AP")
    p_cmp.add_argument("--workers", type=int, default=1, help="parallel runs")
    add_run_config_flags(p_cmp)

    p_score = sub.add_parser("score", help="debug: score every image in a manifest with one method")
    p_score.add_argument("--manifest", required=True)
    p_score.add_argument("--method", required=True)
    p_score.add_argument("--seed", type=int, required=True)
    p_score.add_argument("--train-count", type=int, default=50,
                         help="train the synthetic detector on this many seeded images first")
    p_score.add_argument("--epsilon", type=float, default=None)
    p_score.add_argument("--alpha", type=float, default=None)
    p_score.add_argument("--click-jitter", type=float, default=None)
    p_score.add_argument("--out", default=None, help="CSV output path (default: standard output)")

    p_eval = sub.add_parser("eval", help="evaluate stored detections or an external detector")
    p_eval.add_argument("--manifest", required=True, help="ground-truth manifest (the test set)")
    p_eval.add_argument("--detections", default=None, help="stored detections JSON file")
    p_eval.add_argument("--detector-cmd", type=_csv_list, default=None,
                        help="comma-separated argv of a wire-protocol detector to spawn")
    p_eval.add_argument("--train-manifest", default=None, help="labeled manifest to train the detector on")
    p_eval.add_argument("--iou", type=float, default=0.5, help="IoU threshold")
    p_eval.add_argument("--density-out", default=None, help="write the density CSV here")

    p_serve = sub.add_parser("serve", help="start the human annotation service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=9400)
    p_serve.add_argument("--cors-origins", default="*", help="comma-separated allowed origins")

    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "slice":
            return cmd_slice(args)
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "tune":
            return cmd_tune(args)
        if args.command == "run":
            return cmd_run(args, parser)
        if args.command == "compare":
            return cmd_compare(args, parser)
        if args.command == "score":
            return cmd_score(args, parser)
        if args.command == "eval":
            return cmd_eval(args, parser)
        if args.command == "serve":
            return cmd_serve(args)
        parser.error(f"unknown command {args.command!r}")
        return 2
    except SystemExit as exc:  # parser.error inside a subcommand
        return int(exc.code or 0)
    except (ManifestError, EngineError, ValueError, OSError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
