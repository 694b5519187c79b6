"""Command-line front door: relplace {gen | train-relnet | train-spatial | eval | serve}.

Exit codes: 0 success, 1 runtime/IO failure, 2 usage error. Runtime errors
also emit one machine-readable JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _cap_threads() -> None:
    cap = os.environ.get("RELPLACE_THREADS")
    if cap:
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _fail(message: str, code: int = 1) -> int:
    sys.stderr.write(json.dumps({"error": message}) + "\n")
    return code


def _load_config(args) -> "ExperimentConfig":
    from .config import ExperimentConfig, merge_into

    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        merge_into(cfg, json.loads(path.read_text()))
    return cfg


def _parse_size(text: str):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"size must look like 96x96, got '{text}'") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relplace",
                                     description="Placement-distribution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--scenes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=_parse_size, default=None, metavar="WxH")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)

    for name in ("train-relnet", "train-spatial"):
        p = sub.add_parser(name, help=f"{name.replace('-', ' ')} on a dataset")
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--config", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--no-timestamps", action="store_true")
        if name == "train-relnet":
            p.add_argument("--batch", type=int, default=None)
            p.add_argument("--input-variant", default=None,
                           choices=["masks_only", "image_binary_masks", "full"])
            p.add_argument("--optimizer", default=None, choices=["sgd", "adam"])
            p.add_argument("--resume", default=None)
        else:
            p.add_argument("--relnet", required=True)
            p.add_argument("--samples", type=int, default=None)
            p.add_argument("--epsilon", type=float, default=None)
            p.add_argument("--spread", default=None, choices=["none", "sobel"])
            p.add_argument("--refs-per-scene", type=int, default=None)
            p.add_argument("--max-scenes", type=int, default=None)
            p.add_argument("--snapshot-every", type=int, default=None)

    p = sub.add_parser("eval", help="evaluate checkpoints")
    p.add_argument("--mode", required=True,
                   choices=["relnet-accuracy", "distributions", "self-consistency"])
    p.add_argument("--data", required=True)
    p.add_argument("--relnet", default=None)
    p.add_argument("--spatial", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-scenes", type=int, default=50)
    p.add_argument("--samples-per-case", type=int, default=3)
    p.add_argument("--no-timestamps", action="store_true")

    p = sub.add_parser("serve", help="serve the interactive placement API")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--relnet", default=None)
    p.add_argument("--spatial", default=None)
    p.add_argument("--catalog", default=None)
    p.add_argument("--frontend", default=None)
    return parser


def main(argv=None) -> int:
    _cap_threads()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(args, parser)
        if args.command == "train-relnet":
            return cmd_train_relnet(args)
        if args.command == "train-spatial":
            return cmd_train_spatial(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "serve":
            return cmd_serve(args)
        return 2
    except FileNotFoundError as exc:
        return _fail(str(exc))
    except (OSError, ValueError, KeyError) as exc:
        return _fail(f"{type(exc).__name__}: {exc}")


def cmd_gen(args, parser) -> int:
    if args.scenes <= 0:
        parser.error("--scenes must be a positive integer")
    cfg = _load_config(args)
    if args.size:
        cfg.image_size = args.size[0]
        if args.size[0] != args.size[1]:
            parser.error("only square sizes are supported")
    cfg.seed = args.seed
    cfg.scenes.count = args.scenes

    from ..scenes.dataset import dataset_build

    meta = dataset_build(args.scenes, seed=args.seed, out_path=args.out,
                         config=cfg.gen_config())
    print(f"wrote {meta['n_scenes']} scenes, {meta['n_pairs']} labeled pairs to {args.out}")
    for rel, count in meta["relation_counts"].items():
        share = count / max(1, meta["n_pairs"])
        print(f"  {rel:10s} {count:6d}  ({share:.1%})")
    return 0


def _apply_overrides(cfg, args, fields) -> None:
    for section_name, attr, arg_name in fields:
        value = getattr(args, arg_name, None)
        if value is not None:
            setattr(getattr(cfg, section_name), attr, value)


def cmd_train_relnet(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg.seed = args.seed
    _apply_overrides(cfg, args, [
        ("relnet", "epochs", "epochs"), ("relnet", "lr", "lr"),
        ("relnet", "batch", "batch"), ("relnet", "input_variant", "input_variant"),
        ("relnet", "optimizer", "optimizer"),
    ])
    data = Path(args.data)
    if not (data / "manifest.jsonl").exists():
        raise FileNotFoundError(f"dataset manifest not found: {data / 'manifest.jsonl'}")

    from ..relnet import save_checkpoint, train_relnet
    from .runlog import RunLog

    out = Path(args.out)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    with RunLog(out / "log.jsonl", cfg.to_dict(), timestamps=not args.no_timestamps) as log:
        resume = getattr(args, "resume", None)
        model, entries = train_relnet(
            data, cfg.relnet_hyper(),
            log_fn=lambda e: log.write({"event": "epoch", **_strip_seconds(e)}),
            resume_from=resume)
        ckpt = out / "checkpoints" / "relnet.ckpt"
        save_checkpoint(model, ckpt, extra={"final_val_acc": entries[-1]["val_acc"]})
        log.write({"event": "done", "checkpoint": "checkpoints/relnet.ckpt"})
    print(f"checkpoint: {ckpt}")
    return 0


def cmd_train_spatial(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg.seed = args.seed
    _apply_overrides(cfg, args, [
        ("spatial", "epochs", "epochs"), ("spatial", "lr", "lr"),
        ("spatial", "samples", "samples"), ("spatial", "epsilon", "epsilon"),
        ("spatial", "spread", "spread"), ("spatial", "refs_per_scene", "refs_per_scene"),
        ("spatial", "max_scenes", "max_scenes"),
        ("spatial", "snapshot_every", "snapshot_every"),
    ])
    data = Path(args.data)
    relnet_path = Path(args.relnet)
    if not (data / "manifest.jsonl").exists():
        raise FileNotFoundError(f"dataset manifest not found: {data / 'manifest.jsonl'}")
    if not relnet_path.exists():
        raise FileNotFoundError(f"classifier checkpoint not found: {relnet_path}")

    from ..relnet import load_checkpoint as load_relnet
    from ..scenes.catalog import SubjectCatalog, default_catalog
    from ..spatial import save_checkpoint, train_spatial
    from .runlog import RunLog

    catalog_path = data / "catalog.json"
    catalog = SubjectCatalog.load(catalog_path) if catalog_path.exists() else default_catalog()
    out = Path(args.out)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    with RunLog(out / "log.jsonl", cfg.to_dict(), timestamps=not args.no_timestamps) as log:
        relnet = load_relnet(relnet_path)
        model, entries = train_spatial(
            relnet, data, catalog, cfg.spatial_hyper(),
            log_fn=lambda e: log.write({"event": "epoch", **_strip_seconds(e)}),
            out_dir=out)
        ckpt = out / "checkpoints" / "spatial.ckpt"
        save_checkpoint(model, ckpt, extra={"final_loss": entries[-1]["loss"]})
        log.write({"event": "done", "checkpoint": "checkpoints/spatial.ckpt"})
    print(f"checkpoint: {ckpt}")
    return 0


def cmd_eval(args) -> int:
    data = Path(args.data)
    if not (data / "manifest.jsonl").exists():
        raise FileNotFoundError(f"dataset manifest not found: {data / 'manifest.jsonl'}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.mode == "relnet-accuracy":
        return _eval_relnet_accuracy(args, data, out)
    if args.mode == "distributions":
        return _eval_distributions(args, data, out)
    return _eval_self_consistency(args, data, out)


def _require(path, what: str) -> Path:
    if path is None:
        raise FileNotFoundError(f"--{what} checkpoint is required for this mode")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} checkpoint not found: {p}")
    return p


def _eval_relnet_accuracy(args, data, out) -> int:
    from ..relnet import SampleLoader, evaluate_accuracy, load_checkpoint

    model = load_checkpoint(_require(args.relnet, "relnet"))
    loader = SampleLoader(data, model)
    result = evaluate_accuracy(model, loader, loader.split_indices("test"))
    (out / "relnet_accuracy.json").write_text(json.dumps(result, indent=2, sort_keys=True))
    print(f"test accuracy: {result['accuracy']:.4f}")
    for rel, acc in result["per_class"].items():
        print(f"  {rel:10s} {acc:.4f}")
    return 0


def _eval_distributions(args, data, out) -> int:
    import numpy as np

    from ..evaluation import (aggregate_reports, evaluate, oracle_ground_truth,
                              write_report_csv)
    from ..labels import RELATIONS
    from ..scenes.catalog import default_catalog
    from ..scenes.dataset import load_manifest, load_scenes
    from ..scenes.render import render
    from ..spatial import export_heatmaps
    from ..spatial import load_checkpoint as load_spatial

    spatial = load_spatial(_require(args.spatial, "spatial"))
    scenes = load_scenes(data)
    test_ids = sorted({r.scene_id for r in load_manifest(data) if r.split == "test"})
    test_ids = test_ids[:args.max_scenes]
    subject = default_catalog().get("can")

    reports = []
    csv_rows = []
    for i, scene_id in enumerate(test_ids):
        scene = scenes[scene_id]
        ref = scene.objects[0]
        maps = spatial.predict(render(scene).image,
                               spatial.make_mask(ref.bbox, scene.width, scene.height))
        gt = {}
        for rel in RELATIONS:
            dist = oracle_ground_truth(scene, ref.id, rel, subject.size)
            if dist is not None:
                gt[rel] = dist
        report = evaluate(maps, gt, seed=args.seed + scene_id)
        reports.append(report)
        for rel, row in report.per_relation.items():
            csv_rows.append({"scene_id": scene_id, "relation": rel, **row})
        if i < 5:
            export_heatmaps(maps, out / "heatmaps" / f"scene_{scene_id:05d}",
                            scene_id=scene_id, reference_id=ref.id)

    aggregate = aggregate_reports(reports)
    (out / "metrics.json").write_text(aggregate.to_json())
    write_report_csv(out / "metrics.csv", csv_rows)
    print(json.dumps(aggregate.to_dict()["rows"], indent=2, sort_keys=True))
    return 0


def _eval_self_consistency(args, data, out) -> int:
    from ..evaluation import self_consistency
    from ..scenes.catalog import SubjectCatalog, default_catalog
    from ..scenes.dataset import load_manifest, load_scenes
    from ..spatial import load_checkpoint as load_spatial

    spatial = load_spatial(_require(args.spatial, "spatial"))
    scenes = load_scenes(data)
    test_ids = sorted({r.scene_id for r in load_manifest(data) if r.split == "test"})
    test_ids = test_ids[:args.max_scenes]
    catalog_path = Path(data) / "catalog.json"
    catalog = SubjectCatalog.load(catalog_path) if catalog_path.exists() else default_catalog()
    result = self_consistency(spatial, {i: scenes[i] for i in test_ids},
                              samples_per_case=args.samples_per_case,
                              seed=args.seed, catalog=catalog)
    (out / "self_consistency.json").write_text(
        json.dumps(result.to_dict(), indent=2, sort_keys=True))
    print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from ..service.app import create_app_from_paths

    app = create_app_from_paths(relnet_path=args.relnet, spatial_path=args.spatial,
                                catalog_path=args.catalog, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _strip_seconds(entry: dict) -> dict:
    return {k: v for k, v in entry.items() if k != "seconds"}


if __name__ == "__main__":
    sys.exit(main())
