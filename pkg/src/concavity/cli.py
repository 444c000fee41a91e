"""Command-line interface: ``concavity {generate,detect,eval,sweep,render}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import re
import sys
from pathlib import Path

from . import __version__
from .config import Config, ConfigError, load_config, parse_range
from .detector import DetectorParams, detect_concave_points
from .evaluation import theta_sweep, sweep_csv
from .synth import GenerationExhausted, dump_json, generate_dataset, read_mask

log = logging.getLogger("concavity")


class CommandError(Exception):
    """Runtime failure reported to the user with exit code 1."""

    code = 1


class UsageError(CommandError):
    """Invalid option values or configuration (exit code 2)."""

    code = 2


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _range(text: str) -> tuple[int, int]:
    try:
        return parse_range(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="concavity", description="Concave point detection on binary masks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic three-ellipse dataset")
    g.add_argument("--count", type=_positive_int, required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--image-size", type=_positive_int)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--config")
    g.add_argument("--jobs", type=_positive_int, default=1)

    d = sub.add_parser("detect", help="detect concave points in mask images")
    d.add_argument("inputs", nargs="+", help="mask files, directories or glob patterns")
    d.add_argument("--k", type=_positive_int)
    d.add_argument("--lmin", type=_positive_int)
    d.add_argument("--lmax", type=_positive_int)
    d.add_argument("--epsilon", type=float)
    d.add_argument("--t0", type=float)
    d.add_argument("--dt", type=float)
    d.add_argument("--config")
    d.add_argument("--jobs", type=_positive_int, default=1)
    d.add_argument("--out", required=True, help="detections JSON")

    for name, help_ in (("eval", "score detections at one threshold"), ("sweep", "score detections over a threshold range")):
        e = sub.add_parser(name, help=help_)
        e.add_argument("--detections", required=True)
        e.add_argument("--annotations", required=True)
        e.add_argument("--theta", type=_positive_int)
        e.add_argument("--theta-range", type=_range)
        e.add_argument("--config")
        e.add_argument("--out", help="CSV output")
        e.add_argument("--figure", help="PNG plot of the sweep (default: next to --out)")

    r = sub.add_parser("render", help="overlay points on a mask")
    r.add_argument("--mask", required=True)
    r.add_argument("--annotations", help="ground truth drawn in blue")
    r.add_argument("--detections", help="detections drawn in red")
    r.add_argument("--id", type=int, help="record id (default: parsed from the mask name)")
    r.add_argument("--out", required=True)
    return parser


def _load_cfg(args) -> Config:
    try:
        return load_config(getattr(args, "config", None))
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


def image_id(path: str | Path) -> int | None:
    m = re.search(r"(\d+)$", Path(path).stem)
    return int(m.group(1)) if m else None


def _meta_path(out: str | Path) -> Path:
    return Path(str(out) + ".meta.json")


def _write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CommandError(f"cannot write {path}: {exc}") from exc


def cmd_generate(args) -> int:
    try:
        cfg = _load_cfg(args).override("generator", seed=args.seed, image_size=args.image_size)
    except ValueError as exc:
        raise UsageError(f"invalid generator parameters: {exc}") from exc
    try:
        generate_dataset(args.count, cfg.generator, args.out, jobs=args.jobs)
    except GenerationExhausted as exc:
        raise CommandError(str(exc)) from exc
    except OSError as exc:
        raise CommandError(str(exc)) from exc
    print(Path(args.out) / "manifest.json")
    return 0


def expand_inputs(patterns: list[str]) -> list[Path]:
    paths: list[Path] = []
    for pat in patterns:
        p = Path(pat)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.png")))
        elif any(ch in pat for ch in "*?["):
            paths.extend(Path(m) for m in sorted(glob.glob(pat)))
        else:
            paths.append(p)
    seen, out = set(), []
    for p in paths:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def _detect_one(task: tuple[int, str, DetectorParams]) -> dict:
    idx, path, params = task
    try:
        mask = read_mask(path)
        pts = detect_concave_points(mask, params)
    except Exception as exc:  # per-image failures are recorded, not fatal
        return {"id": idx, "error": f"{path}: {exc}"}
    return {"id": idx, "points": [[round(x, 6), round(y, 6)] for x, y in pts]}


def cmd_detect(args) -> int:
    cfg = _load_cfg(args)
    try:
        cfg = cfg.override("detector", k=args.k, l_min=args.lmin, l_max=args.lmax, epsilon=args.epsilon, t0=args.t0, dt=args.dt)
    except ValueError as exc:
        raise UsageError(f"invalid detector parameters: {exc}") from exc
    paths = expand_inputs(args.inputs)
    if not paths:
        raise CommandError(f"no input matches {' '.join(args.inputs)}")
    ids = [image_id(p) for p in paths]
    if None in ids or len(set(ids)) != len(ids):
        ids = list(range(len(paths)))
    tasks = [(i, str(p), cfg.detector) for i, p in zip(ids, paths)]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(_detect_one, tasks))
    else:
        records = [_detect_one(t) for t in tasks]
    records.sort(key=lambda r: r["id"])
    failed = [r for r in records if "error" in r]
    for r in failed:
        log.error("image %s skipped: %s", r["id"], r["error"])
    _write_text(args.out, json.dumps(records, indent=1) + "\n")
    meta = {"command": "detect", "config": cfg.to_dict(), "inputs": [str(p) for p in paths]}
    _write_text(_meta_path(args.out), json.dumps(meta, indent=1, sort_keys=True) + "\n")
    if len(failed) == len(records):
        raise CommandError("every image failed: " + "; ".join(r["error"] for r in failed))
    return 0


def _load_json(path: str) -> list:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CommandError(f"{path}: invalid JSON: {exc}") from exc


def _load_pairs(det_path: str, ann_path: str) -> tuple[dict, dict]:
    det = {int(r["id"]): r for r in _load_json(det_path)}
    ann = {int(r["id"]): r for r in _load_json(ann_path)}
    missing = sorted(set(det) - set(ann))
    if missing:
        raise CommandError(f"detection ids missing from {ann_path}: {missing}")
    gt = {i: [tuple(p) for p in ann[i]["concave_points"]] for i in det}
    pred = {}
    for i, r in det.items():
        if "error" in r:
            log.warning("image %s has no detections (%s); scored as empty", i, r["error"])
        pred[i] = [tuple(p) for p in r.get("points", [])]
    return gt, pred


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    sweep = args.command == "sweep" or args.theta_range is not None
    gt, pred = _load_pairs(args.detections, args.annotations)
    if sweep:
        lo, hi = args.theta_range or cfg.eval.theta_range
        thetas = list(range(lo, hi + 1))
    else:
        thetas = [args.theta or cfg.eval.theta]
    table = theta_sweep(gt, pred, thetas)
    if table.undefined_med:
        log.warning("MED undefined for image ids %s (excluded)", table.undefined_med)

    print(f"{'theta':>5} {'precision':>9} {'recall':>7} {'f1':>7} {'MED':>7} {'STD':>7}")
    for r in table.rows:
        print(f"{r.theta:>5} {r.precision:9.3f} {r.recall:7.3f} {r.f1:7.3f} {table.med_mean:7.3f} {table.med_std:7.3f}")

    meta = {
        "command": args.command,
        "config": cfg.override("eval", theta=thetas[0] if not sweep else None).to_dict(),
        "detections": args.detections,
        "annotations": args.annotations,
        "thetas": thetas,
        "undefined_med": table.undefined_med,
    }
    if args.out:
        _write_text(args.out, sweep_csv(table))
        _write_text(_meta_path(args.out), json.dumps(meta, indent=1, sort_keys=True) + "\n")
    figure = args.figure or (str(Path(args.out).with_suffix(".png")) if args.out and sweep else None)
    if figure:
        from .plotting import plot_sweep

        try:
            plot_sweep(table, figure, metadata=meta)
        except OSError as exc:
            raise CommandError(f"cannot write {figure}: {exc}") from exc
    return 0


def _points_for(path: str | None, rid: int | None, key: str) -> list:
    if path is None:
        return []
    if rid is None:
        raise CommandError("cannot infer record id from the mask name; pass --id")
    for r in _load_json(path):
        if int(r["id"]) == rid:
            return [tuple(p) for p in r.get(key, [])]
    raise CommandError(f"id {rid} not found in {path}")


def cmd_render(args) -> int:
    from .plotting import overlay, save_rgb

    try:
        mask = read_mask(args.mask)
    except OSError as exc:
        raise CommandError(str(exc)) from exc
    rid = args.id if args.id is not None else image_id(args.mask)
    gt = _points_for(args.annotations, rid, "concave_points")
    pred = _points_for(args.detections, rid, "points")
    meta = {"command": "render", "mask": args.mask, "id": rid, "n_gt": len(gt), "n_pred": len(pred)}
    try:
        save_rgb(overlay(mask, gt, pred), args.out, meta)
    except OSError as exc:
        raise CommandError(f"cannot write {args.out}: {exc}") from exc
    return 0


COMMANDS = {"generate": cmd_generate, "detect": cmd_detect, "eval": cmd_eval, "sweep": cmd_eval, "render": cmd_render}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
