"""Command-line entry point: ``framedup {detect,localize,generate,evaluate,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .config import RunConfig
from .errors import FrameDupError
from .evaluation import analyze_clip, confusion_bar, evaluate_corpus, mcc
from .fine import Interval
from .forgery import TruthMask, generate_corpus, synthetic_clip
from .media_io import heatmap_pgm, read_clip

log = logging.getLogger("framedup")

_OVERRIDES = {
    "t2": "t2",
    "eps": "eps",
    "lam": "lam",
    "wind": "wind",
    "window_length": "window_length",
    "overlap": "overlap",
    "seed": "seed",
    "jobs": "jobs",
    "out": "output_dir",
    "t1_mode": "t1_mode",
    "t1": "t1",
    "fps": "fps",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--t1-mode", choices=("percentile", "fixed", "all"))
    p.add_argument("--t1", type=float, help="fixed window-distance threshold")
    p.add_argument("--t2", type=float, help="frame-distance threshold for a match")
    p.add_argument("--eps", type=float, help="run extension tolerance")
    p.add_argument("--lambda", dest="lam", type=float, help="weight of the 'none' class")
    p.add_argument("--wind", type=int, help="half-width of the boundary window")
    p.add_argument("--window-length", type=int)
    p.add_argument("--overlap", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker threads (default: all cores)")
    p.add_argument("--fps", type=float, help="frame rate for image sequences")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="framedup", description="Frame duplication detection and localization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("detect", "search a clip for duplicated frame runs"),
                           ("localize", "detect, then tell inserted copies from their sources")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("input", help="Y4M file or image-sequence directory")
        _common(p)
        p.add_argument("--heatmaps", action="store_true", help="write PGM distance-matrix heatmaps")
        p.add_argument("--threshold", type=float, help="flag the clip when video_score > THRESHOLD")

    p = sub.add_parser("generate", help="write a synthetic forgery corpus")
    p.add_argument("inputs", nargs="*", help="seed clips (default: rendered synthetic footage)")
    _common(p)
    p.add_argument("--n-manipulated", type=int, default=10)
    p.add_argument("--n-pristine", type=int, default=10)
    p.add_argument("--synthetic-frames", type=int, default=400, help="frames per synthetic seed clip")
    p.add_argument("--durations", type=float, nargs="+", help="copy durations in seconds")
    p.add_argument("--noise-sigma", type=float, nargs="+", help="noise levels to draw from")
    p.add_argument("--min-gap", type=int, default=32)
    p.add_argument("--max-gap", type=int)

    p = sub.add_parser("evaluate", help="score a corpus manifest")
    p.add_argument("manifest", type=Path)
    _common(p)

    p = sub.add_parser("report", help="render a confusion bar for one localization")
    p.add_argument("truth", type=Path, help="truth JSON written by generate")
    p.add_argument("localization", type=Path, help="localization JSON written by localize")
    p.add_argument("--out", help="output directory")
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    changes = {}
    for arg, key in _OVERRIDES.items():
        val = getattr(args, arg, None)
        if val is not None:
            changes[key] = val
    if changes.get("t1") is not None and "t1_mode" not in changes:
        changes["t1_mode"] = "fixed"
    return cfg.replace(**changes) if changes else cfg


def dump_json(path: Path, payload: dict, meta: dict) -> None:
    body = dict(payload)
    body["meta"] = meta
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _meta(cfg: RunConfig, started: float) -> dict:
    return {
        "tool": "framedup",
        "version": __version__,
        "jobs": cfg.workers,
        "elapsed_s": round(time.perf_counter() - started, 3),
        "config": cfg.to_dict(),
    }


def _out_dir(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir or ".")


def _clip_payload(args, cfg: RunConfig, with_localization: bool) -> dict:
    clip = read_clip(args.input, pattern=cfg.pattern, fps=cfg.fps, grayscale=cfg.grayscale)
    result = analyze_clip(clip, cfg)
    report = result["report"]
    payload = {"input": str(args.input), "report": report.to_dict()}
    if args.threshold is not None:
        payload["threshold"] = args.threshold
        payload["manipulated"] = bool(report.video_score > args.threshold)
    if with_localization:
        payload["localizations"] = [loc.to_dict() for loc in result["localizations"]]
    if args.heatmaps:
        out = _out_dir(cfg)
        out.mkdir(parents=True, exist_ok=True)
        heatmap_pgm(out / "sequence_matrix.pgm", report.sequence_matrix)
        heatmap_pgm(out / "frame_matrix.pgm", report.frame_matrix.values, 0.0, 1.0)
    return payload


def cmd_detect(args) -> int:
    cfg = load_config(args)
    started = time.perf_counter()
    payload = _clip_payload(args, cfg, with_localization=False)
    dump_json(_out_dir(cfg) / "report.json", payload, _meta(cfg, started))
    rep = payload["report"]
    verdict = f" manipulated={payload['manipulated']}" if "manipulated" in payload else ""
    print(f"{args.input}: {len(rep['matches'])} match(es), video_score={rep['video_score']}{verdict}")
    return 0


def cmd_localize(args) -> int:
    cfg = load_config(args)
    started = time.perf_counter()
    payload = _clip_payload(args, cfg, with_localization=True)
    dump_json(_out_dir(cfg) / "localization.json", payload, _meta(cfg, started))
    locs = payload["localizations"]
    first = f", duplicated={locs[0]['duplicated_range']}" if locs else ""
    print(f"{args.input}: {len(locs)} localization(s){first}")
    return 0


def cmd_generate(args) -> int:
    cfg = load_config(args)
    started = time.perf_counter()
    if args.inputs:
        seeds = [read_clip(p, pattern=cfg.pattern, fps=cfg.fps, grayscale=cfg.grayscale) for p in args.inputs]
    else:
        count = max(args.n_manipulated + args.n_pristine, 1)
        seeds = [synthetic_clip(args.synthetic_frames, seed=cfg.seed * 100003 + k, fps=cfg.fps) for k in range(count)]
    params = {"min_gap": args.min_gap, "max_gap": args.max_gap}
    if args.durations:
        params["durations"] = args.durations
    if args.noise_sigma:
        params["noise_sigma"] = args.noise_sigma
    out = _out_dir(cfg)
    manifest = generate_corpus(seeds, args.n_manipulated, args.n_pristine, out, params, seed=cfg.seed)
    (out / "generate_meta.json").write_text(json.dumps(_meta(cfg, started), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(manifest['items'])} items to {out / 'manifest.json'}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args)
    started = time.perf_counter()
    if not args.manifest.exists():
        raise FileNotFoundError(str(args.manifest))
    summary = evaluate_corpus(args.manifest, cfg)
    dump_json(_out_dir(cfg) / "summary.json", summary, _meta(cfg, started))
    print(
        f"video_auc={summary['video_auc']} frame_auc={summary['frame_auc']} "
        f"mean_mcc={summary['mean_mcc']} localization={summary['localization_counts']}"
    )
    return 0


def cmd_report(args) -> int:
    truth = TruthMask.from_dict(json.loads(args.truth.read_text()))
    loc = json.loads(args.localization.read_text())
    locs = loc.get("localizations") or []
    predicted = [Interval(*locs[0]["duplicated_range"])] if locs else []
    bar = confusion_bar(truth, predicted)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "confusion.svg").write_text(bar.svg() + "\n")
    (out / "confusion.txt").write_text(bar.text() + "\n")
    c = bar.counts
    print(f"tp={c.tp} fp={c.fp} tn={c.tn} fn={c.fn} optout={c.optout} mcc={mcc(c):.4f}")
    return 0


COMMANDS = {
    "detect": cmd_detect,
    "localize": cmd_localize,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING)
    for attr in ("input", "manifest"):
        path = getattr(args, attr, None)
        if path is not None and not Path(path).exists():
            parser.error(f"input path does not exist: {path}")
    try:
        return COMMANDS[args.command](args)
    except (FrameDupError, FileNotFoundError) as exc:
        print(f"framedup: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
