"""``mctasnet`` command line: spatialize | train | separate | evaluate.

Settings resolve as command-line flag, then ``--config`` JSON file, then the
built-in default.  Every command that writes files also writes a
``*.run.json`` record of what it did.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import read_config, spatial_config, split_train_config
from .cstl import cstl_expand
from .errors import InvalidArgument, SamplingFailure
from .metrics import compare_systems, ibm_system, model_system
from .model import ModelConfig, separate
from .spatial.corpus import MANIFEST_NAME, generate_corpus, load_corpus
from .spatial.sources import SyntheticSpeech, WavFolder
from .training import TrainConfig, train, write_history
from .wavio import read_wav, write_wav

log = logging.getLogger("mctasnet")

USAGE_ERROR = 2
RUNTIME_ERROR = 1
INCOMPLETE_MARKER = "INCOMPLETE"


def write_run_manifest(path, command, config, seed, inputs, outputs, started):
    record = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "duration_s": round(time.perf_counter() - started, 3),
    }
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _pick(flag, doc, key, default=None):
    if flag is not None:
        return flag
    return doc.get(key, default)


def _remove(paths):
    for p in paths:
        try:
            Path(p).unlink()
        except FileNotFoundError:
            pass


# ---------------------------------------------------------------------------


def cmd_spatialize(args) -> int:
    started = time.perf_counter()
    doc = read_config(args.config)
    for key, flag in (("seed", args.seed), ("M", args.mics), ("K", args.speakers), ("count", args.count)):
        if flag is not None:
            doc[key] = flag
    cfg = spatial_config(doc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    provider = WavFolder(cfg["source_dir"]) if cfg["source_dir"] else SyntheticSpeech(int(cfg["pool_size"]))

    marker = out / INCOMPLETE_MARKER
    marker.write_text("corpus generation did not finish\n")
    manifest = generate_corpus(
        int(cfg["seed"]),
        int(cfg["count"]),
        provider,
        out,
        split=cfg["split"],
        M=int(cfg["M"]),
        K=int(cfg["K"]),
        reverberant=bool(cfg["reverberant"]),
        seconds=float(cfg["seconds"]),
        t60_range=(float(cfg["t60_min"]), float(cfg["t60_max"])),
        workers=int(cfg["workers"]),
    )
    marker.unlink()
    write_run_manifest(out / "spatialize.run.json", "spatialize", cfg, int(cfg["seed"]),
                       [args.config] if args.config else [], [manifest], started)
    print(f"wrote {cfg['count']} {cfg['split']} samples ({cfg['M']} mics, {cfg['K']} speakers) to {out}")
    return 0


def _initial_params(init_from, target: ModelConfig, seed: int):
    src, _ = load_checkpoint(init_from)
    if src.config == target:
        return src
    log.info("expanding %s (M=%d) to %s (M=%d)", src.config.variant, src.config.M, target.variant, target.M)
    return cstl_expand(src, target, seed=seed)


def cmd_train(args) -> int:
    started = time.perf_counter()
    doc = read_config(args.config)
    model_doc, train_doc = split_train_config(doc)

    base = {}
    if args.init_from:
        base = load_checkpoint(args.init_from)[0].config.to_dict()
        base.pop("M", None)
        base.pop("variant", None)
    model_kw = {**base, **model_doc}
    for key, flag in (("variant", args.variant), ("M", args.mics), ("K", args.speakers)):
        if flag is not None:
            model_kw[key] = flag
    model_config = ModelConfig(**model_kw)

    if args.seed is not None:
        train_doc["seed"] = args.seed
    if args.zero_mean is not None:
        train_doc["zero_mean"] = args.zero_mean == "on"
    if args.max_epochs is not None:
        train_doc["max_epochs"] = args.max_epochs
    train_cfg = TrainConfig(**train_doc)

    init = _initial_params(args.init_from, model_config, train_cfg.seed) if args.init_from else None
    train_set = load_corpus(args.train)
    valid_set = load_corpus(args.valid)
    if not train_set or not valid_set:
        raise InvalidArgument("training and validation manifests must be non-empty")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    history_path = out.with_name(out.name + ".history.csv")
    try:
        result = train(model_config, train_set, valid_set, train_cfg, init=init)
    except BaseException:
        _remove([out, history_path])
        raise
    save_checkpoint(out, result.params, {"best_epoch": result.best_epoch, "steps": result.steps,
                                         "stop_reason": result.stop_reason})
    write_history(history_path, result.history)
    resolved = {"model": model_config.to_dict(), "train": vars(train_cfg)}
    inputs = [args.train, args.valid] + [p for p in (args.config, args.init_from) if p]
    write_run_manifest(out.with_name(out.name + ".run.json"), "train", resolved, train_cfg.seed,
                       inputs, [out, history_path], started)
    best = result.history[result.best_epoch - 1]
    print(f"best epoch {result.best_epoch}/{len(result.history)}  valid loss {best.valid_loss:.3f}  "
          f"({result.stop_reason})  -> {out}")
    return 0


def cmd_separate(args) -> int:
    started = time.perf_counter()
    params, _ = load_checkpoint(args.checkpoint)
    mixture, fs = read_wav(args.input)
    M = params.config.M
    if mixture.shape[0] != M:
        raise InvalidArgument(f"{args.input} has {mixture.shape[0]} channel(s); checkpoint expects M={M}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    estimates = separate(mixture, params)
    written = []
    try:
        for k, est in enumerate(estimates):
            path = out / f"{Path(args.input).stem}_s{k + 1}.wav"
            write_wav(path, est.data.astype(np.float64)[None, :], fs)
            written.append(path)
    except BaseException:
        _remove(written)
        raise
    write_run_manifest(out / "separate.run.json", "separate", params.config.to_dict(), None,
                       [args.checkpoint, args.input], written, started)
    for p in written:
        print(p)
    return 0


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    doc = read_config(args.config)
    zero_mean = _pick(None if args.zero_mean is None else args.zero_mean == "on", doc, "zero_mean", True)
    samples = load_corpus(args.manifest)
    if not samples:
        raise InvalidArgument(f"{args.manifest}: empty manifest")
    if not args.checkpoints and not args.ibm:
        raise InvalidArgument("nothing to evaluate: give checkpoints and/or --ibm")

    systems = {}
    for ckpt in args.checkpoints:
        name = Path(ckpt).stem
        while name in systems:
            name += "'"
        systems[name] = model_system(load_checkpoint(ckpt)[0])
    if args.ibm:
        systems["ibm"] = ibm_system
    comparison = compare_systems(samples, systems, zero_mean=zero_mean)

    report = Path(args.report)
    report.parent.mkdir(parents=True, exist_ok=True)
    written = [report.with_suffix(".csv"), report.with_suffix(".txt")]
    written[0].write_text(comparison.to_csv())
    text = comparison.to_text(buckets=args.buckets)
    written[1].write_text(text + "\n")
    for name, rep in comparison.reports.items():
        path = report.with_name(f"{report.stem}.{name}.csv")
        path.write_text(rep.to_csv())
        written.append(path)
    manifest = Path(args.manifest)
    write_run_manifest(report.with_suffix(".run.json"), "evaluate",
                       {"zero_mean": zero_mean, "buckets": args.buckets, "ibm": args.ibm}, None,
                       [manifest if manifest.is_file() else manifest / MANIFEST_NAME, *args.checkpoints],
                       written, started)
    print(text)
    return 0


# ---------------------------------------------------------------------------


def _variant(name: str) -> str:
    return {"ef": "early_fusion", "lf": "late_fusion"}.get(name, name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mctasnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spatialize", parents=[common], help="generate a simulated multi-microphone corpus")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--seed", type=int)
    p.add_argument("--mics", type=int)
    p.add_argument("--speakers", type=int)
    p.add_argument("--count", type=int)
    p.set_defaults(func=cmd_spatialize)

    p = sub.add_parser("train", parents=[common], help="train a separator, optionally expanding a smaller checkpoint")
    p.add_argument("--config")
    p.add_argument("--train", required=True, help="training manifest or corpus directory")
    p.add_argument("--valid", required=True, help="validation manifest or corpus directory")
    p.add_argument("--out", required=True, help="checkpoint to write")
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", type=_variant,
                   choices=["single", "early_fusion", "late_fusion"], metavar="{single,ef,lf}")
    p.add_argument("--mics", type=int)
    p.add_argument("--speakers", type=int)
    p.add_argument("--init-from", metavar="PATH")
    p.add_argument("--zero-mean", choices=["on", "off"])
    p.add_argument("--max-epochs", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("separate", parents=[common], help="separate one multichannel WAV file")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("evaluate", parents=[common], help="SI-SNRi report for one or more systems")
    p.add_argument("checkpoints", nargs="*")
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", required=True, help="report path prefix (.csv and .txt are written)")
    p.add_argument("--config")
    p.add_argument("--ibm", action="store_true", help="add the ideal-binary-mask oracle")
    p.add_argument("--buckets", action="store_true", help="per 15-degree angle difference table")
    p.add_argument("--zero-mean", choices=["on", "off"])
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(format="%(message)s")
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except InvalidArgument as exc:
        print(f"mctasnet {args.command}: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (OSError, SamplingFailure, FloatingPointError, ValueError) as exc:
        print(f"mctasnet {args.command}: error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
