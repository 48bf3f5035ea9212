"""Command-line entry point: ``midas <subcommand> [flags]``.

Every subcommand writes ``run.json`` into its ``--out`` directory before
anything else. ``--config run.json`` loads those flags back as defaults, so a
run can be replayed with ``midas <subcommand> --config <dir>/run.json --out <new dir>``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import DEFAULT_SEEDS, ablation_suite, rows_to_csv
from .core import LabeledClip, argmax_class
from .errors import ConfigError, MidasError
from .metrics import (
    CLEAR_THRESHOLD,
    class_counts,
    coexistence_matrix,
    matched_targets,
    resample_to_distribution,
    split_by_ambiguity,
)
from .mixing import midas_batch
from .sampling import AUGMENT, DEFAULT_ALPHA, DEFAULT_SEED, RESAMPLE, RngStream
from .synthdata import DatasetManifest, Provenance, Record, SynthConfig, gen_dataset, read_dataset, write_dataset
from .trainer import TrainConfig, evaluate, load_model, model_for, save_model, train

log = logging.getLogger("midas")

RUN_JSON = "run.json"
CLI_MODES = {"hard": "hard", "soft": "soft", "midas-soft": "midas_soft", "midas-hard": "midas_hard"}


class UsageError(MidasError):
    pass


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not a 64-bit unsigned integer")
    return value


def _seed_list(text: str) -> list:
    return [_u64(s) for s in text.split(",") if s.strip()]


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=_u64, default=DEFAULT_SEED)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--config", help="run.json whose flags become defaults")
    return p


def _synth_flags(p: argparse.ArgumentParser) -> None:
    d = SynthConfig()
    p.add_argument("--classes", type=int, default=d.num_classes)
    p.add_argument("--frames", type=int, default=d.frames)
    p.add_argument("--height", type=int, default=d.height)
    p.add_argument("--width", type=int, default=d.width)
    p.add_argument("--channels", type=int, default=d.channels)
    p.add_argument("--annotators", type=int, default=d.annotators)
    p.add_argument("--n-train", type=int, default=d.n_train)
    p.add_argument("--n-test", type=int, default=d.n_test)
    p.add_argument("--ambiguity", type=float, default=d.ambiguity)
    p.add_argument("--noise-sigma", type=float, default=d.noise_sigma)
    p.add_argument("--noise-width", type=float, default=d.noise_width)
    p.add_argument("--noise-persistence", type=float, default=d.noise_persistence)


def _train_flags(p: argparse.ArgumentParser, with_mode: bool = True) -> None:
    d = TrainConfig()
    if with_mode:
        p.add_argument("--mode", choices=sorted(CLI_MODES), default="midas-soft")
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--lr", type=float, default=d.lr0)
    p.add_argument("--momentum", type=float, default=d.momentum)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--dropout", type=float, default=d.dropout_rate)
    p.add_argument("--hidden", type=int, default=d.hidden)
    p.add_argument("--segments", type=int, default=d.num_segments)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--pregenerate", action="store_true", help="mix one fixed augmented set instead of per epoch")
    p.add_argument("--workers", type=int, default=d.workers, help="threads for batch assembly")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="midas", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"midas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("gen-synth", parents=[common], help="generate a synthetic ambiguous dataset")
    _synth_flags(p)

    p = sub.add_parser("augment", parents=[common], help="write a MIDAS-augmented dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--label-mode", choices=("soft", "hard"), default="soft")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--count", type=int, help="number of mixed samples (default: size of the train split)")
    p.add_argument("--segments", type=int, default=TrainConfig().num_segments)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("train", parents=[common], help="train the reference classifier")
    p.add_argument("--data", required=True)
    _train_flags(p)
    p.add_argument("--init-only", action="store_true", help="write the initialised model without training")

    p = sub.add_parser("eval", parents=[common], help="evaluate a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "test", "all"), default="test")

    p = sub.add_parser("analyze", help="dataset analyses")
    asub = p.add_subparsers(dest="analysis", required=True)
    a = asub.add_parser("coexist", parents=[common], help="mean soft label per argmax class")
    a.add_argument("--data", required=True)
    a.add_argument("--split", choices=("train", "test", "all"), default="all")
    a = asub.add_parser("split", parents=[common], help="clear/mixed groups with matched class distribution")
    a.add_argument("--data", required=True)
    a.add_argument("--split", choices=("train", "test", "all"), default="train")
    a.add_argument("--threshold", type=float, default=CLEAR_THRESHOLD)
    a.add_argument("--total", type=int, help="size of each group (default: size of the clear group)")

    p = sub.add_parser("ablation", parents=[common], help="hard/soft/MIDAS comparison over seeds")
    p.add_argument("--data", help="existing dataset; generated under --out/data if omitted")
    p.add_argument("--seeds", type=_seed_list, default=list(DEFAULT_SEEDS))
    p.add_argument("--jobs", type=int, default=1, help="parallel training processes")
    p.add_argument("--data-seed", type=_u64, help="seed for the generated dataset (default: --seed)")
    _synth_flags(p)
    _train_flags(p, with_mode=False)
    return parser


# ---------------------------------------------------------------------------


def _config_path(argv):
    for k, a in enumerate(argv):
        if a == "--config" and k + 1 < len(argv):
            return argv[k + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def _as_flags(saved: dict, explicit: set) -> list:
    flags = []
    for key, value in saved.items():
        if key in explicit or value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        if value is True:
            flags.append(flag)
        elif isinstance(value, list):
            flags += [flag, ",".join(str(v) for v in value)]
        else:
            flags += [flag, str(value)]
    return flags


def _parse(argv):
    """Parse ``argv``; flags saved in a ``--config`` run.json fill in anything not given explicitly."""
    parser = build_parser()
    path = _config_path(argv)
    if path is None:
        return parser.parse_args(argv)
    try:
        saved = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot load config {path}: {exc}") from exc
    head = [a for a in argv[:2] if not a.startswith("-")]
    if not head or saved.get("command") != head[0] or (
        head[0] == "analyze" and saved.get("analysis") != (head[1] if len(head) > 1 else None)
    ):
        raise UsageError(f"{path} was written by a different subcommand")
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_") for a in argv if a.startswith("--")}
    saved_args = dict(saved.get("args", {}))
    saved_args.setdefault("seed", saved.get("seed"))
    n = len(head) if head[0] == "analyze" else 1
    return parser.parse_args(argv[:n] + _as_flags(saved_args, explicit) + argv[n:])


def _resolved(args) -> dict:
    skip = {"command", "analysis", "config", "out", "quiet"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_run_json(out: Path, args) -> None:
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "tool": "midas",
        "version": __version__,
        "command": args.command,
        "analysis": getattr(args, "analysis", None),
        "seed": args.seed,
        "args": _resolved(args),
    }
    (out / RUN_JSON).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _synth_config(args, seed) -> SynthConfig:
    try:
        return SynthConfig(
            num_classes=args.classes, frames=args.frames, height=args.height, width=args.width,
            channels=args.channels, annotators=args.annotators, n_train=args.n_train, n_test=args.n_test,
            ambiguity=args.ambiguity, noise_sigma=args.noise_sigma, noise_width=args.noise_width,
            noise_persistence=args.noise_persistence, seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _train_config(args, mode) -> TrainConfig:
    return TrainConfig(
        mode=mode, lr0=args.lr, momentum=args.momentum, epochs=args.epochs, batch_size=args.batch_size,
        dropout_rate=args.dropout, alpha=args.alpha, normalize=not args.no_normalize, seed=args.seed,
        hidden=args.hidden, num_segments=args.segments, pregenerate=args.pregenerate, workers=args.workers,
    ).validate()


def _select(manifest: DatasetManifest, split: str):
    return manifest.samples if split == "all" else manifest.split(split)


def cmd_gen_synth(args, out: Path) -> None:
    config = _synth_config(args, args.seed)
    _write_run_json(out, args)
    manifest = gen_dataset(config)
    write_dataset(manifest, out)
    log.info("wrote %d clips to %s", len(manifest), out)


def cmd_augment(args, out: Path) -> None:
    if args.alpha <= 0:
        raise ConfigError("--alpha must be positive")
    if args.segments < 1 or args.workers < 1 or (args.count is not None and args.count < 0):
        raise ConfigError("--segments and --workers must be >= 1, --count >= 0")
    _write_run_json(out, args)
    source = read_dataset(args.data).split("train")
    count = len(source) if args.count is None else args.count
    mixed = midas_batch(
        source, count, args.alpha, args.label_mode, not args.no_normalize,
        RngStream(args.seed, (AUGMENT,)), num_segments=args.segments, workers=args.workers,
    )
    records = [
        Record(LabeledClip(f"mix-{k:05d}", m.clip, m.label), "train", Provenance(m.source_i, m.source_j, m.lam.lam))
        for k, m in enumerate(mixed)
    ]
    write_dataset(DatasetManifest(tuple(records)), out)
    log.info("wrote %d mixed clips to %s", len(records), out)


def cmd_train(args, out: Path) -> None:
    config = _train_config(args, CLI_MODES[args.mode])
    _write_run_json(out, args)
    data = read_dataset(args.data).split("train")
    if not data:
        raise ConfigError(f"{args.data} has no train split")
    if args.init_only:
        model = model_for(data, config)
        history = None
    else:
        model, history = train(
            data, config,
            callback=lambda r: log.info("epoch %d loss %.4f lr %.5f train UAR %.4f WAR %.4f",
                                        r.epoch, r.loss, r.lr, r.train_uar, r.train_war),
        )
    save_model(model, out / "model.midm")
    if history is not None:
        (out / "history.csv").write_text(history.to_csv(), encoding="utf-8")


def cmd_eval(args, out: Path) -> None:
    _write_run_json(out, args)
    model = load_model(args.model)
    data = _select(read_dataset(args.data), args.split)
    report = evaluate(model, data)
    (out / "report.json").write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    text = report.to_text()
    (out / "report.txt").write_text(text, encoding="utf-8")
    if not args.quiet:
        sys.stdout.write(text)


def _matrix_csv(matrix: np.ndarray, counts: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    C = matrix.shape[1]
    writer.writerow(["class", "n"] + [f"p{c}" for c in range(C)])
    for c, row in enumerate(matrix):
        writer.writerow([c, int(counts[c])] + ["nan" if np.isnan(v) else repr(float(v)) for v in row])
    return buf.getvalue()


def _group_csv(samples) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "hard_label", "max_prob"])
    for s in samples:
        writer.writerow([s.id, argmax_class(s.soft), repr(float(s.soft.probs.max()))])
    return buf.getvalue()


def cmd_analyze(args, out: Path) -> None:
    _write_run_json(out, args)
    manifest = read_dataset(args.data)
    data = _select(manifest, args.split)
    C = manifest.num_classes
    if args.analysis == "coexist":
        matrix = coexistence_matrix(data)
        (out / "coexist.csv").write_text(_matrix_csv(matrix, class_counts(data, C)), encoding="utf-8")
        return
    clear, mixed = split_by_ambiguity(data, args.threshold)
    total = len(clear) if args.total is None else args.total
    if total < 0:
        raise ConfigError("--total must be non-negative")
    target = matched_targets(class_counts(clear, C), total)
    root = RngStream(args.seed, (RESAMPLE,))
    groups = {
        "clear": resample_to_distribution(clear, target, root.child(1)),
        "mixed": resample_to_distribution(mixed, target, root.child(2)),
    }
    for name, samples in groups.items():
        (out / f"{name}.csv").write_text(_group_csv(samples), encoding="utf-8")
    summary = {
        "threshold": args.threshold,
        "clear_source": len(clear),
        "mixed_source": len(mixed),
        "target_counts": target.tolist(),
        "group_size": int(target.sum()),
    }
    (out / "split.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")


def cmd_ablation(args, out: Path) -> None:
    base = _train_config(args, "midas_soft")
    synth = None if args.data else _synth_config(args, args.seed if args.data_seed is None else args.data_seed)
    if args.jobs < 1 or not args.seeds:
        raise ConfigError("--jobs must be >= 1 and --seeds non-empty")
    _write_run_json(out, args)
    rows = ablation_suite(out, args.seeds, synth, base, data_dir=args.data, jobs=args.jobs)
    if not args.quiet:
        sys.stdout.write(rows_to_csv(rows))


COMMANDS = {
    "gen-synth": cmd_gen_synth,
    "augment": cmd_augment,
    "train": cmd_train,
    "eval": cmd_eval,
    "analyze": cmd_analyze,
    "ablation": cmd_ablation,
}


def _error(kind: str, exc: BaseException) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
    except SystemExit as exc:  # argparse usage errors exit with 2
        return int(exc.code or 0)
    except UsageError as exc:
        _error("usage", exc)
        return 2
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr)
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)
    try:
        COMMANDS[args.command](args, Path(args.out))
    except ConfigError as exc:
        _error("config", exc)
        return 2
    except (MidasError, ValueError, OSError) as exc:
        _error(type(exc).__name__, exc)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
