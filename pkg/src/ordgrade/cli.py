"""Batch command-line front end.

Every command resolves its configuration (defaults, then ``--config`` file,
then explicit flags), writes a ``manifest.json`` echoing it, and can be
re-run bit-exactly with ``ordgrade replay <manifest>``.

Exit codes: 0 success, 2 configuration, 3 data validation, 4 I/O,
5 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

from . import __version__
from ._backend import BACKEND
from .compare import HeadConfig, compare_losses, default_heads
from .dataset import (
    DEFAULT_DIM,
    AugmentSpec,
    SplitSpec,
    augment,
    featurize_many,
    load_dataset,
    scores_of,
    split,
    write_dataset,
    dump_jsonl,
)
from .errors import ConfigError, IncompatibleModelError, OrdgradeError, TrainingDivergedError
from .losses import LossSpec
from .relative import accuracy_by_epsilon, load_pairs
from .scorer import (
    HeadKind,
    TrainConfig,
    data_fingerprint,
    evaluate,
    init_model,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .synthetic import SyntheticSpec, generate_pairs, generate_samples

log = logging.getLogger("ordgrade")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_IO = 4
EXIT_NUMERIC = 5

TRAIN_KEYS = ("learning_rate", "weight_decay", "warmup_ratio", "epochs", "batch_size", "schedule")

DEFAULTS = {
    "gen-synthetic": {
        "n": 10_000,
        "pairs": 1_000,
        "label_noise": 0.35,
        "evidence_tokens": 40,
        "min_gap": 1.0,
    },
    "augment": {
        "input": None,
        "output": None,
        "drop_rubric_prob": 0.5,
        "drop_reference_prob": 0.5,
    },
    "train": {
        "data": None,
        "head": "classification",
        "hidden_size": 0,
        "dim": DEFAULT_DIM,
        "train_fraction": 0.95,
        "augment": False,
        "loss": {"kind": None},
        **{k: v for k, v in TrainConfig().to_dict().items() if k in TRAIN_KEYS},
    },
    "evaluate": {
        "checkpoint": None,
        "data": None,
        "mode": "absolute",
        "dim": None,
        "tie_epsilon": [0.0, 0.25, 0.5],
    },
    "compare-losses": {
        "data": None,
        "dim": DEFAULT_DIM,
        "train_fraction": 0.95,
        "seeds": [1, 2, 3, 4, 5],
        "heads": [h.to_dict() for h in default_heads()],
        **{k: v for k, v in TrainConfig().to_dict().items() if k in TRAIN_KEYS},
    },
}


# ---------------------------------------------------------------------------
# config plumbing


def read_config_file(path) -> dict:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            return tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None


def resolve(command: str, file_cfg: dict, flags: dict) -> dict:
    cfg = copy.deepcopy(DEFAULTS[command])
    # a config file may be flat or hold one table per command
    section = file_cfg.get(command, file_cfg) if isinstance(file_cfg, dict) else {}
    for source in (section, flags):
        for key, value in source.items():
            if key in ("seed", "jobs", "out"):
                cfg[key] = value
                continue
            if key not in cfg:
                if source is section and isinstance(value, dict) and key in DEFAULTS:
                    continue
                raise ConfigError(f"unknown option {key!r} for {command}")
            if key == "loss" and isinstance(value, dict):
                cfg["loss"] = {**cfg["loss"], **value}
            else:
                cfg[key] = value
    if isinstance(cfg.get("loss"), dict) and cfg["loss"].get("kind") is None:
        cfg["loss"]["kind"] = "mse" if cfg.get("head") == HeadKind.REGRESSION.value else "squared_emd"
    cfg.setdefault("seed", 0)
    cfg.setdefault("jobs", 1)
    cfg.setdefault("out", "out")
    for key, value in cfg.items():
        if value is None and key not in ("dim", "output"):
            raise ConfigError(f"{command} needs a value for {key!r}")
    return cfg


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(out: Path, command: str, cfg: dict) -> None:
    write_json(out / "manifest.json", {
        "command": command,
        "config": cfg,
        "version": __version__,
        "backend": BACKEND,
    })


def _train_config(cfg: dict, loss: LossSpec, seed: int) -> TrainConfig:
    return TrainConfig(loss=loss, seed=seed, **{k: cfg[k] for k in TRAIN_KEYS})


# ---------------------------------------------------------------------------
# commands


def run_gen_synthetic(cfg: dict, out: Path) -> int:
    spec = SyntheticSpec(n=int(cfg["n"]), seed=int(cfg["seed"]), label_noise=float(cfg["label_noise"]),
                         evidence_tokens=int(cfg["evidence_tokens"]))
    samples, _ = generate_samples(spec)
    write_dataset(samples, out / "samples.jsonl")
    if cfg["pairs"]:
        pairs = generate_pairs(int(cfg["pairs"]), int(cfg["seed"]), float(cfg["min_gap"]), spec)
        dump_jsonl((p.to_dict() for p in pairs), out / "pairs.jsonl")
    print(f"wrote {len(samples)} samples and {cfg['pairs']} pairs to {out}")
    return EXIT_OK


def run_augment(cfg: dict, out: Path) -> int:
    spec = AugmentSpec(float(cfg["drop_rubric_prob"]), float(cfg["drop_reference_prob"]), int(cfg["seed"]))
    samples = load_dataset(cfg["input"])
    target = Path(cfg["output"]) if cfg.get("output") else out / "augmented.jsonl"
    write_dataset(augment(samples, spec), target)
    print(f"wrote {len(samples)} samples to {target}")
    return EXIT_OK


def run_train(cfg: dict, out: Path) -> int:
    seed = int(cfg["seed"])
    head = HeadKind(cfg["head"])
    loss = LossSpec.from_dict(cfg["loss"])
    config = _train_config(cfg, loss, seed)
    samples = load_dataset(cfg["data"])
    train_s, val_s = split(samples, SplitSpec(float(cfg["train_fraction"]), seed))
    if not train_s or not val_s:
        raise ConfigError("train_fraction leaves an empty train or validation split")
    if cfg["augment"]:
        train_s = augment(train_s, AugmentSpec(seed=seed))
    dim = int(cfg["dim"])
    tx, ty = featurize_many(train_s, dim), scores_of(train_s)
    vx, vy = featurize_many(val_s, dim), scores_of(val_s)
    model = init_model(head, dim, int(cfg["hidden_size"]), seed)
    try:
        best, trace = train(model, tx, ty, vx, vy, config)
    except TrainingDivergedError as exc:
        if exc.trace is not None:
            exc.trace.write_step_csv(out / "train_steps.csv")
            exc.trace.write_epoch_csv(out / "train_epochs.csv")
        raise
    fingerprint = data_fingerprint(tx, ty)
    digest = save_checkpoint(out / "checkpoint.json", best, config, fingerprint,
                             {"featurizer": "hashed-bag-of-tokens", "feature_dim": dim})
    trace.write_step_csv(out / "train_steps.csv")
    trace.write_epoch_csv(out / "train_epochs.csv")
    report = evaluate(best, vx, vy)
    write_json(out / "metrics.json", {"split": "validation", "best_epoch": trace.best_epoch,
                                      "checkpoint_sha256": digest, **report.to_dict()})
    (out / "metrics.txt").write_text(report.to_text() + "\n")
    print(f"best epoch {trace.best_epoch}; validation metrics:\n{report.to_text()}")
    return EXIT_OK


def run_evaluate(cfg: dict, out: Path) -> int:
    model, _, _ = load_checkpoint(cfg["checkpoint"])
    dim = model.input_dim if cfg.get("dim") is None else int(cfg["dim"])
    if dim != model.input_dim:
        raise IncompatibleModelError(f"checkpoint expects feature dim {model.input_dim}, data featurized at dim {dim}")
    if cfg["mode"] == "absolute":
        samples = load_dataset(cfg["data"])
        if not samples:
            raise ConfigError("dataset is empty")
        report = evaluate(model, featurize_many(samples, dim), scores_of(samples))
        write_json(out / "metrics.json", report.to_dict())
        (out / "metrics.txt").write_text(report.to_text() + "\n")
        print(report.to_text())
    elif cfg["mode"] == "relative":
        pairs = load_pairs(cfg["data"])
        eps = [float(e) for e in cfg["tie_epsilon"]]
        acc = accuracy_by_epsilon(model, pairs, eps)
        write_json(out / "relative.json", {"n": len(pairs), "accuracy": [{"tie_epsilon": e, "accuracy": a} for e, a in acc.items()]})
        lines = ["tie_epsilon  accuracy"] + [f"{e:<11g}  {a:.6f}" for e, a in acc.items()]
        (out / "relative.txt").write_text("\n".join(lines) + "\n")
        print("\n".join(lines))
    else:
        raise ConfigError(f"mode must be absolute or relative, got {cfg['mode']!r}")
    return EXIT_OK


def run_compare_losses(cfg: dict, out: Path) -> int:
    heads = [HeadConfig.from_dict(h) for h in cfg["heads"]]
    samples = load_dataset(cfg["data"])
    dim = int(cfg["dim"])
    x, y = featurize_many(samples, dim), scores_of(samples)
    base = _train_config(cfg, LossSpec(), int(cfg["seed"]))
    result = compare_losses(x, y, heads, base, [int(s) for s in cfg["seeds"]],
                            float(cfg["train_fraction"]), int(cfg["jobs"]))
    result.write_table_csv(out / "comparison.csv")
    result.write_curves_csv(out / "curves.csv")
    (out / "comparison.txt").write_text(result.to_text() + "\n")
    print(result.to_text())
    return EXIT_NUMERIC if any(r.error for r in result.runs) else EXIT_OK


COMMANDS = {
    "gen-synthetic": run_gen_synthetic,
    "augment": run_augment,
    "train": run_train,
    "evaluate": run_evaluate,
    "compare-losses": run_compare_losses,
}


def execute(command: str, cfg: dict, out=None) -> int:
    out = Path(out if out is not None else cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    code = COMMANDS[command](cfg, out)
    write_manifest(out, command, cfg)
    return code


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="root seed (default 0)")
    p.add_argument("--jobs", type=int, help="worker processes for compare-losses")
    p.add_argument("--out", help="output directory (default ./out)")
    p.add_argument("--config", help="TOML or JSON config file")


def _train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--warmup-ratio", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--schedule", choices=["cosine", "constant"])
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--dim", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ordgrade", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="write the synthetic grading benchmark")
    _common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--pairs", type=int)
    p.add_argument("--label-noise", type=float)
    p.add_argument("--evidence-tokens", type=int)
    p.add_argument("--min-gap", type=float)

    p = sub.add_parser("augment", help="drop rubric/reference answers at random")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--drop-rubric", dest="drop_rubric_prob", type=float)
    p.add_argument("--drop-reference", dest="drop_reference_prob", type=float)

    p = sub.add_parser("train", help="train one scorer head")
    _common(p)
    _train_flags(p)
    p.add_argument("--data")
    p.add_argument("--head", choices=[k.value for k in HeadKind])
    p.add_argument("--hidden-size", type=int)
    p.add_argument("--loss", dest="loss_kind")
    p.add_argument("--p-order", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--l-order", type=float)
    p.add_argument("--reduction")
    p.add_argument("--augment", action="store_true", default=None)

    p = sub.add_parser("evaluate", help="score a dataset with a checkpoint")
    _common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--mode", choices=["absolute", "relative"])
    p.add_argument("--dim", type=int)
    p.add_argument("--tie-epsilon", type=float, nargs="+")

    p = sub.add_parser("compare-losses", help="compare heads/losses over seeds")
    _common(p)
    _train_flags(p)
    p.add_argument("--data")
    p.add_argument("--seeds", type=int, nargs="+")

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: the manifest's)")
    return parser


_LOSS_FLAGS = {"loss_kind": "kind", "p_order": "p_order", "alpha": "alpha", "l_order": "l_order", "reduction": "reduction"}


def _flags(args: argparse.Namespace) -> dict:
    flags = {}
    loss = {}
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose") or value is None:
            continue
        if key in _LOSS_FLAGS:
            loss[_LOSS_FLAGS[key]] = value
        else:
            flags[key] = value
    if loss:
        flags["loss"] = loss
    return flags


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "replay":
            with open(args.manifest, encoding="utf-8") as fh:
                manifest = json.load(fh)
            command, cfg = manifest["command"], manifest["config"]
            if command not in COMMANDS:
                raise ConfigError(f"manifest names unknown command {command!r}")
            if args.out:
                cfg["out"] = args.out
            return execute(command, cfg)
        file_cfg = read_config_file(args.config) if args.config else {}
        cfg = resolve(args.command, file_cfg, _flags(args))
        return execute(args.command, cfg)
    except OrdgradeError as exc:
        print(f"ordgrade: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        print(f"ordgrade: error: bad configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ordgrade: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
