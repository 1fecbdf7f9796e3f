"""Command-line entry point: ``oddl {train,eval,export-atoms,bench}``.

Exit codes: 0 ok, 2 missing/invalid configuration or data, 3 dimension or
format mismatch, 4 failed runs inside ``bench``.
"""

import argparse
import json
import math
import sys
import time
from dataclasses import fields
from pathlib import Path

from .datasets import load_manifest, load_split
from .errors import ConfigError, DataError, FormatError, InvalidInputError
from .inference import evaluate
from .persistence import load_model, save_model
from .trainer import INIT_MODES, MODES, TrainerConfig, train
from .visualize import atom_grid, write_pgm

EXIT_OK, EXIT_CONFIG, EXIT_MISMATCH, EXIT_BENCH = 0, 2, 3, 4


def _bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# config-file key -> (TrainerConfig field or None for run options, parser)
CONFIG_KEYS = {
    "manifest": (None, str),
    "out": (None, str),
    "log": (None, str),
    "k": ("n_atoms", int),
    "sparsity": ("sparsity", int),
    "lambda0": ("lambda0", float),
    "lambda1": ("lambda1", float),
    "minibatch": ("batch_size", int),
    "epochs": ("n_epochs", int),
    "max_samples": ("max_samples", int),
    "seed": ("seed", int),
    "mode": ("mode", str),
    "init_mode": ("init_mode", str),
    "tol": ("tol", float),
    "max_sweeps": ("max_sweeps", int),
    "log_every": ("log_every", int),
    "replace_dead_atoms": ("replace_dead_atoms", _bool),
    "normalize_inside": ("normalize_inside", _bool),
}


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key][1](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def _collect(args):
    """Config file values overlaid with explicit command-line flags."""
    values = read_config(args.config) if getattr(args, "config", None) else {}
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _trainer_config(values):
    known = {f.name for f in fields(TrainerConfig)}
    kwargs = {}
    for key, value in values.items():
        field_name = CONFIG_KEYS[key][0]
        if field_name is not None and field_name in known:
            kwargs[field_name] = value
    return TrainerConfig(**kwargs)


def _require(values, key):
    if key not in values:
        raise ConfigError(f"missing required option {key!r} (flag --{key} or config key)")
    return values[key]


def _emit(text, path=None):
    print(text)
    if path:
        Path(path).write_text(text + "\n")


def cmd_train(args):
    values = _collect(args)
    manifest = load_manifest(_require(values, "manifest"))
    out = Path(_require(values, "out"))
    config = _trainer_config(values)
    if "log_every" not in values:
        config.log_every = 100
    config.validate()
    data = load_split(manifest, "train")
    log_path = Path(values.get("log", str(out) + ".log.jsonl"))
    with open(log_path, "w") as log:
        def progress(record):
            log.write(json.dumps(record, sort_keys=True) + "\n")

        state = train(data, config, progress)
    class_names = data.class_names if config.mode == "discriminative" else []
    model = state.to_model(class_names)
    model.metadata["dataset"] = manifest.name
    save_model(model, out)
    summary = {"model": str(out), "log": str(log_path), "n_features": model.n_features,
               "n_atoms": model.n_atoms, "n_classes": model.n_classes,
               "samples_seen": state.acc.samples_seen, "mode": config.mode}
    if args.report == "structured":
        print(json.dumps(summary, sort_keys=True))
    else:
        print(f"wrote {out} (n={model.n_features}, k={model.n_atoms}, q={model.n_classes}, "
              f"samples={state.acc.samples_seen}, mode={config.mode})")
    return EXIT_OK


def _check_compatible(model, data):
    if model.n_classes == 0:
        raise InvalidInputError("model has no classifier block (trained in reconstructive mode)")
    if model.n_features != data.n_features:
        raise InvalidInputError(
            f"dimension mismatch: model expects n={model.n_features} features, "
            f"dataset has n={data.n_features}"
        )
    if model.n_classes != data.n_classes:
        raise InvalidInputError(
            f"class mismatch: model has q={model.n_classes} classes, dataset declares "
            f"q={data.n_classes}"
        )


def cmd_eval(args):
    model = load_model(args.model)
    manifest = load_manifest(args.manifest)
    data = load_split(manifest, args.split)
    _check_compatible(model, data)
    report = evaluate(model, data.X, data.labels)
    text = report.to_json() if args.report == "structured" else report.to_text()
    _emit(text, args.out)
    return EXIT_OK


def cmd_export_atoms(args):
    model = load_model(args.model)
    height, width = args.height, args.width
    if height is None and width is None:
        side = math.isqrt(model.n_features)
        if side * side != model.n_features:
            raise InvalidInputError(
                f"atoms of length {model.n_features} are not square; pass --height/--width"
            )
        height = width = side
    elif height is None:
        height = model.n_features // width
    elif width is None:
        width = model.n_features // height
    if height * width != model.n_features:
        raise InvalidInputError(
            f"atoms of length {model.n_features} cannot be shown as {height}x{width}"
        )
    cols = args.cols or math.ceil(math.sqrt(model.n_atoms))
    write_pgm(atom_grid(model.D, height, width, cols), args.out)
    print(f"wrote {args.out} ({model.n_atoms} atoms, {height}x{width}, {cols} per row)")
    return EXIT_OK


def _parse_ks(text):
    try:
        ks = sorted({int(t) for t in text.split(",") if t.strip()})
    except ValueError:
        raise ConfigError(f"--ks must be a comma-separated list of integers, got {text!r}") from None
    if not ks:
        raise ConfigError("--ks lists no dictionary sizes")
    return ks


def cmd_bench(args):
    values = _collect(args)
    manifest = load_manifest(_require(values, "manifest"))
    ks = _parse_ks(args.ks)
    if args.repeats < 1:
        raise ConfigError("--repeats must be >= 1")
    base = _trainer_config(values)
    base.validate()
    train_set = load_split(manifest, "train")
    test_set = load_split(manifest, "test")
    rows, failures = [], []
    for k in ks:
        errors, walls = [], []
        for rep in range(args.repeats):
            config = _trainer_config({**values, "k": k, "seed": base.seed + rep})
            start = time.perf_counter()
            try:
                model = train(train_set, config).to_model(train_set.class_names)
                report = evaluate(model, test_set.X, test_set.labels)
            except Exception as exc:  # each sweep point is independent
                failures.append(f"k={k} repeat={rep}: {exc}")
                continue
            walls.append(time.perf_counter() - start)
            errors.append(report.error_rate)
        rows.append({
            "k": k,
            "error_rate": sum(errors) / len(errors) if errors else None,
            "wall_time_s": sum(walls) / len(walls) if walls else None,
            "runs": len(errors),
        })
    if args.report == "structured":
        text = json.dumps({"manifest": manifest.name, "rows": rows, "failures": failures},
                          sort_keys=True, indent=2)
    else:
        lines = ["k\terror_rate\twall_time_s\truns"]
        for r in rows:
            err = "failed" if r["error_rate"] is None else f"{r['error_rate']:.4f}"
            wall = "-" if r["wall_time_s"] is None else f"{r['wall_time_s']:.3f}"
            lines.append(f"{r['k']}\t{err}\t{wall}\t{r['runs']}")
        text = "\n".join(lines)
    _emit(text, args.out)
    if failures:
        for f in failures:
            print(f"bench failure: {f}", file=sys.stderr)
        return EXIT_BENCH
    return EXIT_OK


def _add_training_flags(p):
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--manifest", help="dataset manifest (JSON)")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--mode", choices=MODES, help="training objective")
    p.add_argument("--init-mode", dest="init_mode", choices=INIT_MODES,
                   help="dictionary initialization")
    p.add_argument("--k", type=int, help="number of atoms")
    p.add_argument("--sparsity", type=int, help="nonzeros per sparse code (L)")
    p.add_argument("--lambda0", type=float, help="weight of the classification term")
    p.add_argument("--lambda1", type=float, help="ridge weight of the classifier initialization")
    p.add_argument("--minibatch", type=int, help="samples per iteration")
    p.add_argument("--epochs", type=int, help="passes over the training set")
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int,
                   help="inner block-coordinate sweeps per iteration")
    p.add_argument("--report", choices=("text", "structured"), default="text",
                   help="output style")


def build_parser():
    parser = argparse.ArgumentParser(prog="oddl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a model file")
    _add_training_flags(p)
    p.add_argument("--out", help="model file to write")
    p.add_argument("--log", help="training log (JSON lines); default <out>.log.jsonl")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a manifest split")
    p.add_argument("model", help="model file")
    p.add_argument("--manifest", required=True, help="dataset manifest (JSON)")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--report", choices=("text", "structured"), default="text")
    p.add_argument("--out", help="also write the report to this path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-atoms", help="write the dictionary atoms as a PGM grid")
    p.add_argument("model", help="model file")
    p.add_argument("out", help="PGM file to write")
    p.add_argument("--cols", type=int, help="atoms per grid row (default: ~sqrt(k))")
    p.add_argument("--height", type=int, help="atom image height")
    p.add_argument("--width", type=int, help="atom image width")
    p.set_defaults(func=cmd_export_atoms)

    p = sub.add_parser("bench", help="train and evaluate over several dictionary sizes")
    _add_training_flags(p)
    p.add_argument("--ks", required=True, help="comma-separated dictionary sizes")
    p.add_argument("--repeats", type=int, default=1, help="seeded repetitions per size")
    p.add_argument("--out", help="also write the table to this path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"oddl: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"oddl: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, InvalidInputError, DataError) as exc:
        print(f"oddl: error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
