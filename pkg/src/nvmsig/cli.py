"""Command-line surface: reproducible experiments and one-shot verdicts.

Every generation command records a manifest (flat key = value text) next
to its artifact; running the same command with `--config <manifest>`
rebuilds the artifact byte for byte.  Wall-clock timings are printed to
stdout, never written into artifacts, so the byte-identity holds.
"""

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from types import SimpleNamespace

import numpy as np

from . import __version__
from .chipsim import (
    cycle_location,
    dump_catalog,
    full_chip_scan,
    latency_block,
    load_catalog,
    new_chip,
)
from .classifiers import (
    KINDS,
    cross_validate,
    evaluate,
    load_model,
    save_model,
    train_knn,
    train_svm,
    train_tree,
)
from .detector import (
    baseline_from_catalog,
    diagnose_probe,
    load_map,
    locate_used_regions,
    save_map,
)
from .errors import NumericError, NvmsigError, ParseError, ValidationError
from .features import apply_standardizer, fit_standardizer, mrmr_select, nca_select
from .protocol import DEFAULT_CHECKPOINTS, build_dataset, load_dataset, save_dataset, split

OUT_DIR_ENV = "NVMSIG_OUT"
SELECTORS = ("none", "mrmr", "nca")


# ------------------------------------------------------------ config values

def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_ints(text: str):
    return [int(p) for p in text.split(",") if p.strip() != ""]


def _parse_gamma(text: str):
    return "auto" if text.strip() == "auto" else float(text)


def _parse_spots(text: str):
    """'addr:cycles,addr:cycles' pairs for pre-cycling scan targets."""
    spots = []
    for part in text.split(","):
        addr, sep, cycles = part.partition(":")
        if not sep:
            raise ValueError(f"expected addr:cycles, got {part!r}")
        spots.append((int(addr), int(cycles)))
    return spots


class _Field(SimpleNamespace):
    def __init__(self, parse, default, help):
        super().__init__(parse=parse, default=default, help=help)


_SCHEMA = {
    "seed": _Field(int, None, "root seed; all randomness derives from it"),
    "catalog": _Field(str, "builtin", "catalog CSV path, or 'builtin'"),
    "classes": _Field(_parse_ints, None, "class tags to include (default all)"),
    "chips_per_class": _Field(int, 3, "simulated chips per class"),
    "checkpoints": _Field(_parse_ints, list(DEFAULT_CHECKPOINTS),
                          "wear counts where probes are captured"),
    "group": _Field(int, 100, "consecutive cycles captured per probe"),
    "locations_per_chip": _Field(int, 12, "probed addresses per chip"),
    "split": _Field(_parse_bool, False, "also write .train/.test files"),
    "train_fraction": _Field(float, 0.8, "train share of the split"),
    "split_seed": _Field(int, None, "split stream seed (default: seed)"),
    "kind": _Field(str, "knn", "classifier: knn, tree, or svm"),
    "k": _Field(int, 5, "knn neighbor count"),
    "max_depth": _Field(int, 20, "tree depth limit"),
    "min_leaf": _Field(int, 1, "minimum samples per tree leaf"),
    "c": _Field(float, 1.0, "svm box constraint C"),
    "gamma": _Field(_parse_gamma, "auto", "svm RBF gamma, or 'auto'"),
    "tol": _Field(float, 1e-3, "svm KKT tolerance"),
    "max_passes": _Field(int, 10, "svm quiet sweeps before stopping"),
    "selector": _Field(str, "none", "feature selector: none, mrmr, or nca"),
    "select_k": _Field(int, 25, "features kept by the selector"),
    "mrmr_bins": _Field(int, 16, "histogram bins for mutual information"),
    "nca_iters": _Field(int, 200, "nca gradient steps"),
    "nca_lr": _Field(float, 0.01, "nca learning rate"),
    "nca_subsample": _Field(_parse_bool, False, "cap nca fit to 1000 samples"),
    "folds": _Field(int, 8, "cross-validation folds"),
    "class_tag": _Field(int, 0, "chip class tag"),
    "addr": _Field(int, 0, "location address"),
    "cycles": _Field(int, 1000, "operations to simulate"),
    "spots": _Field(_parse_spots, [], "addr:cycles pairs to pre-cycle"),
    "flag_ratio": _Field(float, 1.5, "elevation ratio that flags an address"),
    "used_threshold": _Field(float, 1.3, "elevation ratio called USED"),
    "fresh_threshold": _Field(float, 1.1, "elevation ratio called FRESH"),
    "jobs": _Field(int, 1, "worker processes for sweep cells"),
    "out_dir": _Field(str, None, f"output directory (default ${OUT_DIR_ENV} or '.')"),
    "out": _Field(str, None, "output file (or prefix) inside out_dir"),
    "dataset": _Field(str, None, "dataset CSV path"),
    "train": _Field(str, None, "training dataset CSV path"),
    "test": _Field(str, None, "test dataset CSV path"),
    "model": _Field(str, None, "model file path"),
    "probe": _Field(str, None, "probe CSV path (last column latency_us)"),
    "map": _Field(str, None, "spatial map CSV path"),
    "map_out": _Field(str, None, "write the scanned map CSV here"),
}

# config-file spelling -> schema key
_KEY_ALIASES = {"class": "class_tag"}


def read_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    values = {}
    for ln, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ParseError("expected 'key = value'", line=ln)
        key = key.strip()
        key = _KEY_ALIASES.get(key, key)
        if key not in _SCHEMA:
            raise ParseError(f"unknown key '{key}'", line=ln)
        try:
            values[key] = _SCHEMA[key].parse(val.strip())
        except ValueError as exc:
            raise ParseError(str(exc), line=ln) from None
    return values


def merge_config(args) -> SimpleNamespace:
    """Defaults, then config-file keys, then explicit CLI flags."""
    values = {k: f.default for k, f in _SCHEMA.items()}
    if getattr(args, "config", None):
        values.update(read_config(args.config))
    for key in _SCHEMA:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if values["split_seed"] is None:
        values["split_seed"] = values["seed"]
    if values["out_dir"] is None:
        values["out_dir"] = os.environ.get(OUT_DIR_ENV, ".")
    if values["selector"] not in SELECTORS:
        raise ValidationError(f"selector must be one of {SELECTORS}")
    return SimpleNamespace(**values)


def _require_seed(cfg, command: str) -> None:
    if cfg.seed is None:
        raise ValidationError(f"--seed is required for '{command}'")


# ----------------------------------------------------------------- file I/O

def _out_path(cfg, name: str) -> str:
    path = name if os.path.isabs(name) else os.path.join(cfg.out_dir, name)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _write_text(path: str, text: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], tuple):
            return ",".join(f"{a}:{c}" for a, c in value)
        return ",".join(str(v) for v in value)
    return str(value)


def _write_manifest(path: str, command: str, cfg, keys) -> None:
    lines = [f"# nvmsig {__version__} {command} manifest; rerun with --config"]
    for key in keys:
        value = getattr(cfg, key)
        if value is None:
            continue
        lines.append(f"{key} = {_format_value(value)}")
    _write_text(path, "\n".join(lines) + "\n")


def _load_probe(path) -> np.ndarray:
    """Latency vector from a CSV whose last column is latency_us."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty probe file", line=1)
    header = lines[0].split(",")
    if header[-1] != "latency_us":
        raise ParseError("expected a trailing latency_us column", line=1)
    values = []
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(f"expected {len(header)} columns", line=ln)
        try:
            values.append(float(parts[-1]))
        except ValueError:
            raise ParseError("bad latency value", line=ln) from None
    if not values:
        raise ParseError("probe file has no data rows", line=1)
    return np.array(values)


def _catalog_by_tag(cfg) -> dict:
    return {s.class_tag: s for s in load_catalog(cfg.catalog)}


def _spec_for(cfg, tag: int):
    specs = _catalog_by_tag(cfg)
    if tag not in specs:
        raise ValidationError(f"class tag {tag} not in catalog "
                              f"(have {sorted(specs)})")
    return specs[tag]


# ------------------------------------------------------------ training glue

class _XY:
    def __init__(self, X, y, class_names):
        self.X = X
        self.y = y
        self.class_names = class_names


def _compute_ranking(cfg, ds, selector: str):
    if selector == "mrmr":
        return mrmr_select(ds, k=cfg.select_k, bins=cfg.mrmr_bins)
    # nca is distance-based, so rank on standardized features
    stats = fit_standardizer(np.asarray(ds.X, dtype=np.float64))
    z = apply_standardizer(stats, ds.X)
    return nca_select(_XY(z, ds.y, getattr(ds, "class_names", {})),
                      k=cfg.select_k, iters=cfg.nca_iters,
                      learning_rate=cfg.nca_lr, subsample=cfg.nca_subsample)


def _ranking_fn(cfg, selector: str):
    if selector == "none":
        return None
    return lambda ds: _compute_ranking(cfg, ds, selector)


def _train_model(cfg, ds, kind: str, selector: str):
    ranking, sel_time = None, 0.0
    if selector != "none":
        t0 = time.perf_counter()
        ranking = _compute_ranking(cfg, ds, selector)
        sel_time = time.perf_counter() - t0
    if kind == "knn":
        return train_knn(ds, k=cfg.k, ranking=ranking, selection_time_s=sel_time)
    if kind == "tree":
        return train_tree(ds, max_depth=cfg.max_depth, min_leaf=cfg.min_leaf,
                          ranking=ranking, selection_time_s=sel_time)
    if kind == "svm":
        return train_svm(ds, C=cfg.c, gamma=cfg.gamma, tol=cfg.tol,
                         max_passes=cfg.max_passes, seed=cfg.seed,
                         ranking=ranking, selection_time_s=sel_time)
    raise ValidationError(f"unknown classifier kind '{kind}'")


def _table_row(kind: str, selector: str, n_features: int, report) -> str:
    return (f"{kind:<5} {selector:<5} features={n_features:<3} "
            f"acc={report.accuracy:.4f} select={report.selection_time_s:.4f}s "
            f"train={report.train_time_s:.4f}s infer={report.infer_time_s:.4f}s "
            f"per_sample={report.infer_time_per_sample_s:.6f}s")


# ---------------------------------------------------------------- commands

def cmd_catalog(args) -> int:
    cfg = merge_config(args)
    text = dump_catalog(load_catalog(cfg.catalog))
    if cfg.out:
        path = _out_path(cfg, cfg.out)
        _write_text(path, text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    cfg = merge_config(args)
    _require_seed(cfg, "simulate")
    if cfg.cycles < 1:
        raise ValidationError("cycles must be >= 1")
    spec = _spec_for(cfg, cfg.class_tag)
    chip = new_chip(spec, cfg.seed)
    lat = latency_block(chip, cfg.addr, cfg.cycles)
    text = "cycle,latency_us\n" + "".join(
        f"{i},{v:.6f}\n" for i, v in enumerate(lat))
    if cfg.out:
        path = _out_path(cfg, cfg.out)
        _write_text(path, text)
        _write_manifest(path + ".manifest", "simulate", cfg,
                        ["seed", "catalog", "class_tag", "addr", "cycles", "out"])
        print(f"wrote {path} ({cfg.cycles} rows)")
    else:
        sys.stdout.write(text)
    return 0


def cmd_dataset(args) -> int:
    cfg = merge_config(args)
    _require_seed(cfg, "dataset")
    catalog = load_catalog(cfg.catalog)
    if cfg.classes is not None:
        by_tag = {s.class_tag: s for s in catalog}
        missing = [t for t in cfg.classes if t not in by_tag]
        if missing:
            raise ValidationError(f"class tags {missing} not in catalog")
        catalog = [by_tag[t] for t in cfg.classes]
    ds = build_dataset(catalog, chips_per_class=cfg.chips_per_class,
                       checkpoints=cfg.checkpoints, group=cfg.group,
                       locations_per_chip=cfg.locations_per_chip,
                       seed=cfg.seed)
    name = cfg.out if cfg.out else "dataset.csv"
    path = _out_path(cfg, name)
    save_dataset(ds, path)
    keys = ["seed", "catalog", "classes", "chips_per_class", "checkpoints",
            "group", "locations_per_chip", "out"]
    print(f"wrote {path} ({ds.y.size} samples, {len(ds.class_counts())} classes)")
    if cfg.split:
        train_ds, test_ds = split(ds, train_fraction=cfg.train_fraction,
                                  seed=cfg.split_seed)
        stem = path[:-4] if path.endswith(".csv") else path
        save_dataset(train_ds, stem + ".train.csv")
        save_dataset(test_ds, stem + ".test.csv")
        keys += ["split", "train_fraction", "split_seed"]
        print(f"wrote {stem}.train.csv ({train_ds.y.size} samples)")
        print(f"wrote {stem}.test.csv ({test_ds.y.size} samples)")
    _write_manifest(path + ".manifest", "dataset", cfg, keys)
    return 0


_TRAIN_KEYS = ["seed", "dataset", "kind", "k", "max_depth", "min_leaf", "c",
               "gamma", "tol", "max_passes", "selector", "select_k",
               "mrmr_bins", "nca_iters", "nca_lr", "nca_subsample", "out"]


def cmd_train(args) -> int:
    cfg = merge_config(args)
    _require_seed(cfg, "train")
    if cfg.dataset is None:
        raise ValidationError("train needs --dataset")
    ds = load_dataset(cfg.dataset)
    model = _train_model(cfg, ds, cfg.kind, cfg.selector)
    name = cfg.out if cfg.out else "model.txt"
    path = _out_path(cfg, name)
    save_model(model, path)
    _write_manifest(path + ".manifest", "train", cfg, _TRAIN_KEYS)
    print(f"wrote {path}")
    print(f"kind={model.kind} selector={model.selection_method} "
          f"features={model.indices.size} samples={model.n_train} "
          f"select={model.selection_time_s:.4f}s train={model.train_time_s:.4f}s")
    return 0


def cmd_crossval(args) -> int:
    cfg = merge_config(args)
    if cfg.dataset is None:
        raise ValidationError("crossval needs --dataset")
    ds = load_dataset(cfg.dataset)
    seed = cfg.seed if cfg.seed is not None else 0
    hyper = {"knn": {"k": cfg.k},
             "tree": {"max_depth": cfg.max_depth, "min_leaf": cfg.min_leaf},
             "svm": {"C": cfg.c, "gamma": cfg.gamma, "tol": cfg.tol,
                     "max_passes": cfg.max_passes, "seed": seed}}
    if cfg.kind not in hyper:
        raise ValidationError(f"unknown classifier kind '{cfg.kind}'")
    result = cross_validate(cfg.kind, ds, folds=cfg.folds, seed=seed,
                            ranking_fn=_ranking_fn(cfg, cfg.selector),
                            **hyper[cfg.kind])
    lines = [f"fold {i},{acc:.6f}" for i, acc in enumerate(result.accuracies)]
    table = "\n".join(lines)
    print(f"kind={cfg.kind} selector={cfg.selector} folds={cfg.folds} seed={seed}")
    print(table.replace(",", ": "))
    print(f"mean={result.mean_accuracy:.6f} stdev={result.stdev_accuracy:.6f}")
    if cfg.out:
        path = _out_path(cfg, cfg.out)
        csv = "fold,accuracy\n" + "".join(
            f"{i},{acc:.6f}\n" for i, acc in enumerate(result.accuracies))
        csv += f"mean,{result.mean_accuracy:.6f}\nstdev,{result.stdev_accuracy:.6f}\n"
        _write_text(path, csv)
        print(f"wrote {path}")
    return 0


def cmd_eval(args) -> int:
    cfg = merge_config(args)
    if cfg.model is None or cfg.dataset is None:
        raise ValidationError("eval needs --model and --dataset")
    model = load_model(cfg.model)
    test = load_dataset(cfg.dataset)
    report = evaluate(model, test)
    prefix = _out_path(cfg, cfg.out if cfg.out else "eval")
    _write_text(prefix + ".report.txt", report.to_text())
    _write_text(prefix + ".confusion.csv", report.to_csv())
    # loaded models carry no stored wall-clock, so train time prints as 0;
    # the sweep command reports in-process training times
    print(_table_row(model.kind, model.selection_method, model.indices.size,
                     report))
    print(f"wrote {prefix}.report.txt and {prefix}.confusion.csv")
    return 0


def _sweep_cell(payload):
    values, kind, selector, train_ds, test_ds = payload
    cfg = SimpleNamespace(**values)
    model = _train_model(cfg, train_ds, kind, selector)
    return model, evaluate(model, test_ds)


def cmd_sweep(args) -> int:
    cfg = merge_config(args)
    _require_seed(cfg, "sweep")
    if cfg.train is not None and cfg.test is not None:
        train_ds, test_ds = load_dataset(cfg.train), load_dataset(cfg.test)
    elif cfg.dataset is not None:
        train_ds, test_ds = split(load_dataset(cfg.dataset),
                                  train_fraction=cfg.train_fraction,
                                  seed=cfg.split_seed)
    else:
        raise ValidationError("sweep needs --dataset or --train/--test")
    payloads = [(vars(cfg), kind, sel, train_ds, test_ds)
                for kind in KINDS for sel in SELECTORS]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_sweep_cell, payloads))
    else:
        results = [_sweep_cell(p) for p in payloads]
    rows = ["method,selector,n_features,accuracy"]
    for (_, kind, sel, _, _), (model, report) in zip(payloads, results):
        print(_table_row(kind, sel, model.indices.size, report))
        rows.append(f"{kind},{sel},{model.indices.size},{report.accuracy:.6f}")
        stem = _out_path(cfg, f"sweep_{kind}_{sel}")
        save_model(model, stem + ".model.txt")
        _write_text(stem + ".confusion.csv", report.to_csv())
    path = _out_path(cfg, "sweep.csv")
    _write_text(path, "\n".join(rows) + "\n")
    _write_manifest(path + ".manifest", "sweep", cfg,
                    ["seed", "dataset", "train", "test", "train_fraction",
                     "split_seed"] + [k for k in _TRAIN_KEYS
                                      if k not in ("seed", "dataset", "kind",
                                                   "selector", "out")])
    print(f"wrote {path}")
    return 0


def cmd_predict(args) -> int:
    cfg = merge_config(args)
    if cfg.model is None or cfg.probe is None:
        raise ValidationError("predict needs --model and --probe")
    model = load_model(cfg.model)
    probe = _load_probe(cfg.probe)
    baseline = baseline_from_catalog(load_catalog(cfg.catalog))
    report = diagnose_probe(probe, model, baseline,
                            used_threshold=cfg.used_threshold,
                            fresh_threshold=cfg.fresh_threshold)
    sys.stdout.write(report.to_text())
    if cfg.out:
        prefix = _out_path(cfg, cfg.out)
        _write_text(prefix + ".txt", report.to_text())
        _write_text(prefix + ".csv", report.to_csv())
        print(f"wrote {prefix}.txt and {prefix}.csv")
    return 0


def cmd_scan(args) -> int:
    cfg = merge_config(args)
    if cfg.map is not None:
        latency_map = load_map(cfg.map)
    else:
        _require_seed(cfg, "scan of a simulated chip")
        spec = _spec_for(cfg, cfg.class_tag)
        chip = new_chip(spec, cfg.seed)
        for addr, cycles in cfg.spots:
            cycle_location(chip, addr, cycles)
        latency_map = full_chip_scan(chip)
        if cfg.map_out:
            path = _out_path(cfg, cfg.map_out)
            save_map(latency_map, path)
            _write_manifest(path + ".manifest", "scan", cfg,
                            ["seed", "catalog", "class_tag", "spots", "map_out"])
            print(f"wrote {path}")
    regions = locate_used_regions(latency_map, flag_ratio=cfg.flag_ratio)
    print(f"scanned {len(latency_map)} addresses at flag ratio {cfg.flag_ratio:g}")
    if not regions:
        print("no used regions")
    else:
        print("used regions (start, end, peak ratio):")
        for r in regions:
            print(f"  {r.start_addr} {r.end_addr} {r.peak_ratio:.4f}")
    if cfg.out:
        path = _out_path(cfg, cfg.out)
        csv = "start_addr,end_addr,peak_ratio\n" + "".join(
            f"{r.start_addr},{r.end_addr},{r.peak_ratio:.6f}\n" for r in regions)
        _write_text(path, csv)
        print(f"wrote {path}")
    return 0


# ------------------------------------------------------------------ parsing

class _Parser(argparse.ArgumentParser):
    """argparse that reports bad usage as a validation error (exit 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _add(parser, key: str, flag: str = None, **extra):
    f = _SCHEMA[key]
    parser.add_argument(flag or f"--{key.replace('_', '-')}", dest=key,
                        type=f.parse, default=None,
                        help=f"{f.help} (default: {_format_value(f.default)})",
                        **extra)


def _add_bool(parser, key: str):
    f = _SCHEMA[key]
    parser.add_argument(f"--{key.replace('_', '-')}", dest=key,
                        action=argparse.BooleanOptionalAction, default=None,
                        help=f"{f.help} (default: {_format_value(f.default)})")


_EPILOG = f"""\
config files are flat `key = value` lines; '#' starts a comment; CLI flags
override config values.  all randomness flows from --seed: chips, the
train/test split, and the SMO order draw fixed independent substreams.
relative output paths land in --out-dir, else ${OUT_DIR_ENV}, else '.'.
exit codes: 0 success, 1 validation error, 2 I/O error, 3 numeric failure.
"""


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="nvmsig", epilog=_EPILOG,
                   formatter_class=argparse.RawDescriptionHelpFormatter,
                   description="chip-origin and usage forensics from "
                               "program/erase latency signatures")
    root.add_argument("--version", action="version",
                      version=f"nvmsig {__version__}")
    sub = root.add_subparsers(dest="command", metavar="command")

    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    for key in ("seed", "catalog", "out_dir", "jobs"):
        _add(common, key)

    p = sub.add_parser("catalog", parents=[common],
                       help="dump the chip-class catalog as CSV")
    _add(p, "out")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("simulate", parents=[common],
                       help="per-cycle latency trace for one location")
    _add(p, "class_tag", "--class", metavar="TAG")
    _add(p, "addr")
    _add(p, "cycles")
    _add(p, "out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dataset", parents=[common],
                       help="build a labeled latency-signature dataset")
    for key in ("classes", "chips_per_class", "checkpoints", "group",
                "locations_per_chip", "train_fraction", "split_seed", "out"):
        _add(p, key)
    _add_bool(p, "split")
    p.set_defaults(func=cmd_dataset)

    model_keys = ("kind", "k", "max_depth", "min_leaf", "c", "gamma", "tol",
                  "max_passes", "selector", "select_k", "mrmr_bins",
                  "nca_iters", "nca_lr")

    p = sub.add_parser("train", parents=[common],
                       help="train a classifier and save the model file")
    _add(p, "dataset")
    for key in model_keys:
        _add(p, key)
    _add_bool(p, "nca_subsample")
    _add(p, "out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("crossval", parents=[common],
                       help="k-fold cross-validation accuracy table")
    _add(p, "dataset")
    _add(p, "folds")
    for key in model_keys:
        _add(p, key)
    _add_bool(p, "nca_subsample")
    _add(p, "out")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("eval", parents=[common],
                       help="score a saved model on a labeled dataset")
    _add(p, "model")
    _add(p, "dataset")
    _add(p, "out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common],
                       help="all classifier x selector cells in one run")
    for key in ("dataset", "train", "test", "train_fraction", "split_seed"):
        _add(p, key)
    for key in model_keys:
        if key not in ("kind", "selector"):
            _add(p, key)
    _add_bool(p, "nca_subsample")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", parents=[common],
                       help="identify a probe and judge fresh vs used")
    _add(p, "model")
    _add(p, "probe")
    _add(p, "used_threshold")
    _add(p, "fresh_threshold")
    _add(p, "out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("scan", parents=[common],
                       help="locate used regions on a map or simulated chip")
    _add(p, "map")
    _add(p, "class_tag", "--class", metavar="TAG")
    _add(p, "spots")
    _add(p, "flag_ratio")
    _add(p, "map_out")
    _add(p, "out")
    p.set_defaults(func=cmd_scan)

    return root


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            parser.print_usage(sys.stderr)
            return 1
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NvmsigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
