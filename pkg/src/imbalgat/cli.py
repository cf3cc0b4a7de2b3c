"""Command-line interface: ``imbalgat {train,eval,reproduce,gradcheck,inspect,sweep}``.

Exit codes: 0 ok, 1 config, 2 data, 3 numerical abort, 4 gap to published values (``reproduce
--strict``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import experiments, gradcheck, graphio, published
from .config import ConfigError, ExperimentConfig, load_config
from .graphio import DatasetError
from .models import CheckpointError, load_checkpoint, save_checkpoint
from .trainer import DEFAULT_LAMBDA_GRID, TrainingAborted, architecture_for, evaluate, sweep, train

log = logging.getLogger("imbalgat")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_GAP = 0, 1, 2, 3, 4
DATA_ENV = "IMBALGAT_DATA_DIR"
STRICT_TOLERANCE = 0.03


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, out_default: str | None = None):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-path override, e.g. loss.lambda=0.3 (repeatable)")
    p.add_argument("--dataset", help="directory with <name>.content and <name>.cites")
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--seed", type=int, help="random seed (overrides train.seed)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="imbalgat", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one model and write its artifacts")
    _common(p)

    p = sub.add_parser("eval", help="evaluate a saved model.bin")
    _common(p)
    p.add_argument("--model", help="checkpoint path (default: <out>/model.bin)")
    p.add_argument("--part", choices=("train", "val", "test"), default="test")

    p = sub.add_parser("reproduce", help="run the method grid for a published table")
    p.add_argument("table", choices=("t1", "t4", "t5"))
    p.add_argument("name", nargs="?", help="dataset name (cora, citeseer); t4/t5 imply it")
    _common(p, out_default="runs/reproduce")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds (default 5)")
    p.add_argument("--strict", action="store_true",
                   help=f"exit {EXIT_GAP} if any mean misses the published value by > {STRICT_TOLERANCE}")

    p = sub.add_parser("gradcheck", help="compare backward against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=20, help="number of random instances")
    p.add_argument("--max-nodes", type=int, default=8)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--bug", action="store_true", help="perturb analytic gradients (negative control)")
    p.add_argument("--out", help="directory for gradcheck.json")

    p = sub.add_parser("inspect", help="summarize a dataset")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("name", nargs="?", help="dataset name when the directory holds several")
    p.add_argument("--out", help="directory for inspect.json")

    p = sub.add_parser("sweep", help="select lambda by validation macro-F1")
    _common(p, out_default="runs/sweep")
    p.add_argument("--grid", type=float, nargs="+", default=list(DEFAULT_LAMBDA_GRID))
    return parser


# --- helpers --------------------------------------------------------------------------------


def _resolve_dataset_dir(directory, name: str | None) -> Path:
    directory = Path(directory or os.environ.get(DATA_ENV, "data"))
    if name and not (directory / f"{name}.content").is_file() and (directory / name).is_dir():
        return directory / name
    return directory


def _load(cfg: ExperimentConfig):
    ds = graphio.load_dataset(_resolve_dataset_dir(cfg.data.dir, cfg.data.name), cfg.data.name)
    order = ds.table_label_order()
    log.info("label mapping: %s",
             ", ".join(f"L{k}={ds.class_names[c]} (id {c})" for k, c in enumerate(order)))
    minority = (graphio.resolve_classes(ds, cfg.data.minority_classes)
                if cfg.data.minority_classes is not None else graphio.default_minority_classes(ds))
    split = graphio.make_split(ds, cfg.data.split, cfg.train.seed, ratio=cfg.data.ratio,
                               minority_classes=minority, per_class=cfg.data.per_class,
                               val_size=cfg.data.val_size, test_size=cfg.data.test_size)
    return ds, split, minority


def _config(args) -> ExperimentConfig:
    overrides = list(args.set)
    if getattr(args, "dataset", None):
        overrides.append(f"data.dir={json.dumps(args.dataset)}")
    if getattr(args, "seed", None) is not None:
        overrides.append(f"train.seed={args.seed}")
    if getattr(args, "out", None):
        overrides.append(f"out={json.dumps(args.out)}")
    return load_config(args.config, overrides)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _fmt_metrics(m) -> str:
    auc = "n/a" if m.auc_roc is None else f"{m.auc_roc:.4f}"
    return f"acc={m.accuracy:.4f} macro_f1={m.macro_f1:.4f} auc={auc}"


# --- commands -------------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _config(args)
    ds, split, minority = _load(cfg)
    report = train(ds, split, cfg.train, minority)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "report.json")
    report.write_csv(out / "epochs.csv")
    save_checkpoint(report.params, out / "model.bin")
    (out / "config.resolved.json").write_text(cfg.to_json() + "\n")
    print(f"selected epoch {report.selected_epoch}/{len(report.epochs)}")
    print(f"val  {_fmt_metrics(report.val)}")
    print(f"test {_fmt_metrics(report.test)}")
    print(f"artifacts in {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.config is None and args.out and (Path(args.out) / "config.resolved.json").is_file():
        args.config = str(Path(args.out) / "config.resolved.json")
    cfg = _config(args)
    ds, split, _ = _load(cfg)
    model_path = Path(args.model) if args.model else Path(cfg.out) / "model.bin"
    params = load_checkpoint(model_path, architecture_for(ds, cfg.train))
    nodes = {"train": split.train_idx, "val": split.val_idx, "test": split.test_idx}[args.part]
    m = evaluate(ds, nodes, params)
    print(f"{args.part} {_fmt_metrics(m)}")
    print("per-class f1: " + " ".join(f"{ds.class_names[c]}={f:.3f}" for c, f in enumerate(m.per_class_f1)))
    _write_json(Path(cfg.out) / f"eval_{args.part}.json", m.to_dict())
    return EXIT_OK


def cmd_reproduce(args) -> int:
    name = args.name or published.TABLE_FOR[args.table]
    if name is None:
        raise ConfigError("reproduce t1 needs a dataset name (cora or citeseer)")
    if published.TABLE_FOR[args.table] not in (None, name.lower()):
        raise ConfigError(f"table {args.table} is about {published.TABLE_FOR[args.table]}, not {name}")
    args.set = [f"data.name={json.dumps(name)}"] + list(args.set)
    cfg = _config(args)
    ds, split, minority = _load(cfg)
    seeds = list(range(cfg.train.seed, cfg.train.seed + args.seeds))
    start = time.perf_counter()

    def progress(method, seed, r):
        log.info("%s seed=%d %s (%.1fs)", method, seed, _fmt_metrics(r.test), r.wall_time_s)

    summary = experiments.run_grid(ds, split, cfg.train, seeds, minority_classes=minority, progress=progress)
    summary["table"] = args.table
    # the output location does not affect results; leaving it out keeps reruns comparable
    summary["config"] = {k: v for k, v in cfg.to_dict().items() if k != "out"}
    print(experiments.format_table(summary, args.table))
    print(f"({time.perf_counter() - start:.1f}s)")
    out = Path(cfg.out)
    _write_json(out / f"reproduce_{args.table}_{name.lower()}.json", summary)
    if args.strict:
        gaps = []
        for m, e in summary["methods"].items():
            key = "gap" if args.table == "t1" else "gap_per_class_f1"
            gaps += [abs(g) for g in e.get(key, {}).values() if g is not None]
        if gaps and max(gaps) > STRICT_TOLERANCE:
            print(f"strict: largest gap {max(gaps):.3f} exceeds {STRICT_TOLERANCE}", file=sys.stderr)
            return EXIT_GAP
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    start = time.perf_counter()
    cases = gradcheck.run(args.seed, args.count, args.max_nodes, bug=args.bug)
    worst = max(c.max_rel_error for c in cases)
    for c in cases:
        print(f"#{c.index:02d} {c.kind} {c.base:<11} V={c.num_nodes} params={c.num_params:<4} "
              f"max_rel_err={c.max_rel_error:.3e}")
    ok = worst < args.tolerance
    print(f"{'PASS' if ok else 'FAIL'} max relative error {worst:.3e} (tolerance {args.tolerance:g}, "
          f"{len(cases)} instances, {time.perf_counter() - start:.1f}s)")
    if args.out:
        _write_json(Path(args.out) / "gradcheck.json", {
            "seed": args.seed, "passed": ok, "max_rel_error": worst, "tolerance": args.tolerance,
            "cases": [c.__dict__ for c in cases],
        })
    return EXIT_OK if ok else 1


def cmd_inspect(args) -> int:
    ds = graphio.load_dataset(_resolve_dataset_dir(args.dataset, args.name), args.name)
    info = graphio.describe(ds)
    print(f"dataset   {info['name']}")
    print(f"nodes     {info['nodes']}")
    print(f"edges     {info['edges_raw_lines']} citation lines "
          f"({info['edges_skipped_lines']} skipped, {info['edges_undirected']} distinct undirected)")
    print(f"features  {info['features']}")
    print(f"classes   {info['classes']}")
    print("label  id  class                       count  percent")
    for row in info["labels"]:
        print(f"{row['label']:<6} {row['class_id']:>2}  {row['class_name']:<26} {row['count']:>6}  {row['percent']:6.2f}")
    if args.out:
        _write_json(Path(args.out) / "inspect.json", info)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    ds, split, minority = _load(cfg)
    result = sweep(ds, split, cfg.train, args.grid, minority)
    for lam, r in result.reports.items():
        print(f"lambda={lam:<5g} val_f1={r.val.macro_f1:.4f} test {_fmt_metrics(r.test)}")
    print(f"best lambda {result.best_lambda:g}")
    _write_json(Path(cfg.out) / "sweep.json", {**result.to_dict(), "config": cfg.to_dict()})
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "reproduce": cmd_reproduce,
    "gradcheck": cmd_gradcheck,
    "inspect": cmd_inspect,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CheckpointError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as e:
        print(f"dataset error: {e}", file=sys.stderr)
        return EXIT_DATA
    except TrainingAborted as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
