"""Command-line front end: simulate, train, evaluate, ablate.

Exit codes: 0 success, 2 configuration error, 3 data error,
4 numeric failure (non-finite loss).
"""
from __future__ import annotations

import argparse
import sys

from .autodiff import NumericError
from .config import RunConfig, load_config
from .evaluation import evaluate_baselines, evaluate_model, run_ablation
from .graphdata import DataError, read_dataset, sequence_stats, sliding_windows, split, write_dataset
from .mobility import ConfigError, run_scenario
from .model import VARIANTS, ModelDims, load_checkpoint, prepare_sequence, save_checkpoint
from .training import TrainingAbort, train

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _load(config_path, seed) -> RunConfig:
    cfg = load_config(config_path)
    if seed is not None:
        cfg.scenario.rng_seed = seed
        cfg.train.seed = seed
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load(args.config, args.seed)
    result = run_scenario(cfg.scenario)
    write_dataset(args.out, result.snapshots, result.comm_radius,
                  cfg.scenario.rng_seed, comments=cfg.echo())
    stats = sequence_stats(result.snapshots)
    print(f"wrote {args.out}: model={cfg.scenario.mobility_model} "
          f"nodes={cfg.scenario.num_uavs} snapshots={len(result.snapshots)} "
          f"comm_radius={result.comm_radius:.1f}m")
    print("min_edges,max_edges,avg_edges,avg_density")
    print(f"{stats['min_edges']},{stats['max_edges']},"
          f"{stats['avg_edges']:.1f},{stats['avg_density']:.4f}")
    return 0


def _checkpoint_meta(cfg: RunConfig, dims: ModelDims, data, epochs_run: int) -> dict:
    return {
        "dims": dims.to_dict(),
        "window": cfg.train.window,
        "n_train": cfg.train.n_train,
        "seed": cfg.train.seed,
        "epochs_run": epochs_run,
        "comm_radius": data.comm_radius,
        "config": cfg.echo(),
    }


def cmd_train(args) -> int:
    cfg = _load(args.config, args.seed)
    data = read_dataset(args.dataset)
    if len(data.snapshots) < cfg.train.window:
        raise DataError(f"dataset has {len(data.snapshots)} snapshots, "
                        f"need at least window={cfg.train.window}")
    dims = cfg.dims(nodes=data.n)
    result = train(data.snapshots, cfg.train, dims,
                   log=lambda e, m: print(f"epoch {e}: mean window loss {m:.6f}"))
    save_checkpoint(args.checkpoint, result.store,
                    _checkpoint_meta(cfg, dims, data, result.epochs_run))
    loss_log = args.out or f"{args.checkpoint}.loss.csv"
    with open(loss_log, "w", encoding="ascii") as fh:
        for line in cfg.echo():
            fh.write(f"# {line}\n")
        fh.write("epoch,window,loss\n")
        for epoch, window, loss in result.history:
            fh.write(f"{epoch},{window},{loss!r}\n")
    print(f"trained {result.epochs_run} epochs on {len(result.split.train)} windows; "
          f"checkpoint {args.checkpoint}, loss log {loss_log}")
    return 0


def _print_report(report) -> None:
    print(f"[{report.method}] mean_auc={report.mean_auc:.4f} "
          f"mean_auprc={report.mean_auprc:.4f} skipped={report.num_skipped}")


def cmd_evaluate(args) -> int:
    store, meta = load_checkpoint(args.checkpoint)
    data = read_dataset(args.dataset)
    dims = ModelDims.from_dict(meta["dims"])
    if dims.nodes != data.n:
        raise DataError(f"checkpoint was trained for {dims.nodes} nodes, "
                        f"dataset has {data.n}")
    window, n_train, seed = meta["window"], meta["n_train"], meta["seed"]
    samples = sliding_windows(data.snapshots, window)
    dataset = split(samples, n_train)
    prepared = prepare_sequence(data.snapshots, seed)

    reports = [evaluate_model(store, dims, prepared, dataset.test)]
    reports += evaluate_baselines(dataset.test)
    lines = ["method,target_snapshot,auc,auprc"]
    for report in reports:
        for s in report.samples:
            a = "skipped" if s.auc is None else f"{s.auc:.6f}"
            p = "skipped" if s.auprc is None else f"{s.auprc:.6f}"
            lines.append(f"{report.method},{s.target_index},{a},{p}")
    print("\n".join(lines))
    for report in reports:
        _print_report(report)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            for line in meta.get("config", []):
                fh.write(f"# {line}\n")
            fh.write("\n".join(lines) + "\n")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load(args.config, args.seed)
    data = read_dataset(args.dataset)
    if len(data.snapshots) < cfg.train.window:
        raise DataError(f"dataset has {len(data.snapshots)} snapshots, "
                        f"need at least window={cfg.train.window}")
    base_dims = cfg.dims(nodes=data.n)
    rows = ["variant,mean_auc,mean_auprc"]
    for variant in VARIANTS:
        report, _ = run_ablation(data.snapshots, variant, cfg.train, base_dims)
        rows.append(f"{variant},{report.mean_auc:.4f},{report.mean_auprc:.4f}")
        _print_report(report)
    print("\n".join(rows))
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            for line in cfg.echo():
                fh.write(f"# {line}\n")
            fh.write("\n".join(rows) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uanetlp",
        description="UAV ad hoc network simulation and temporal link prediction")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a snapshot dataset")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True, help="dataset file to write")
    sim.add_argument("--seed", type=int)
    sim.set_defaults(func=cmd_simulate)

    tr = sub.add_parser("train", help="train on a dataset, write a checkpoint")
    tr.add_argument("--config", required=True)
    tr.add_argument("--dataset", required=True)
    tr.add_argument("--checkpoint", required=True, help="checkpoint file to write")
    tr.add_argument("--out", help="loss log path (default <checkpoint>.loss.csv)")
    tr.add_argument("--seed", type=int)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="evaluate a checkpoint on the test windows")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--out", help="metric report CSV")
    ev.set_defaults(func=cmd_evaluate)

    ab = sub.add_parser("ablate", help="train and evaluate all fusion variants")
    ab.add_argument("--config", required=True)
    ab.add_argument("--dataset", required=True)
    ab.add_argument("--out", help="variant table CSV")
    ab.add_argument("--seed", type=int)
    ab.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingAbort, NumericError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
