# zpgan/cli/main.py
"""Command-line entry point: synth, stats, train, eval, gridsearch, plot, ablation.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import torch
import yaml
from pydantic import ValidationError

from zpgan import __version__
from zpgan.cli.schemas import RunConfig, build_run_config
from zpgan.config import settings
from zpgan.core.exceptions import ConfigError, MissingInputError, TrainingDivergedError, ZpganError
from zpgan.core.logging import configure_logging
from zpgan.data.schemas import Dataset
from zpgan.data.services import MANIFEST_FILE, compute_stats, load_dataset, save_dataset, save_stats, split, synth_dataset
from zpgan.evaluation.schemas import N_CHANNELS, EvalConfig, EvalReport
from zpgan.evaluation.services import REPORT_FILE, evaluate_model, read_report, write_histogram_csv, write_report
from zpgan.nets.services import generator_forward
from zpgan.training.ablation import default_variants, run_ablation, save_ablation
from zpgan.training.checkpoint import META_FILE, load_checkpoint, save_checkpoint
from zpgan.training.grid import grid_search, save_grid_results
from zpgan.training.schemas import CheckpointMeta
from zpgan.training.services import train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

SAMPLE_GRID_FILE = "sample_grid.npz"
RUN_CONFIG_FILE = "run_config.yaml"

_DEFAULTS = RunConfig()


# ---------------------------------------------------------------------------
# Argument parsing helpers
# ---------------------------------------------------------------------------

def _float_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _int_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _fmt_list(values: Sequence[float]) -> str:
    return ",".join(f"{v:g}" for v in values)


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML run configuration; flags override it (default: none)")
    common.add_argument("--log-level", default=None, help=f"logging level (default: {settings.LOG_LEVEL})")
    return common


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    t = _DEFAULTS.train
    w = t.weights
    p.add_argument("--epochs", type=int, default=None, help=f"training epochs (default: {t.epochs})")
    p.add_argument("--batch-size", type=int, default=None, help=f"minibatch size (default: {t.batch_size})")
    p.add_argument("--seed", type=int, default=None, help=f"run seed (default: {t.seed})")
    p.add_argument("--optimizer", choices=["adam", "sgd"], default=None, help=f"optimizer (default: {t.optimizer})")
    p.add_argument("--lr-g", type=float, default=None, help=f"generator learning rate (default: {t.learning_rate_g:g})")
    p.add_argument("--lr-d", type=float, default=None, help=f"discriminator learning rate (default: {t.learning_rate_d:g})")
    p.add_argument("--lr-r", type=float, default=None, help=f"regressor learning rate (default: {t.learning_rate_r:g})")
    p.add_argument("--lambda-div", type=float, default=None, help=f"diversity weight (default: {w.lambda_div:g})")
    p.add_argument("--lambda-in", type=float, default=None, help=f"intensity weight (default: {w.lambda_in:g})")
    p.add_argument("--lambda-aux", type=float, default=None, help=f"auxiliary regressor weight (default: {w.lambda_aux:g})")
    p.add_argument(
        "--strict-deterministic", action=argparse.BooleanOptionalAction, default=None,
        help=f"single-threaded deterministic kernels (default: {t.strict_deterministic})",
    )


def _add_split_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--split-ratio", type=float, default=None, help=f"train fraction of groups (default: {_DEFAULTS.split.ratio})")
    p.add_argument("--split-seed", type=int, default=None, help="split seed (default: the run seed)")


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    e = _DEFAULTS.eval
    p.add_argument("--samples-per-condition", type=int, default=None, help=f"generated samples per test group (default: {e.samples_per_condition})")
    p.add_argument("--bins", type=int, default=None, help=f"histogram bins (default: {e.n_bins})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zpgan", description="Conditional GAN fast simulation of proton ZDC responses.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    root = settings.DATA_ROOT

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    s = _DEFAULTS.synth
    p.add_argument("--seed", type=int, default=None, help=f"dataset seed (default: {s.seed})")
    p.add_argument("--groups", type=int, default=None, help=f"number of distinct conditions (default: {s.groups})")
    p.add_argument("--per-group", type=int, default=None, help=f"responses per condition, >= 2 (default: {s.per_group})")
    p.add_argument("--out", default=None, help=f"dataset directory (default: {root}/dataset)")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("stats", parents=[common], help="write per-group preprocessing statistics")
    p.add_argument("--data", default=None, help=f"dataset directory (default: {root}/dataset)")
    p.add_argument("--out", default=None, help="stats file (default: <data>/stats.json)")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("train", parents=[common], help="train generator, discriminator and regressor")
    p.add_argument("--data", default=None, help=f"dataset directory (default: {root}/dataset)")
    p.add_argument("--out", default=None, help=f"run directory (default: {root}/train)")
    p.add_argument("--checkpoint-every", type=int, default=None, help="periodic checkpoint interval in epochs, 0 = off (default: 0)")
    _add_train_flags(p)
    _add_split_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint with per-channel WS-1")
    p.add_argument("--checkpoint", default=None, help=f"checkpoint directory (default: {root}/train/checkpoint)")
    p.add_argument("--data", default=None, help="dataset directory (default: the one recorded in the checkpoint)")
    p.add_argument("--out", default=None, help=f"report directory (default: {root}/eval)")
    p.add_argument("--split", choices=["test", "train", "all"], default=None, help=f"which part of the dataset (default: {_DEFAULTS.eval.split})")
    p.add_argument("--seed", type=int, default=None, help=f"generation seed (default: {_DEFAULTS.eval.seed})")
    _add_eval_flags(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("gridsearch", parents=[common], help="sweep the loss weights")
    g = _DEFAULTS.grid
    p.add_argument("--data", default=None, help=f"dataset directory (default: {root}/dataset)")
    p.add_argument("--out", default=None, help=f"results directory (default: {root}/grid)")
    p.add_argument("--grid-div", type=_float_list, default=None, help=f"diversity weights (default: {_fmt_list(g.spec.lambda_div)})")
    p.add_argument("--grid-in", type=_float_list, default=None, help=f"intensity weights (default: {_fmt_list(g.spec.lambda_in)})")
    p.add_argument("--grid-aux", type=_float_list, default=None, help=f"auxiliary weights (default: {_fmt_list(g.spec.lambda_aux)})")
    p.add_argument("--runs-per-cell", type=int, default=None, help=f"training runs per cell (default: {g.runs_per_cell})")
    p.add_argument("--jobs", type=int, default=None, help=f"parallel cells, 0 = all cores (default: {settings.JOBS})")
    p.add_argument("--backend", choices=["local", "celery"], default=None, help=f"where cells run (default: {settings.GRID_BACKEND})")
    p.add_argument("--epochs", type=int, default=None, help=f"training epochs per run (default: {_DEFAULTS.train.epochs})")
    p.add_argument("--seed", type=int, default=None, help=f"base seed (default: {_DEFAULTS.train.seed})")
    _add_split_flags(p)
    _add_eval_flags(p)
    p.set_defaults(handler=cmd_gridsearch)

    p = sub.add_parser("plot", parents=[common], help="emit histogram CSVs and a sample grid for external plotting")
    pl = _DEFAULTS.plot
    p.add_argument("--report", default=None, help="report directory written by eval (required)")
    p.add_argument("--out", default=None, help="output directory (default: the report directory)")
    p.add_argument("--channels", type=_int_list, default=None, help=f"channels to emit (default: {','.join(map(str, pl.channels))})")
    p.add_argument("--checkpoint", default=None, help="checkpoint for the sample grid (default: none)")
    p.add_argument("--data", default=None, help="dataset for the sample grid (default: the one recorded in the checkpoint)")
    p.add_argument("--samples", type=int, default=None, help=f"(condition, true, generated) triples to dump (default: {pl.samples})")
    p.add_argument("--seed", type=int, default=None, help=f"latent seed for the sample grid (default: {pl.seed})")
    p.set_defaults(handler=cmd_plot)

    p = sub.add_parser("ablation", parents=[common], help="compare GAN, +diversity, +intensity and +aux variants")
    a = _DEFAULTS.ablation
    p.add_argument("--data", default=None, help=f"dataset directory (default: {root}/dataset)")
    p.add_argument("--out", default=None, help=f"results directory (default: {root}/ablation)")
    p.add_argument("--runs", type=int, default=None, help=f"seeds per variant (default: {a.runs})")
    p.add_argument("--epochs", type=int, default=None, help=f"training epochs per run (default: {_DEFAULTS.train.epochs})")
    p.add_argument("--seed", type=int, default=None, help=f"base seed (default: {_DEFAULTS.train.seed})")
    p.add_argument("--lambda-div", type=float, default=None, help=f"diversity weight of the full model (default: {a.weights.lambda_div:g})")
    p.add_argument("--lambda-in", type=float, default=None, help=f"intensity weight of the full model (default: {a.weights.lambda_in:g})")
    p.add_argument("--lambda-aux", type=float, default=None, help=f"auxiliary weight of the full model (default: {a.weights.lambda_aux:g})")
    _add_split_flags(p)
    _add_eval_flags(p)
    p.set_defaults(handler=cmd_ablation)

    return parser


# ---------------------------------------------------------------------------
# Flag -> config overrides
# ---------------------------------------------------------------------------

def _flag(args: argparse.Namespace, name: str) -> Any:
    return getattr(args, name, None)


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    weights = {
        "lambda_div": _flag(args, "lambda_div"),
        "lambda_in": _flag(args, "lambda_in"),
        "lambda_aux": _flag(args, "lambda_aux"),
    }
    is_ablation = args.command == "ablation"
    seed = _flag(args, "seed")
    return {
        "paths": {
            "data": _flag(args, "data"),
            "out": _flag(args, "out"),
            "checkpoint": _flag(args, "checkpoint"),
            "report": _flag(args, "report"),
        },
        "synth": {
            "seed": seed if args.command == "synth" else None,
            "groups": _flag(args, "groups"),
            "per_group": _flag(args, "per_group"),
        },
        "split": {"ratio": _flag(args, "split_ratio"), "seed": _flag(args, "split_seed")},
        "train": {
            "epochs": _flag(args, "epochs"),
            "batch_size": _flag(args, "batch_size"),
            "seed": seed if args.command in ("train", "gridsearch", "ablation") else None,
            "optimizer": _flag(args, "optimizer"),
            "learning_rate_g": _flag(args, "lr_g"),
            "learning_rate_d": _flag(args, "lr_d"),
            "learning_rate_r": _flag(args, "lr_r"),
            "strict_deterministic": _flag(args, "strict_deterministic"),
            "checkpoint_every": _flag(args, "checkpoint_every"),
            "weights": None if is_ablation else weights,
        },
        "eval": {
            "samples_per_condition": _flag(args, "samples_per_condition"),
            "n_bins": _flag(args, "bins"),
            "seed": seed if args.command == "eval" else None,
            "split": _flag(args, "split"),
        },
        "grid": {
            "spec": {
                "lambda_div": _flag(args, "grid_div"),
                "lambda_in": _flag(args, "grid_in"),
                "lambda_aux": _flag(args, "grid_aux"),
            },
            "runs_per_cell": _flag(args, "runs_per_cell"),
            "jobs": _flag(args, "jobs"),
            "backend": _flag(args, "backend"),
        },
        "plot": {
            "channels": _flag(args, "channels"),
            "samples": _flag(args, "samples"),
            "seed": seed if args.command == "plot" else None,
        },
        "ablation": {
            "runs": _flag(args, "runs"),
            "weights": weights if is_ablation else None,
        },
    }


def _load_config(args: argparse.Namespace) -> RunConfig:
    return build_run_config(args.config, _overrides(args))


# ---------------------------------------------------------------------------
# Paths and inputs
# ---------------------------------------------------------------------------

def _default_path(name: str) -> Path:
    return Path(settings.DATA_ROOT) / name


def _data_dir(cfg: RunConfig, recorded: Optional[str] = None) -> Path:
    if cfg.paths.data:
        return Path(cfg.paths.data)
    if recorded:
        return Path(recorded)
    return _default_path("dataset")


def _require(path: Path, marker: str, what: str) -> Path:
    if not (path / marker).is_file():
        raise MissingInputError(f"{what} not found: {path}")
    return path


def _load_data(path: Path) -> Dataset:
    return load_dataset(_require(path, MANIFEST_FILE, "dataset"))


def _split_seed(cfg: RunConfig) -> int:
    return cfg.train.seed if cfg.split.seed is None else cfg.split.seed


def _eval_config(cfg: RunConfig, seed: Optional[int] = None) -> EvalConfig:
    data = cfg.eval.model_dump(exclude={"split"})
    if seed is not None:
        data["seed"] = seed
    return EvalConfig.model_validate(data)


def _checkpoint_split(dataset: Dataset, meta: CheckpointMeta, cfg: RunConfig, part: str) -> Dataset:
    """The train/test part a checkpoint was trained against, rebuilt from its meta."""
    if part == "all":
        return dataset
    ratio = meta.split_ratio if meta.split_ratio is not None else cfg.split.ratio
    seed = meta.split_seed if meta.split_seed is not None else meta.seed
    train_set, test_set = split(dataset, ratio, seed)
    return train_set if part == "train" else test_set


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    s = cfg.synth
    dataset = synth_dataset(s.seed, s.groups, s.per_group, s.profile)
    out = save_dataset(dataset, cfg.paths.out or _default_path("dataset"))
    print(f"dataset: {out}")
    print(f"  samples {len(dataset)}  groups {dataset.n_groups}  per group {s.per_group}  seed {s.seed}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    data_dir = _data_dir(cfg)
    stats = compute_stats(_load_data(data_dir))
    path = save_stats(stats, cfg.paths.out or data_dir)
    weights = [g.diversity_weight for g in stats.per_group.values()]
    print(f"stats: {path}")
    print(f"  groups {len(stats.per_group)}  normalization {stats.normalization_constant:g}")
    print(f"  diversity weight min {min(weights):.6g}  mean {np.mean(weights):.6g}  max {max(weights):.6g}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    data_dir = _data_dir(cfg)
    dataset = _load_data(data_dir)
    out = Path(cfg.paths.out) if cfg.paths.out else _default_path("train")
    split_seed = _split_seed(cfg)
    train_set, _ = split(dataset, cfg.split.ratio, split_seed)
    extra = {"split_ratio": cfg.split.ratio, "split_seed": split_seed, "data_dir": str(data_dir)}

    out.mkdir(parents=True, exist_ok=True)
    (out / RUN_CONFIG_FILE).write_text(_dump_yaml(cfg))
    logger.info("training on %s groups (%s samples) from %s", train_set.n_groups, len(train_set), data_dir)

    params, log = train(train_set, cfg.train, run_dir=out, meta_extra=extra)
    meta = CheckpointMeta(
        architecture=cfg.train.architecture,
        seed=cfg.train.seed,
        step=len(log.steps),
        epoch=cfg.train.epochs,
        weights=cfg.train.weights,
        train_config=cfg.train,
        **extra,
    )
    path = save_checkpoint(params, meta, out / "checkpoint")
    w = cfg.train.weights
    print(f"checkpoint: {path}")
    print(f"  epochs {cfg.train.epochs}  steps {len(log.steps)}  lambda div/in/aux {w.lambda_div:g}/{w.lambda_in:g}/{w.lambda_aux:g}")
    return EXIT_OK


def format_report_table(report: EvalReport) -> str:
    lines = [f"{'channel':<8}{'WS-1':>16}"]
    for ch, ws in enumerate(report.per_channel_ws, start=1):
        lines.append(f"{'ch' + str(ch):<8}{ws:>16.6f}")
    lines.append(f"{'mean':<8}{report.mean_ws:>16.6f}")
    return "\n".join(lines)


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    ckpt = Path(cfg.paths.checkpoint) if cfg.paths.checkpoint else _default_path("train") / "checkpoint"
    params, meta = load_checkpoint(_require(ckpt, META_FILE, "checkpoint"))
    dataset = _load_data(_data_dir(cfg, meta.data_dir))
    target = _checkpoint_split(dataset, meta, cfg, cfg.eval.split)

    ec = _eval_config(cfg)
    report = evaluate_model(params, target, ec.samples_per_condition, seed=ec.seed, n_bins=ec.n_bins, geometry=ec.geometry)
    out = write_report(report, cfg.paths.out or _default_path("eval"))
    print(format_report_table(report))
    print(f"center error {report.center_error_mean:.4f} px  intensity gap {report.intensity_gap:.6g}")
    print(f"report: {out}")
    return EXIT_OK


def cmd_gridsearch(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    data_dir = _data_dir(cfg)
    dataset = _load_data(data_dir)
    g = cfg.grid
    results = grid_search(
        dataset,
        cfg.train,
        grid=g.spec,
        runs_per_cell=g.runs_per_cell,
        eval_config=_eval_config(cfg, seed=cfg.train.seed),
        split_ratio=cfg.split.ratio,
        split_seed=_split_seed(cfg),
        jobs=settings.JOBS if g.jobs is None else g.jobs,
        backend=g.backend or settings.GRID_BACKEND,
        data_dir=data_dir,
    )
    path = save_grid_results(results, cfg.paths.out or _default_path("grid"))
    print(f"{'rank':>4}  {'div':>8}  {'in':>8}  {'aux':>8}  {'mean WS':>12}  {'std':>10}")
    for cell in results.cells:
        if cell.status == "ok":
            print(f"{cell.rank:>4}  {cell.lambda_div:>8.0e}  {cell.lambda_in:>8.0e}  {cell.lambda_aux:>8.0e}  {cell.mean_ws:>12.6f}  {cell.std_ws:>10.6f}")
        else:
            print(f"{'-':>4}  {cell.lambda_div:>8.0e}  {cell.lambda_in:>8.0e}  {cell.lambda_aux:>8.0e}  {'failed':>12}  {'':>10}")
    print(f"results: {path}")
    return EXIT_OK


def _sample_grid(cfg: RunConfig, out: Path) -> Path:
    if not cfg.paths.checkpoint:
        raise ConfigError("--samples needs --checkpoint")
    params, meta = load_checkpoint(_require(Path(cfg.paths.checkpoint), META_FILE, "checkpoint"))
    dataset = _checkpoint_split(_load_data(_data_dir(cfg, meta.data_dir)), meta, cfg, cfg.eval.split)
    n = cfg.plot.samples
    if n > len(dataset):
        raise ConfigError(f"requested {n} samples but the {cfg.eval.split} split holds {len(dataset)}")

    conditions = dataset.conditions[:n]
    gen = torch.Generator().manual_seed(cfg.plot.seed)
    z = torch.randn(n, params.config.latent_dim, generator=gen, dtype=params.dtype)
    with torch.no_grad():
        generated = generator_forward(params, conditions, z).reshape(n, params.config.height, params.config.width)
    path = out / SAMPLE_GRID_FILE
    np.savez(path, conditions=conditions, true=dataset.responses[:n], generated=generated.float().numpy())
    return path


def cmd_plot(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if not cfg.paths.report:
        raise ConfigError("plot needs --report")
    report_dir = _require(Path(cfg.paths.report), REPORT_FILE, "report")
    report = read_report(report_dir)
    out = Path(cfg.paths.out) if cfg.paths.out else report_dir
    out.mkdir(parents=True, exist_ok=True)

    by_channel = {h.channel: h for h in report.histograms}
    for ch in cfg.plot.channels:
        if ch not in by_channel:
            raise ConfigError(f"report has no histogram for channel {ch} (1..{N_CHANNELS})")
        print(f"histogram: {write_histogram_csv(by_channel[ch], out / f'hist_ch{ch}.csv')}")
    if cfg.plot.samples:
        print(f"sample grid: {_sample_grid(cfg, out)}")
    return EXIT_OK


def cmd_ablation(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    dataset = _load_data(_data_dir(cfg))
    train_set, test_set = split(dataset, cfg.split.ratio, _split_seed(cfg))
    table = run_ablation(
        train_set,
        test_set,
        cfg.train,
        variants=default_variants(cfg.ablation.weights),
        runs=cfg.ablation.runs,
        eval_config=_eval_config(cfg, seed=cfg.train.seed),
    )
    path = save_ablation(table, cfg.paths.out or _default_path("ablation"))
    print(f"{'variant':<14}{'mean WS':>12}{'median':>12}{'std':>10}{'center err':>12}")
    for row in table.rows:
        print(f"{row.name:<14}{row.mean_ws:>12.6f}{row.median_ws:>12.6f}{row.std_ws:>10.6f}{row.median_center_error:>12.4f}")
    print(f"results: {path}")
    return EXIT_OK


def _dump_yaml(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        configure_logging(args.log_level or settings.LOG_LEVEL)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except (ConfigError, MissingInputError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.dump_path:
            print(f"diagnostics: {exc.dump_path}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ZpganError, OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
