# Command-line entry point.
#
#   phybench experiment list [--json]
#   phybench experiment run CONFIG [--set key=value ...] [--out DIR] [--workers N]
#   phybench dataset gen CONFIG [--set key=value ...] [--out DIR]
#   phybench gradcheck [--seed N]
#
# Environment:
#   PHYBENCH_OUT      - output root (default "results")
#   PHYBENCH_WORKERS  - Monte-Carlo worker threads (default 1)
#   PHYBENCH_LOG      - log level (default INFO)
#   PHYBENCH_PROGRESS - "1" forces progress bars, "0" disables them

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .checkpoint import save_checkpoint
from .config import load_config, parse_overrides
from .dataset import save_dataset
from .errors import ConfigError, ExitCode, PhybenchError, TrainingDivergedError
from .experiments import ExperimentConfig, RunOptions, registry, run_experiment
from .nn import GRADCHECK_TOL, gradcheck_cases, gradient_check

logger = logging.getLogger(__name__)

DESCRIPTION = "Physical-layer deep-learning benchmarks and baselines."


@dataclass(frozen=True)
class RunManifest:
    config_path: str
    config: ExperimentConfig
    output_dir: str
    version: str = __version__

    def to_json(self) -> str:
        body = {
            "config_path": self.config_path,
            "config": self.config.canonical(),
            "master_seed": self.config.master_seed,
            "output_dir": self.output_dir,
            "version": self.version,
            "config_hash": self.config.config_hash(),
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(name, f"{raw!r} is not an integer") from None


def _progress() -> bool:
    flag = os.environ.get("PHYBENCH_PROGRESS")
    if flag is not None:
        return flag != "0"
    return sys.stderr.isatty()


def _output_dir(args, cfg: ExperimentConfig) -> Path:
    root = Path(args.out or os.environ.get("PHYBENCH_OUT", "results"))
    out = root / f"{cfg.name.value}-{cfg.config_hash()}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, args, cfg: ExperimentConfig) -> None:
    manifest = RunManifest(config_path=str(args.config), config=cfg, output_dir=str(out))
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    logger.info("manifest written to %s", out / "manifest.json")


def cmd_experiment_list(args) -> int:
    entries = list(registry().values())
    if args.json:
        rows = [{"name": e.name.value, "description": e.description} for e in entries]
        print(json.dumps(rows, indent=2))
    else:
        width = max(len(e.name.value) for e in entries)
        for e in entries:
            print(f"{e.name.value:<{width}}  {e.description}")
    return ExitCode.OK


def cmd_experiment_run(args) -> int:
    cfg = load_config(args.config, parse_overrides(args.set))
    out = _output_dir(args, cfg)
    _write_manifest(out, args, cfg)
    workers = args.workers if args.workers is not None else _env_int("PHYBENCH_WORKERS", 1)
    outcome = run_experiment(cfg, RunOptions(workers=workers, progress=_progress()))
    outcome.result.write_csv(out / "results.csv")
    logger.info("results written to %s (%d rows)", out / "results.csv", len(outcome.result.rows))
    for name, mlp in outcome.models.items():
        save_checkpoint(mlp, out / f"{name}.phyn")
    timing = {"wall_time_s": outcome.result.wall_time_s}
    (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n", encoding="utf-8")
    print(out)
    return ExitCode.OK


def cmd_dataset_gen(args) -> int:
    cfg = load_config(args.config, parse_overrides(args.set))
    entry = registry()[cfg.name]
    if entry.generate_datasets is None:
        raise ConfigError("experiment.name", f"{cfg.name.value} has no datasets")
    out = _output_dir(args, cfg)
    _write_manifest(out, args, cfg)
    for name, ds in entry.generate_datasets(cfg).items():
        save_dataset(ds, out / f"{name}.phyd")
    print(out)
    return ExitCode.OK


def cmd_gradcheck(args) -> int:
    failed = 0
    for name, mlp, sample, loss in gradcheck_cases(args.seed):
        report = gradient_check(mlp, sample, loss)
        status = "ok" if report.passed() else "FAIL"
        failed += not report.passed()
        print(f"{name:<26} max rel error {report.max_rel_error:.3e}  {status}")
        for layer in report.layers:
            print(f"    layer {layer.layer}: W {layer.weight_max_rel:.3e}  b {layer.bias_max_rel:.3e}")
    if failed:
        logger.error("gradcheck: %d case(s) above tolerance %g", failed, GRADCHECK_TOL)
        return ExitCode.FAILURE
    return ExitCode.OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phybench", description=DESCRIPTION)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--version", action="version", version=f"phybench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    exp = sub.add_parser("experiment", help="list or run experiments")
    exp_sub = exp.add_subparsers(dest="action", required=True)
    p = exp_sub.add_parser("list", help="print the experiment names")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_experiment_list)
    p = exp_sub.add_parser("run", help="run one experiment from a config file")
    p.add_argument("config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", help="output root (default $PHYBENCH_OUT or ./results)")
    p.add_argument("--workers", type=int, help="Monte-Carlo worker threads")
    p.set_defaults(func=cmd_experiment_run)

    ds = sub.add_parser("dataset", help="dataset generation")
    ds_sub = ds.add_subparsers(dest="action", required=True)
    p = ds_sub.add_parser("gen", help="write the training datasets of an experiment")
    p.add_argument("config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", help="output root (default $PHYBENCH_OUT or ./results)")
    p.set_defaults(func=cmd_dataset_gen)

    p = sub.add_parser("gradcheck", help="check backprop against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def _configure_logging(verbose: bool) -> None:
    level = "DEBUG" if verbose else os.environ.get("PHYBENCH_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return int(args.func(args))
    except ConfigError as exc:
        logger.error("config error at %s: %s", exc.key_path, exc.reason)
        return int(ExitCode.CONFIG)
    except TrainingDivergedError as exc:
        logger.error("training diverged at iteration %d (loss %r)", exc.iteration, exc.loss)
        return int(ExitCode.DIVERGED)
    except PhybenchError as exc:
        logger.error("%s", exc)
        return int(ExitCode.FAILURE)
