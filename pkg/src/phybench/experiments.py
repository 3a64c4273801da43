# Experiment harness: configs, sweep results, the CSV contract and the
# registry of named pipelines.
#
# Each pipeline lives in its own exp_* module and exposes a scenario
# dataclass, default settings, run(cfg, options) and, for learning
# pipelines, generate_datasets(cfg).

import dataclasses
import enum
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import InvalidInputError
from .metrics import MetricKind, MetricValue, compute_metric
from .montecarlo import STREAM_EVAL, STREAM_TRAINING, TrialRunner, derived_seed, trial_rng
from .nn import Activation, Mlp, TrainConfig

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("experiment", "method", "snr_db", "metric", "value", "stderr", "trials", "seed", "config_hash")


class ExperimentName(enum.Enum):
    OFDM_RECEIVER = "ofdm_receiver"
    NOMA_DETECTION = "noma_detection"
    AUTOENCODER_74 = "autoencoder_74"
    DOA_ESTIMATION = "doa_estimation"
    GAIN_ESTIMATION = "gain_estimation"
    MMWAVE_PRECODING = "mmwave_precoding"


@dataclass(frozen=True)
class NetworkConfig:
    hidden_sizes: tuple[int, ...] = (64, 64)
    hidden_activation: Activation = Activation.RELU

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        object.__setattr__(self, "hidden_activation", _activation(self.hidden_activation))
        if any(h < 1 for h in self.hidden_sizes):
            raise InvalidInputError(f"hidden sizes must be >= 1, got {self.hidden_sizes}")
        if self.hidden_activation is Activation.SOFTMAX:
            raise InvalidInputError("softmax cannot be a hidden activation")


def _activation(value) -> Activation:
    if isinstance(value, str):
        try:
            return Activation[value.upper()]
        except KeyError:
            raise InvalidInputError(f"unknown activation {value!r}") from None
    return Activation(value)


@dataclass(frozen=True)
class ExperimentConfig:
    name: ExperimentName
    snr_grid_db: tuple[float, ...]
    trials_per_point: int
    master_seed: int
    scenario: Any
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        object.__setattr__(self, "name", ExperimentName(self.name))
        grid = tuple(float(s) for s in self.snr_grid_db)
        object.__setattr__(self, "snr_grid_db", grid)
        if not grid:
            raise InvalidInputError("snr_grid_db is empty")
        if any(math.isnan(s) for s in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidInputError(f"snr_grid_db must be strictly increasing, got {list(grid)}")
        if self.trials_per_point < 1:
            raise InvalidInputError(f"trials_per_point must be >= 1, got {self.trials_per_point}")
        if self.master_seed < 0:
            raise InvalidInputError(f"master_seed must be >= 0, got {self.master_seed}")

    def canonical(self) -> dict:
        """Plain JSON-able view of every resolved setting."""
        return {
            "name": self.name.value,
            "snr_grid_db": list(self.snr_grid_db),
            "trials_per_point": self.trials_per_point,
            "master_seed": self.master_seed,
            "scenario": _plain(dataclasses.asdict(self.scenario)),
            "network": _plain(dataclasses.asdict(self.network)),
            "train": _plain({k: v for k, v in dataclasses.asdict(self.train).items() if k != "seed"}),
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def train_config(self, model_index: int, **changes) -> TrainConfig:
        """TrainConfig of one model, seeded from master_seed."""
        seed = derived_seed(self.master_seed, STREAM_TRAINING, 2 * model_index + 1)
        return dataclasses.replace(self.train, seed=seed, **changes)

    def init_seed(self, model_index: int) -> int:
        return derived_seed(self.master_seed, STREAM_TRAINING, 2 * model_index)


def _plain(value):
    if isinstance(value, enum.Enum):
        return value.name.lower() if isinstance(value, enum.IntEnum) else value.value
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass(frozen=True)
class SweepRow:
    method: str
    snr_db: float
    metric: MetricKind
    value: float
    stderr: float
    trials: int


def _fmt(x: float) -> str:
    s = "%.9g" % x
    return "0" if s == "-0" else s


@dataclass
class SweepResult:
    experiment: ExperimentName
    seed: int
    config_hash: str
    rows: list[SweepRow] = field(default_factory=list)
    wall_time_s: float = 0.0
    _methods: list[str] = field(default_factory=list, repr=False)

    def add(self, method: str, snr_db: float, metric: MetricKind, value: MetricValue, trials: int) -> None:
        if any(r.method == method and r.snr_db == snr_db and r.metric is metric for r in self.rows):
            raise InvalidInputError(f"duplicate row for {method} at {snr_db} dB")
        if method not in self._methods:
            self._methods.append(method)
        self.rows.append(SweepRow(method=method, snr_db=float(snr_db), metric=MetricKind(metric),
                                  value=float(value.value), stderr=float(value.stderr), trials=int(trials)))

    @property
    def methods(self) -> list[str]:
        return list(self._methods)

    def ordered_rows(self) -> list[SweepRow]:
        order = {m: i for i, m in enumerate(self._methods)}
        return sorted(self.rows, key=lambda r: (order[r.method], r.snr_db))

    def curve(self, method: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(snr_db, value, stderr) of one method, SNR ascending."""
        rows = [r for r in self.ordered_rows() if r.method == method]
        if not rows:
            raise KeyError(method)
        return (np.array([r.snr_db for r in rows]), np.array([r.value for r in rows]),
                np.array([r.stderr for r in rows]))

    def value(self, method: str, snr_db: float) -> SweepRow:
        for r in self.rows:
            if r.method == method and r.snr_db == snr_db:
                return r
        raise KeyError((method, snr_db))

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for r in self.ordered_rows():
            lines.append(",".join((self.experiment.value, r.method, _fmt(r.snr_db), r.metric.value,
                                   _fmt(r.value), _fmt(r.stderr), str(r.trials), str(self.seed),
                                   self.config_hash)))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="ascii") as f:
            f.write(self.to_csv())


@dataclass
class RunOptions:
    workers: int = 1
    progress: bool = False


@dataclass
class ExperimentOutcome:
    result: SweepResult
    models: dict[str, Mlp] = field(default_factory=dict)


# (method, metric) -> (truth, estimate) samples of one trial
TrialSamples = dict[tuple[str, MetricKind], tuple[Any, Any]]


def run_sweep(cfg: ExperimentConfig, options: RunOptions, result: SweepResult,
              trial_fn: Callable[[int, float, np.random.Generator], TrialSamples]) -> None:
    """Run trials_per_point trials at every SNR and add one row per method.

    All methods of one (SNR, trial) pair see the same random stream, so
    they are compared on identical channels and noise.
    """
    runner = TrialRunner(options.workers, options.progress)
    for si, snr in enumerate(cfg.snr_grid_db):
        outs = runner.map(lambda t: trial_fn(si, snr, trial_rng(cfg.master_seed, STREAM_EVAL, si, t)),
                          cfg.trials_per_point, desc=f"{cfg.name.value} {snr:g} dB")
        for key in outs[0]:
            method, kind = key
            truth = _concat([o[key][0] for o in outs])
            est = _concat([o[key][1] for o in outs])
            mv = compute_metric(kind, truth, est)
            result.add(method, snr, kind, mv, cfg.trials_per_point)
            logger.info("%s %s @ %g dB: %s = %.6g (se %.2g)",
                        cfg.name.value, method, snr, kind.value, mv.value, mv.stderr)


def _concat(parts: list):
    if parts[0] is None:
        return None
    return np.concatenate([np.atleast_1d(np.asarray(p)) for p in parts])


def one_hot(labels, n: int) -> np.ndarray:
    return np.eye(n)[np.asarray(labels, dtype=np.int64)]


def complex_features(z) -> np.ndarray:
    """Concatenate real and imaginary parts along the last axis."""
    z = np.asarray(z, dtype=np.complex128)
    return np.concatenate([z.real, z.imag], axis=-1)


@dataclass(frozen=True)
class ExperimentEntry:
    name: ExperimentName
    description: str
    scenario_type: type
    snr_grid_db: tuple[float, ...]
    trials_per_point: int
    network: NetworkConfig
    train: TrainConfig
    run: Callable[[ExperimentConfig, RunOptions], ExperimentOutcome]
    generate_datasets: Callable | None = None

    def default_config(self, master_seed: int = 0) -> ExperimentConfig:
        return ExperimentConfig(name=self.name, snr_grid_db=self.snr_grid_db,
                                trials_per_point=self.trials_per_point, master_seed=master_seed,
                                scenario=self.scenario_type(), network=self.network, train=self.train)


def registry() -> dict[ExperimentName, ExperimentEntry]:
    """Every pipeline, in a stable order."""
    from . import exp_autoencoder, exp_doa, exp_mmwave, exp_noma, exp_ofdm
    entries = [exp_ofdm.ENTRY, exp_noma.ENTRY, exp_autoencoder.ENTRY,
               exp_doa.DOA_ENTRY, exp_doa.GAIN_ENTRY, exp_mmwave.ENTRY]
    return {e.name: e for e in entries}


def run_experiment(cfg: ExperimentConfig, options: RunOptions | None = None) -> ExperimentOutcome:
    entry = registry()[cfg.name]
    options = options or RunOptions()
    logger.info("experiment %s: %d SNR points x %d trials, seed %d",
                cfg.name.value, len(cfg.snr_grid_db), cfg.trials_per_point, cfg.master_seed)
    start = time.monotonic()
    outcome = entry.run(cfg, options)
    outcome.result.wall_time_s = time.monotonic() - start
    logger.info("experiment %s done in %.1f s", cfg.name.value, outcome.result.wall_time_s)
    return outcome


def new_result(cfg: ExperimentConfig) -> SweepResult:
    return SweepResult(experiment=cfg.name, seed=cfg.master_seed, config_hash=cfg.config_hash())
