# Massive-MIMO uplink channel estimation split in two stages: the
# direction of arrival (a DNN classifier over an angle grid, against MUSIC)
# and the complex path gain (a DNN regressor, against least squares).
#
# One user sends num_snapshots unit pilots through a single-path channel
# h = g a(theta) to an N-antenna ULA; g ~ CN(0, 1), so the SNR is per
# antenna sample. The gain stage reuses the DOA classifier's estimates and
# scores the reconstructed channel with maximum-ratio combining of QPSK data.

import logging
import math
from dataclasses import dataclass

import numpy as np

from .channel import UlaConfig, complex_gaussian, noise_variance, sample_uplink_channel, steering_matrix
from .constellation import ConstellationKind, constellation
from .dataset import Dataset, SplitTag
from .doa import angle_grid_deg, music_doa
from .errors import InvalidInputError
from .experiments import (ExperimentConfig, ExperimentEntry, ExperimentName, ExperimentOutcome,
                          NetworkConfig, RunOptions, complex_features, new_result, one_hot, run_sweep)
from .metrics import MetricKind, compute_metric
from .montecarlo import STREAM_DATASET, trial_rng
from .nn import Activation, LossKind, Mlp, MlpSpec, TrainConfig, init_xavier, train

logger = logging.getLogger(__name__)

DOA_MODEL = "dnn_doa"
GAIN_MODEL = "dnn_gain"


@dataclass(frozen=True)
class DoaScenario:
    num_antennas: int = 16
    max_angle_deg: float = 60.0
    grid_step_deg: float = 1.0       # classifier cells; 0.01 reproduces the fine grid
    num_snapshots: int = 16
    music_grid_step_deg: float = 0.1
    train_samples: int = 20000
    validation_samples: int = 2000
    test_samples: int = 3000
    samples_per_trial: int = 10

    def __post_init__(self):
        self.ula()
        if not 0 < self.max_angle_deg <= 90:
            raise InvalidInputError(f"max_angle_deg must be in (0, 90], got {self.max_angle_deg}")
        if not self.grid_step_deg > 0 or not self.music_grid_step_deg > 0:
            raise InvalidInputError("grid steps must be > 0")
        if self.num_snapshots < 1 or self.train_samples < 1 or self.samples_per_trial < 1:
            raise InvalidInputError("num_snapshots, train_samples and samples_per_trial must be >= 1")
        if self.validation_samples < 0 or self.test_samples < 0:
            raise InvalidInputError("split sizes must be >= 0")

    def ula(self) -> UlaConfig:
        return UlaConfig(num_antennas=self.num_antennas)

    def cells_deg(self) -> np.ndarray:
        return angle_grid_deg(self.grid_step_deg, self.max_angle_deg)


@dataclass(frozen=True)
class GainScenario(DoaScenario):
    constellation: ConstellationKind = ConstellationKind.QPSK
    data_symbols: int = 64
    doa_hidden_sizes: tuple[int, ...] = (128, 128)

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "constellation", ConstellationKind(self.constellation))
        object.__setattr__(self, "doa_hidden_sizes", tuple(int(h) for h in self.doa_hidden_sizes))
        if self.data_symbols < 1:
            raise InvalidInputError(f"data_symbols must be >= 1, got {self.data_symbols}")


@dataclass
class Observation:
    theta_deg: float
    gain: complex
    h: np.ndarray          # (N,)
    snapshots: np.ndarray  # (N, T)
    snr_db: float = math.nan

    @property
    def mean_snapshot(self) -> np.ndarray:
        return self.snapshots.mean(axis=1)


def observe(scn: DoaScenario, snr_db: float, rng: np.random.Generator, theta_deg: float | None = None) -> Observation:
    """Unit-pilot snapshots of one single-path channel; theta uniform in +-max_angle unless pinned."""
    ula = scn.ula()
    draw = rng.uniform(-scn.max_angle_deg, scn.max_angle_deg)
    theta = draw if theta_deg is None else float(theta_deg)
    ch = sample_uplink_channel(ula, 1, rng, angles_rad=[math.radians(theta)])
    h = ch.h[:, 0]
    var = noise_variance(snr_db, 1.0)
    y = h[:, None] + complex_gaussian(rng, (scn.num_antennas, scn.num_snapshots), var)
    return Observation(theta_deg=theta, gain=ch.paths[0].complex_gain, h=h, snapshots=y, snr_db=float(snr_db))


def doa_features(y_mean) -> np.ndarray:
    """Re/Im of the averaged snapshot, phase-referenced to antenna 0 and scaled to norm sqrt(N)."""
    y = np.atleast_2d(np.asarray(y_mean, dtype=np.complex128))
    ref = y[:, :1]
    mag = np.abs(ref)
    rot = np.where(mag > 0, ref.conj() / np.maximum(mag, np.finfo(float).tiny), 1.0)
    z = y * rot
    norm = np.maximum(np.linalg.norm(z, axis=1, keepdims=True), np.finfo(float).tiny)
    return complex_features(z * (math.sqrt(y.shape[1]) / norm))


def nearest_cell(theta_deg, cells_deg: np.ndarray) -> np.ndarray:
    return np.argmin(np.abs(np.asarray(theta_deg, dtype=float)[..., None] - cells_deg), axis=-1)


def dnn_doa(mlp: Mlp, y_mean, cells_deg: np.ndarray) -> np.ndarray:
    """Centre of the argmax cell, degrees."""
    return cells_deg[mlp.classify(doa_features(y_mean))]


def gain_features(y_mean, theta_deg, ula: UlaConfig) -> np.ndarray:
    """Re/Im of conj(a(theta)) * y: the snapshot de-steered by the estimated direction."""
    y = np.atleast_2d(np.asarray(y_mean, dtype=np.complex128))
    a = steering_matrix(np.radians(np.atleast_1d(theta_deg)), ula).T
    return complex_features(a.conj() * y)


def ls_gain_estimate(y_mean, theta_deg, ula: UlaConfig) -> np.ndarray:
    """g = a(theta)^H y / N per row."""
    y = np.atleast_2d(np.asarray(y_mean, dtype=np.complex128))
    a = steering_matrix(np.radians(np.atleast_1d(theta_deg)), ula).T
    return np.sum(a.conj() * y, axis=1) / ula.num_antennas


def reconstruct_channel(gains, theta_deg, ula: UlaConfig) -> np.ndarray:
    """Rows h = g a(theta)."""
    a = steering_matrix(np.radians(np.atleast_1d(theta_deg)), ula).T
    return np.asarray(gains, dtype=np.complex128).reshape(-1, 1) * a


def mrc_detect(h_hat, y, c) -> np.ndarray:
    """Maximum-ratio combining x = h^H y / |h|^2 over the columns of y, then slicing."""
    h = np.asarray(h_hat, dtype=np.complex128)
    x = (h.conj() @ np.asarray(y, dtype=np.complex128)) / max(float(np.vdot(h, h).real), np.finfo(float).tiny)
    labels, _ = c.slice(x)
    return labels


def _draw_split(scn: DoaScenario, rng: np.random.Generator, count: int, snr_range) -> list[Observation]:
    return [observe(scn, rng.uniform(*snr_range), rng) for _ in range(count)]


def _snr_range(cfg: ExperimentConfig) -> tuple[float, float]:
    lo, hi = min(cfg.snr_grid_db), max(cfg.snr_grid_db)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise InvalidInputError("training needs a finite SNR range")
    return lo, hi


def _draw_test_split(scn: DoaScenario, rng: np.random.Generator, count: int, snr_grid) -> list[Observation]:
    """count observations spread evenly over the SNR grid (at least one per point)."""
    per_point = max(1, count // len(snr_grid))
    return [observe(scn, snr, rng) for snr in snr_grid for _ in range(per_point)]


def _splits(cfg: ExperimentConfig) -> dict[SplitTag, list[Observation]]:
    """TRAIN and VALIDATION span the SNR range; TEST is stratified by grid point."""
    scn: DoaScenario = cfg.scenario
    snr_range = _snr_range(cfg)
    out = {}
    for tag, n in ((SplitTag.TRAIN, scn.train_samples), (SplitTag.VALIDATION, scn.validation_samples)):
        if n > 0:
            out[tag] = _draw_split(scn, trial_rng(cfg.master_seed, STREAM_DATASET, 0, tag.value), n, snr_range)
    if scn.test_samples > 0:
        rng = trial_rng(cfg.master_seed, STREAM_DATASET, 0, SplitTag.TEST.value)
        out[SplitTag.TEST] = _draw_test_split(scn, rng, scn.test_samples, cfg.snr_grid_db)
    return out


def _held_out(splits: dict[SplitTag, list[Observation]], snr_db: float) -> list[Observation]:
    return [o for o in splits.get(SplitTag.TEST, ()) if o.snr_db == snr_db]


def _doa_dataset(cfg: ExperimentConfig, splits: dict[SplitTag, list[Observation]]) -> Dataset:
    cells = cfg.scenario.cells_deg()
    parts = {}
    start = 0
    for tag, obs in splits.items():
        x = doa_features(np.array([o.mean_snapshot for o in obs]))
        y = one_hot(nearest_cell([o.theta_deg for o in obs], cells), cells.size)
        parts[tag] = (x, y, np.arange(start, start + len(obs)))
        start += len(obs)
    return Dataset.from_splits(parts, seed=cfg.master_seed)


def _gain_dataset(cfg: ExperimentConfig, splits: dict[SplitTag, list[Observation]],
                  doa_model: Mlp) -> Dataset:
    scn: DoaScenario = cfg.scenario
    ula, cells = scn.ula(), scn.cells_deg()
    parts = {}
    start = 0
    for tag, obs in splits.items():
        y_mean = np.array([o.mean_snapshot for o in obs])
        theta_hat = dnn_doa(doa_model, y_mean, cells)
        x = gain_features(y_mean, theta_hat, ula)
        g = np.array([o.gain for o in obs])
        parts[tag] = (x, np.stack([g.real, g.imag], axis=1), np.arange(start, start + len(obs)))
        start += len(obs)
    return Dataset.from_splits(parts, seed=cfg.master_seed)


def doa_network_spec(scn: DoaScenario, hidden_sizes, hidden_activation) -> MlpSpec:
    return MlpSpec.dense(2 * scn.num_antennas, hidden_sizes, scn.cells_deg().size,
                         hidden_activation, Activation.SOFTMAX)


def generate_doa_datasets(cfg: ExperimentConfig) -> dict[str, Dataset]:
    return {DOA_MODEL: _doa_dataset(cfg, _splits(cfg))}


def run_doa_estimation(cfg: ExperimentConfig, options: RunOptions) -> ExperimentOutcome:
    scn: DoaScenario = cfg.scenario
    ula, cells = scn.ula(), scn.cells_deg()
    logger.info("DOA classifier over %d cells of %g deg", len(cells), scn.grid_step_deg)
    spec = doa_network_spec(scn, cfg.network.hidden_sizes, cfg.network.hidden_activation)
    splits = _splits(cfg)
    net = init_xavier(spec, cfg.init_seed(0))
    model = train(net, _doa_dataset(cfg, splits), cfg.train_config(0), progress=options.progress).mlp

    def estimates(obs: list[Observation]) -> dict[str, np.ndarray]:
        y_mean = np.array([o.mean_snapshot for o in obs])
        music = [music_doa(o.snapshots, 1, ula, scn.music_grid_step_deg).angles_deg[0] for o in obs]
        return {"dnn": dnn_doa(model, y_mean, cells), "music": np.array(music)}

    def trial(si: int, snr: float, rng: np.random.Generator):
        obs = [observe(scn, snr, rng) for _ in range(scn.samples_per_trial)]
        truth = np.array([o.theta_deg for o in obs])
        return {(method, MetricKind.MSE_DEG2): (truth, est) for method, est in estimates(obs).items()}

    result = new_result(cfg)
    run_sweep(cfg, options, result, trial)
    for snr in cfg.snr_grid_db:
        held = _held_out(splits, snr)
        if held:
            truth = np.array([o.theta_deg for o in held])
            for method, est in estimates(held).items():
                result.add(f"{method}_heldout", snr, MetricKind.MSE_DEG2,
                           compute_metric(MetricKind.MSE_DEG2, truth, est), len(held))
    return ExperimentOutcome(result=result, models={DOA_MODEL: model})


def _gain_stage(cfg: ExperimentConfig, options: RunOptions):
    """Train the DOA classifier, then the gain regressor on the classifier's own estimates."""
    scn: GainScenario = cfg.scenario
    splits = _splits(cfg)
    doa_set = _doa_dataset(cfg, splits)
    doa_spec = doa_network_spec(scn, scn.doa_hidden_sizes, cfg.network.hidden_activation)
    doa_cfg = cfg.train_config(0, loss=LossKind.SOFTMAX_CROSS_ENTROPY)
    doa_model = train(init_xavier(doa_spec, cfg.init_seed(0)), doa_set, doa_cfg,
                      progress=options.progress).mlp
    gain_set = _gain_dataset(cfg, splits, doa_model)
    gain_spec = MlpSpec.dense(2 * scn.num_antennas, cfg.network.hidden_sizes, 2,
                              cfg.network.hidden_activation, Activation.LINEAR)
    gain_cfg = cfg.train_config(1, loss=LossKind.MSE)
    gain_model = train(init_xavier(gain_spec, cfg.init_seed(1)), gain_set, gain_cfg,
                       progress=options.progress).mlp
    logger.info("gain regressor trained on %d DOA estimates", len(gain_set.features))
    datasets = {DOA_MODEL: doa_set, GAIN_MODEL: gain_set}
    return datasets, {DOA_MODEL: doa_model, GAIN_MODEL: gain_model}, splits


def generate_gain_datasets(cfg: ExperimentConfig) -> dict[str, Dataset]:
    """DOA classifier set and gain regressor set; the latter needs the trained classifier."""
    datasets, _, _ = _gain_stage(cfg, RunOptions())
    return datasets


def run_gain_estimation(cfg: ExperimentConfig, options: RunOptions) -> ExperimentOutcome:
    scn: GainScenario = cfg.scenario
    ula, cells = scn.ula(), scn.cells_deg()
    c = constellation(scn.constellation)
    _, models, splits = _gain_stage(cfg, options)

    def channel_estimates(obs: list[Observation]) -> tuple[np.ndarray, np.ndarray]:
        """(h_dnn, h_ls) rows, both built on the DNN direction estimate."""
        y_mean = np.array([o.mean_snapshot for o in obs])
        theta_hat = dnn_doa(models[DOA_MODEL], y_mean, cells)
        g_dnn = models[GAIN_MODEL].predict(gain_features(y_mean, theta_hat, ula)) @ np.array([1.0, 1.0j])
        return (reconstruct_channel(g_dnn, theta_hat, ula),
                reconstruct_channel(ls_gain_estimate(y_mean, theta_hat, ula), theta_hat, ula))

    def trial(si: int, snr: float, rng: np.random.Generator):
        obs = [observe(scn, snr, rng) for _ in range(scn.samples_per_trial)]
        h = np.array([o.h for o in obs])
        h_dnn, h_ls = channel_estimates(obs)

        labels = rng.integers(c.size, size=(len(obs), scn.data_symbols))
        var = noise_variance(snr, 1.0)
        rx = h[:, :, None] * c.points[labels][:, None, :] + complex_gaussian(
            rng, (len(obs), scn.num_antennas, scn.data_symbols), var)
        truth = c.labels_to_bits(labels)
        samples = {}
        for method, est in (("mrc_perfect", h), ("mrc_dnn", h_dnn), ("mrc_ls", h_ls)):
            detected = np.array([mrc_detect(est[i], rx[i], c) for i in range(len(obs))])
            samples[(method, MetricKind.BER)] = (truth, c.labels_to_bits(detected))
        samples[("chest_dnn", MetricKind.NMSE)] = (h, h_dnn)
        samples[("chest_ls", MetricKind.NMSE)] = (h, h_ls)
        return samples

    result = new_result(cfg)
    run_sweep(cfg, options, result, trial)
    for snr in cfg.snr_grid_db:
        held = _held_out(splits, snr)
        if held:
            h = np.array([o.h for o in held])
            for method, est in zip(("chest_dnn_heldout", "chest_ls_heldout"), channel_estimates(held)):
                result.add(method, snr, MetricKind.NMSE, compute_metric(MetricKind.NMSE, h, est), len(held))
    return ExperimentOutcome(result=result, models=models)


DOA_ENTRY = ExperimentEntry(
    name=ExperimentName.DOA_ESTIMATION,
    description="Uplink DOA: DNN grid classifier vs MUSIC (MSE in deg^2)",
    scenario_type=DoaScenario,
    snr_grid_db=(0.0, 5.0, 10.0, 15.0, 20.0),
    trials_per_point=100,
    network=NetworkConfig(hidden_sizes=(128, 128), hidden_activation=Activation.RELU),
    train=TrainConfig(learning_rate=0.01, momentum=0.9, batch_size=64, num_iterations=5000,
                      loss=LossKind.SOFTMAX_CROSS_ENTROPY, validation_interval=500),
    run=run_doa_estimation,
    generate_datasets=generate_doa_datasets,
)

GAIN_ENTRY = ExperimentEntry(
    name=ExperimentName.GAIN_ESTIMATION,
    description="Uplink gain estimation after DOA: DNN regressor vs LS (MRC BER, channel NMSE)",
    scenario_type=GainScenario,
    snr_grid_db=(0.0, 5.0, 10.0, 15.0, 20.0),
    trials_per_point=100,
    network=NetworkConfig(hidden_sizes=(64, 64), hidden_activation=Activation.RELU),
    train=TrainConfig(learning_rate=0.005, momentum=0.9, batch_size=64, num_iterations=5000,
                      loss=LossKind.MSE, validation_interval=500),
    run=run_gain_estimation,
    generate_datasets=generate_gain_datasets,
)
