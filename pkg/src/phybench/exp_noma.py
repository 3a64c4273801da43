# Two-user downlink NOMA: SIC with perfect or pilot-estimated CSI against a
# DNN detector fed with the raw pilot observations.
#
# User 0 is the far user (weaker mean gain) and gets power alpha; user 1
# gets 1 - alpha. Each receiver u sees y = g_u (sqrt(p0) x0 + sqrt(p1) x1) + n
# over a block-fading frame: num_pilots pilot symbols, then data symbols.
# CSI quality is the pilot power boost in dB.

import logging
import math
from dataclasses import dataclass

import numpy as np

from .channel import complex_gaussian, noise_variance
from .constellation import Constellation, ConstellationKind, constellation
from .dataset import Dataset, SplitTag
from .detection import DEFAULT_PILOT
from .errors import InvalidInputError
from .experiments import (ExperimentConfig, ExperimentEntry, ExperimentName, ExperimentOutcome,
                          NetworkConfig, RunOptions, complex_features, new_result, one_hot, run_sweep)
from .metrics import MetricKind, MetricValue
from .montecarlo import STREAM_DATASET, trial_rng
from .nn import Activation, LossKind, Mlp, MlpSpec, TrainConfig, init_xavier, train
from .noma import (NomaConfig, achievable_rate, ergodic_rate_rayleigh, noma_superpose, orthogonal_rate,
                   sic_decode)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NomaScenario:
    alpha: float = 0.8
    constellation: ConstellationKind = ConstellationKind.QPSK
    mean_gain_db: tuple[float, float] = (0.0, 10.0)
    num_pilots: int = 4
    pilot_boost_db: tuple[float, ...] = (0.0, 10.0)
    symbols_per_frame: int = 64
    train_frames: int = 2000
    validation_frames: int = 200

    def __post_init__(self):
        object.__setattr__(self, "constellation", ConstellationKind(self.constellation))
        object.__setattr__(self, "mean_gain_db", tuple(float(g) for g in self.mean_gain_db))
        object.__setattr__(self, "pilot_boost_db", tuple(float(b) for b in self.pilot_boost_db))
        if self.noma_config().num_users != 2:
            raise InvalidInputError(f"alpha={self.alpha} leaves a single user; the scenario needs two")
        if len(self.mean_gain_db) != 2:
            raise InvalidInputError(f"two users expected, got {len(self.mean_gain_db)} mean gains")
        if self.num_pilots < 1 or self.symbols_per_frame < 1 or self.train_frames < 1:
            raise InvalidInputError("num_pilots, symbols_per_frame and train_frames must be >= 1")
        if not self.pilot_boost_db:
            raise InvalidInputError("pilot_boost_db needs at least one CSI quality")

    def noma_config(self) -> NomaConfig:
        return NomaConfig.two_user(self.alpha)

    @property
    def mean_gains(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.mean_gain_db) / 10.0)


def pilot_value(boost_db: float) -> complex:
    return DEFAULT_PILOT * math.sqrt(10.0 ** (boost_db / 10.0))


@dataclass
class Frame:
    gains: np.ndarray          # one gain per receiver
    labels: np.ndarray         # (users, symbols)
    rx_data: np.ndarray        # (receivers, symbols)
    pilot_noise: np.ndarray    # (receivers, num_pilots)

    def rx_pilots(self, boost_db: float) -> np.ndarray:
        """Received pilots for one CSI quality; the noise is shared by all qualities."""
        return self.gains[:, None] * pilot_value(boost_db) + self.pilot_noise


def draw_frame(scn: NomaScenario, c: Constellation, snr_db: float, rng: np.random.Generator) -> Frame:
    cfg = scn.noma_config()
    gains = complex_gaussian(rng, 2) * np.sqrt(scn.mean_gains)
    labels = rng.integers(c.size, size=(cfg.num_users, scn.symbols_per_frame))
    x = noma_superpose([c.points[lab] for lab in labels], cfg)
    var = noise_variance(snr_db, 1.0)
    rx_d = gains[:, None] * x[None, :] + complex_gaussian(rng, (2, scn.symbols_per_frame), var)
    return Frame(gains=gains, labels=labels, rx_data=rx_d,
                 pilot_noise=complex_gaussian(rng, (2, scn.num_pilots), var))


def ls_gain(rx_pilots, boost_db: float) -> complex:
    return complex(np.mean(np.asarray(rx_pilots) / pilot_value(boost_db)))


def sic_bits(y, gain: complex, scn: NomaScenario, c: Constellation) -> list:
    """SIC at one receiver; both users' bits (None where undecodable)."""
    cfg = scn.noma_config()
    res = sic_decode(y, np.full(cfg.num_users, gain), cfg, c)
    return list(res.bits)


def dnn_features(rx_pilots, rx_data) -> np.ndarray:
    """One row per data symbol: the symbol and every pilot observation (Re/Im)."""
    rx_data = np.asarray(rx_data)
    rows = np.concatenate([rx_data[:, None], np.tile(rx_pilots, (rx_data.size, 1))], axis=1)
    return complex_features(rows)


def joint_labels(labels: np.ndarray, c: Constellation) -> np.ndarray:
    return labels[0] * c.size + labels[1]


def _user_bits(joint: np.ndarray, user: int, c: Constellation) -> np.ndarray:
    lab = joint // c.size if user == 0 else joint % c.size
    return c.labels_to_bits(lab)


def _model_name(boost: float, user: int) -> str:
    return f"dnn_csi{boost:g}_u{user}"


def generate_datasets(cfg: ExperimentConfig) -> dict[str, Dataset]:
    """Per (CSI quality, receiver): rows of (symbol, pilots) -> joint label of both users."""
    scn: NomaScenario = cfg.scenario
    c = constellation(scn.constellation)
    lo, hi = min(cfg.snr_grid_db), max(cfg.snr_grid_db)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise InvalidInputError("training needs a finite SNR range")
    out = {}
    for bi, boost in enumerate(scn.pilot_boost_db):
        parts = {user: {} for user in range(2)}
        start = 0
        for tag, frames in ((SplitTag.TRAIN, scn.train_frames), (SplitTag.VALIDATION, scn.validation_frames)):
            if frames == 0:
                continue
            rng = trial_rng(cfg.master_seed, STREAM_DATASET, bi, tag.value)
            feats = {0: [], 1: []}
            labs = []
            for _ in range(frames):
                fr = draw_frame(scn, c, rng.uniform(lo, hi), rng)
                labs.append(one_hot(joint_labels(fr.labels, c), c.size ** 2))
                for user in range(2):
                    feats[user].append(dnn_features(fr.rx_pilots(boost)[user], fr.rx_data[user]))
            ids = np.repeat(np.arange(start, start + frames), scn.symbols_per_frame)
            for user in range(2):
                parts[user][tag] = (np.concatenate(feats[user]), np.concatenate(labs), ids)
            start += frames
        for user in range(2):
            out[_model_name(boost, user)] = Dataset.from_splits(parts[user], seed=cfg.master_seed)
    return out


def analytic_sum_rate(scn: NomaScenario, snr_db: float) -> float:
    """Expected perfect-CSI SIC sum rate under Rayleigh block fading."""
    cfg = scn.noma_config()
    mean = scn.mean_gains[: cfg.num_users]
    return float(ergodic_rate_rayleigh(mean, cfg.powers, noise_variance(snr_db, 1.0)).sum())


def run_noma_detection(cfg: ExperimentConfig, options: RunOptions) -> ExperimentOutcome:
    scn: NomaScenario = cfg.scenario
    c = constellation(scn.constellation)
    ncfg = scn.noma_config()
    if ncfg.num_users != 2:
        raise InvalidInputError("the detection sweep needs two users (alpha < 1)")
    datasets = generate_datasets(cfg)
    spec = MlpSpec.dense(2 * (scn.num_pilots + 1), cfg.network.hidden_sizes, c.size ** 2,
                         cfg.network.hidden_activation, Activation.SOFTMAX)
    models: dict[str, Mlp] = {}
    for k, name in enumerate(datasets):
        net = init_xavier(spec, cfg.init_seed(k))
        models[name] = train(net, datasets[name], cfg.train_config(k), progress=options.progress).mlp
    logger.info("trained %d NOMA detectors for %d CSI qualities", len(models), len(scn.pilot_boost_db))

    def trial(si: int, snr: float, rng: np.random.Generator):
        var = noise_variance(snr, 1.0)
        fr = draw_frame(scn, c, snr, rng)
        samples = {}
        truth = [c.labels_to_bits(fr.labels[user]) for user in range(2)]
        for user in range(2):
            got = sic_bits(fr.rx_data[user], fr.gains[user], scn, c)[user]
            samples[(f"sic_perfect_u{user}", MetricKind.BER)] = (truth[user], got)
        for boost in scn.pilot_boost_db:
            rx_p = fr.rx_pilots(boost)
            for user in range(2):
                got = sic_bits(fr.rx_data[user], ls_gain(rx_p[user], boost), scn, c)[user]
                if got is None:
                    got = 1 - truth[user]
                samples[(f"sic_ls_csi{boost:g}_u{user}", MetricKind.BER)] = (truth[user], got)
                joint = models[_model_name(boost, user)].classify(dnn_features(rx_p[user], fr.rx_data[user]))
                samples[(_model_name(boost, user), MetricKind.BER)] = (truth[user], _user_bits(joint, user, c))
        samples[("sic_perfect_sum", MetricKind.RATE)] = (
            None, float(achievable_rate(fr.gains, ncfg.powers, var).sum()))
        samples[("oma_perfect_sum", MetricKind.RATE)] = (
            None, float(orthogonal_rate(fr.gains, ncfg.powers, var).sum()))
        for boost in scn.pilot_boost_db:
            # estimation error acts as extra noise of variance var / (pilots * boost)
            err_var = var / (scn.num_pilots * 10.0 ** (boost / 10.0))
            rx_p = fr.rx_pilots(boost)
            g_hat = np.array([ls_gain(rx_p[u], boost) for u in range(2)])
            rate = float(achievable_rate(g_hat, ncfg.powers, var + err_var).sum())
            samples[(f"sic_ls_csi{boost:g}_sum", MetricKind.RATE)] = (None, rate)
        return samples

    result = new_result(cfg)
    run_sweep(cfg, options, result, trial)
    for snr in cfg.snr_grid_db:
        result.add("analytic_sum", snr, MetricKind.RATE,
                   MetricValue(value=analytic_sum_rate(scn, snr), stderr=0.0, count=0), 0)
    return ExperimentOutcome(result=result, models=models)


ENTRY = ExperimentEntry(
    name=ExperimentName.NOMA_DETECTION,
    description="Two-user NOMA: DNN detector vs SIC with perfect and LS-estimated CSI (BER, sum rate)",
    scenario_type=NomaScenario,
    snr_grid_db=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0),
    trials_per_point=200,
    network=NetworkConfig(hidden_sizes=(64, 64), hidden_activation=Activation.RELU),
    train=TrainConfig(learning_rate=0.01, momentum=0.9, batch_size=64, num_iterations=3000,
                      loss=LossKind.SOFTMAX_CROSS_ENTROPY, validation_interval=250),
    run=run_noma_detection,
    generate_datasets=generate_datasets,
)
