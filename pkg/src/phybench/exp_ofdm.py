# OFDM receiver: DNN symbol detector vs LS channel estimation + ZF, under
# full pilots, reduced pilots and a frame with the cyclic prefix removed.
#
# A frame is one pilot OFDM symbol followed by one data symbol, sent back
# to back through the same block-fading multipath channel. The DNN sees
# both received symbols in the frequency domain and classifies the data
# symbol of one subcarrier (one-hot subcarrier index in the input).

import logging
from dataclasses import dataclass

import numpy as np

from .channel import (OfdmConfig, apply_awgn, apply_multipath, ofdm_demodulate, ofdm_modulate,
                      sample_multipath_taps)
from .constellation import Constellation, ConstellationKind, constellation
from .dataset import Dataset, SplitTag
from .detection import DEFAULT_PILOT, PilotPattern, ls_channel_estimate, zf_detect
from .errors import InvalidInputError
from .experiments import (ExperimentConfig, ExperimentEntry, ExperimentName, ExperimentOutcome,
                          NetworkConfig, RunOptions, complex_features, new_result, one_hot, run_sweep)
from .metrics import MetricKind, MetricValue
from .montecarlo import STREAM_DATASET, trial_rng
from .nn import Activation, LossKind, Mlp, MlpSpec, TrainConfig, init_xavier, train

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OfdmScenario:
    num_subcarriers: int = 16
    cp_length: int = 4
    num_taps: int = 4
    pilot_spacing: int = 1
    reduced_pilot_spacing: int = 4
    constellation: ConstellationKind = ConstellationKind.QPSK
    delay_decay: float = 3.0
    train_frames: int = 2000
    validation_frames: int = 400

    def __post_init__(self):
        object.__setattr__(self, "constellation", ConstellationKind(self.constellation))
        if self.train_frames < 1 or self.validation_frames < 0:
            raise InvalidInputError("train_frames must be >= 1 and validation_frames >= 0")
        self.settings()

    def settings(self) -> dict[str, OfdmConfig]:
        base = dict(num_subcarriers=self.num_subcarriers, num_taps=self.num_taps,
                    constellation=self.constellation)
        return {
            "full": OfdmConfig(cp_length=self.cp_length, pilot_spacing=self.pilot_spacing, **base),
            "reduced": OfdmConfig(cp_length=self.cp_length, pilot_spacing=self.reduced_pilot_spacing, **base),
            "no_cp": OfdmConfig(cp_length=0, pilot_spacing=self.pilot_spacing, **base),
        }


def pilot_symbol(ofdm: OfdmConfig, value: complex = DEFAULT_PILOT) -> np.ndarray:
    """Comb pilots, zeros on the other subcarriers."""
    x = np.zeros(ofdm.num_subcarriers, dtype=np.complex128)
    x[ofdm.pilot_positions] = value
    return x


def transmit_frame(ofdm: OfdmConfig, taps, data_freq, snr_db: float, rng: np.random.Generator,
                   pilot_snr_db: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Send pilot + data symbols back to back; return both received symbols (frequency domain).

    pilot_snr_db overrides the noise level of the pilot symbol only
    (+inf gives a clean pilot).
    """
    tx = np.concatenate([ofdm_modulate(pilot_symbol(ofdm), ofdm), ofdm_modulate(data_freq, ofdm)])
    rx = apply_multipath(tx, taps)
    n = ofdm.symbol_length
    rx_p = apply_awgn(rx[:n], snr_db if pilot_snr_db is None else pilot_snr_db, 1.0, rng)
    rx_d = apply_awgn(rx[n:], snr_db, 1.0, rng)
    return ofdm_demodulate(rx_p, ofdm), ofdm_demodulate(rx_d, ofdm)


def ls_zf_receiver(ofdm: OfdmConfig, y_pilot, y_data, c: Constellation) -> np.ndarray:
    """LS estimate from the pilot symbol, then per-subcarrier ZF; returns labels."""
    h_hat = ls_channel_estimate(y_pilot, PilotPattern.comb(ofdm), ofdm)
    return zf_detect(np.diag(h_hat), y_data, c).labels


def frame_features(y_pilot, y_data) -> np.ndarray:
    """One row per subcarrier: both received symbols (Re/Im) and a one-hot subcarrier index."""
    s = np.asarray(y_pilot).size
    shared = complex_features(np.concatenate([y_pilot, y_data]))
    return np.concatenate([np.tile(shared, (s, 1)), np.eye(s)], axis=1)


def _draw_frame(ofdm: OfdmConfig, scn: OfdmScenario, c: Constellation, rng: np.random.Generator):
    taps = sample_multipath_taps(scn.num_taps, rng, scn.delay_decay)
    labels = rng.integers(c.size, size=ofdm.num_subcarriers)
    return taps, labels


def _frames(ofdm, scn, c, rng, count, snr_range):
    feats, labs = [], []
    for _ in range(count):
        taps, labels = _draw_frame(ofdm, scn, c, rng)
        snr = rng.uniform(*snr_range)
        yp, yd = transmit_frame(ofdm, taps, c.points[labels], snr, rng)
        feats.append(frame_features(yp, yd))
        labs.append(one_hot(labels, c.size))
    return np.concatenate(feats), np.concatenate(labs)


def generate_datasets(cfg: ExperimentConfig) -> dict[str, Dataset]:
    """One training set per receiver setting; frame SNR uniform over the sweep range."""
    scn: OfdmScenario = cfg.scenario
    c = constellation(scn.constellation)
    snr_range = (min(cfg.snr_grid_db), max(cfg.snr_grid_db))
    if not np.all(np.isfinite(snr_range)):
        raise InvalidInputError("training needs a finite SNR range")
    out = {}
    s = scn.num_subcarriers
    for k, (setting, ofdm) in enumerate(scn.settings().items()):
        parts = {}
        start = 0
        for tag, frames in ((SplitTag.TRAIN, scn.train_frames), (SplitTag.VALIDATION, scn.validation_frames)):
            if frames == 0:
                continue
            rng = trial_rng(cfg.master_seed, STREAM_DATASET, k, tag.value)
            x, y = _frames(ofdm, scn, c, rng, frames, snr_range)
            # every subcarrier row of a frame shares the frame's source id
            ids = np.repeat(np.arange(start, start + frames), s)
            parts[tag] = (x, y, ids)
            start += frames
        out[f"dnn_{setting}"] = Dataset.from_splits(parts, seed=cfg.master_seed)
    return out


def _network_spec(cfg: ExperimentConfig, scn: OfdmScenario, c: Constellation) -> MlpSpec:
    s = scn.num_subcarriers
    return MlpSpec.dense(5 * s, cfg.network.hidden_sizes, c.size,
                         cfg.network.hidden_activation, Activation.SOFTMAX)


def ls_zf_ber(ofdm: OfdmConfig, snr_db: float, num_frames: int, rng: np.random.Generator,
              taps=None, pilot_snr_db: float | None = None, decay: float = 3.0) -> MetricValue:
    """Monte-Carlo BER of the LS+ZF receiver; fixed taps when given, random otherwise."""
    c = constellation(ofdm.constellation)
    errors = bits = 0
    for _ in range(num_frames):
        h = sample_multipath_taps(ofdm.num_taps, rng, decay) if taps is None else taps
        labels = rng.integers(c.size, size=ofdm.num_subcarriers)
        yp, yd = transmit_frame(ofdm, h, c.points[labels], snr_db, rng, pilot_snr_db)
        detected = ls_zf_receiver(ofdm, yp, yd, c)
        errors += int(np.count_nonzero(c.labels_to_bits(detected) != c.labels_to_bits(labels)))
        bits += labels.size * c.bits_per_symbol
    p = errors / bits
    return MetricValue(value=p, stderr=float(np.sqrt(p * (1 - p) / bits)), count=bits)


def run_ofdm_receiver(cfg: ExperimentConfig, options: RunOptions) -> ExperimentOutcome:
    scn: OfdmScenario = cfg.scenario
    c = constellation(scn.constellation)
    settings = scn.settings()
    logger.info("OFDM receiver settings: %s", ", ".join(settings))
    spec = _network_spec(cfg, scn, c)
    datasets = generate_datasets(cfg)
    models: dict[str, Mlp] = {}
    for k, setting in enumerate(settings):
        name = f"dnn_{setting}"
        net = init_xavier(spec, cfg.init_seed(k))
        models[name] = train(net, datasets[name], cfg.train_config(k), progress=options.progress).mlp

    def trial(si: int, snr: float, rng: np.random.Generator):
        taps, labels = _draw_frame(settings["full"], scn, c, rng)
        truth = c.labels_to_bits(labels)
        noise_key = rng.integers(0, 2**32, size=4)
        samples = {}
        for setting, ofdm in settings.items():
            # same noise realization for every setting
            yp, yd = transmit_frame(ofdm, taps, c.points[labels], snr, np.random.default_rng(noise_key))
            ls = ls_zf_receiver(ofdm, yp, yd, c)
            dnn = models[f"dnn_{setting}"].classify(frame_features(yp, yd))
            samples[(f"ls_zf_{setting}", MetricKind.BER)] = (truth, c.labels_to_bits(ls))
            samples[(f"dnn_{setting}", MetricKind.BER)] = (truth, c.labels_to_bits(dnn))
        return samples

    result = new_result(cfg)
    run_sweep(cfg, options, result, trial)
    return ExperimentOutcome(result=result, models=models)


ENTRY = ExperimentEntry(
    name=ExperimentName.OFDM_RECEIVER,
    description="OFDM DNN receiver vs LS+ZF with full pilots, reduced pilots and no CP (BER)",
    scenario_type=OfdmScenario,
    snr_grid_db=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0),
    trials_per_point=1000,
    network=NetworkConfig(hidden_sizes=(128, 64), hidden_activation=Activation.RELU),
    train=TrainConfig(learning_rate=0.01, momentum=0.9, batch_size=64, num_iterations=3000,
                      loss=LossKind.SOFTMAX_CROSS_ENTROPY, validation_interval=250),
    run=run_ofdm_receiver,
    generate_datasets=generate_datasets,
)
