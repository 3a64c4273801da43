# mmWave point-to-point precoding over clustered Saleh-Valenzuela channels.
#
# Ns QPSK streams, y = sqrt(rho / Ns) H F s + n with unit-variance noise,
# combined as z = W y. Fully-digital SVD (ZF per stream) and GMD (QR
# successive cancellation) are compared with their hybrid approximations
# and with a DNN that predicts the analog phases of the hybrid GMD split
# from the channel, the digital part being refit by least squares.

import logging
import math
from dataclasses import dataclass

import numpy as np

from .channel import SvChannelParams, complex_gaussian, sample_sv_channel
from .constellation import Constellation, ConstellationKind, constellation
from .dataset import Dataset, SplitTag
from .detection import qr_sic_detect, zf_detect
from .errors import InvalidInputError
from .experiments import (ExperimentConfig, ExperimentEntry, ExperimentName, ExperimentOutcome,
                          NetworkConfig, RunOptions, complex_features, new_result, run_sweep)
from .metrics import MetricKind
from .montecarlo import STREAM_DATASET, trial_rng
from .nn import Activation, LossKind, Mlp, MlpSpec, TrainConfig, init_xavier, train
from .precoding import baseband_from_phases, gmd_precoder, hybrid_decompose, hybrid_precoder, svd_precoder

logger = logging.getLogger(__name__)

MODEL_NAME = "dnn_hybrid_gmd"


@dataclass(frozen=True)
class MmwaveScenario:
    num_tx: int = 16
    num_rx: int = 4
    num_streams: int = 2
    num_rf: int = 2
    num_clusters: int = 3
    rays_per_cluster: int = 4
    angle_spread_deg: float = 7.5
    hybrid_iterations: int = 10
    constellation: ConstellationKind = ConstellationKind.QPSK
    vectors_per_trial: int = 64
    train_channels: int = 5000
    validation_channels: int = 500
    test_channels: int = 500

    def __post_init__(self):
        object.__setattr__(self, "constellation", ConstellationKind(self.constellation))
        self.channel_params()
        if not 1 <= self.num_streams <= min(self.num_tx, self.num_rx):
            raise InvalidInputError(
                f"num_streams={self.num_streams} must be in [1, {min(self.num_tx, self.num_rx)}]")
        if not self.num_streams <= self.num_rf <= self.num_tx:
            raise InvalidInputError(f"num_rf={self.num_rf} must be in [{self.num_streams}, {self.num_tx}]")
        if self.hybrid_iterations < 0 or self.vectors_per_trial < 1 or self.train_channels < 1:
            raise InvalidInputError("hybrid_iterations >= 0, vectors_per_trial and train_channels >= 1 required")
        if self.validation_channels < 0 or self.test_channels < 0:
            raise InvalidInputError("split sizes must be >= 0")

    def channel_params(self) -> SvChannelParams:
        return SvChannelParams(num_tx=self.num_tx, num_rx=self.num_rx, num_clusters=self.num_clusters,
                               rays_per_cluster=self.rays_per_cluster, angle_spread_deg=self.angle_spread_deg)


def channel_features(h) -> np.ndarray:
    """Re/Im of vec(H) scaled to ||H||_F^2 = Nt Nr."""
    hm = np.asarray(h, dtype=np.complex128)
    norm = max(float(np.linalg.norm(hm)), np.finfo(float).tiny)
    return complex_features(hm.reshape(-1) * (math.sqrt(hm.size) / norm))


def relative_phases(f_rf) -> np.ndarray:
    """Analog phases referenced to the first antenna of each RF chain; row 0 dropped."""
    ph = np.angle(np.asarray(f_rf))
    return (ph - ph[:1])[1:]


def phase_targets(f_rf) -> np.ndarray:
    ph = relative_phases(f_rf).reshape(-1)
    return np.concatenate([np.cos(ph), np.sin(ph)])


def phases_from_output(out, num_tx: int, num_rf: int) -> np.ndarray:
    """Inverse of phase_targets: (Nt, n_rf) phases with a zero first row."""
    o = np.asarray(out, dtype=float).reshape(-1)
    half = o.size // 2
    ph = np.arctan2(o[half:], o[:half]).reshape(num_tx - 1, num_rf)
    return np.vstack([np.zeros((1, num_rf)), ph])


def hybrid_gmd_target(h, scn: MmwaveScenario) -> np.ndarray:
    split = hybrid_decompose(gmd_precoder(h, scn.num_streams).precoder, scn.num_rf, scn.hybrid_iterations)
    return phase_targets(split.f_rf)


def generate_datasets(cfg: ExperimentConfig) -> dict[str, Dataset]:
    """Channels -> analog phases of the hybrid split of their GMD precoder."""
    scn: MmwaveScenario = cfg.scenario
    params = scn.channel_params()
    parts = {}
    start = 0
    for tag, count in ((SplitTag.TRAIN, scn.train_channels), (SplitTag.VALIDATION, scn.validation_channels),
                       (SplitTag.TEST, scn.test_channels)):
        if count == 0:
            continue
        rng = trial_rng(cfg.master_seed, STREAM_DATASET, 0, tag.value)
        hs = [sample_sv_channel(params, rng).h for _ in range(count)]
        x = np.array([channel_features(h) for h in hs])
        y = np.array([hybrid_gmd_target(h, scn) for h in hs])
        parts[tag] = (x, y, np.arange(start, start + count))
        start += count
        logger.info("mmwave dataset %s: %d channels", tag.name.lower(), count)
    return {MODEL_NAME: Dataset.from_splits(parts, seed=cfg.master_seed)}


def _received(h, precoder, combiner, symbols, noise, snr_db: float):
    """Effective channel G and combined observation z = G s + W n."""
    scale = math.sqrt(10.0 ** (snr_db / 10.0) / precoder.shape[1])
    g = scale * combiner @ h @ precoder
    return g, g @ symbols + combiner @ noise


def dnn_precoder(mlp: Mlp, h, scn: MmwaveScenario) -> np.ndarray:
    target = gmd_precoder(h, scn.num_streams)
    phases = phases_from_output(mlp.predict(channel_features(h)), scn.num_tx, scn.num_rf)
    f_rf, f_bb = baseband_from_phases(target.precoder, phases)
    return f_rf @ f_bb


def detect_all(h, symbols_labels, noise, snr_db: float, scn: MmwaveScenario, c: Constellation,
               model: Mlp | None) -> dict[str, np.ndarray]:
    """Detected labels (Ns, vectors) per method, all on the same channel, symbols and noise."""
    s = c.points[symbols_labels]
    svd_pair = svd_precoder(h, scn.num_streams)
    gmd_pair = gmd_precoder(h, scn.num_streams)
    hyb_svd, _ = hybrid_precoder(h, svd_pair, scn.num_rf, scn.hybrid_iterations)
    hyb_gmd, _ = hybrid_precoder(h, gmd_pair, scn.num_rf, scn.hybrid_iterations)
    out = {}
    for method, pair, detector in (("digital_svd", svd_pair, zf_detect), ("digital_gmd", gmd_pair, qr_sic_detect),
                                   ("hybrid_svd", hyb_svd, zf_detect), ("hybrid_gmd", hyb_gmd, qr_sic_detect)):
        g, z = _received(h, pair.precoder, pair.combiner, s, noise, snr_db)
        out[method] = detector(g, z, c).labels
    if model is not None:
        g, z = _received(h, dnn_precoder(model, h, scn), gmd_pair.combiner, s, noise, snr_db)
        out[MODEL_NAME] = qr_sic_detect(g, z, c).labels
    return out


def run_mmwave_precoding(cfg: ExperimentConfig, options: RunOptions) -> ExperimentOutcome:
    scn: MmwaveScenario = cfg.scenario
    c = constellation(scn.constellation)
    params = scn.channel_params()
    datasets = generate_datasets(cfg)
    spec = MlpSpec.dense(2 * scn.num_tx * scn.num_rx, cfg.network.hidden_sizes,
                         2 * (scn.num_tx - 1) * scn.num_rf, cfg.network.hidden_activation, Activation.LINEAR)
    model = train(init_xavier(spec, cfg.init_seed(0)), datasets[MODEL_NAME], cfg.train_config(0),
                  progress=options.progress).mlp

    def trial(si: int, snr: float, rng: np.random.Generator):
        h = sample_sv_channel(params, rng).h
        labels = rng.integers(c.size, size=(scn.num_streams, scn.vectors_per_trial))
        noise = complex_gaussian(rng, (scn.num_rx, scn.vectors_per_trial))
        truth = c.labels_to_bits(labels)
        detected = detect_all(h, labels, noise, snr, scn, c, model)
        return {(method, MetricKind.BER): (truth, c.labels_to_bits(lab)) for method, lab in detected.items()}

    result = new_result(cfg)
    run_sweep(cfg, options, result, trial)
    return ExperimentOutcome(result=result, models={MODEL_NAME: model})


ENTRY = ExperimentEntry(
    name=ExperimentName.MMWAVE_PRECODING,
    description="mmWave precoding: digital/hybrid SVD and GMD, DNN hybrid GMD (BER)",
    scenario_type=MmwaveScenario,
    snr_grid_db=(-20.0, -15.0, -10.0, -5.0, 0.0),
    trials_per_point=200,
    network=NetworkConfig(hidden_sizes=(256, 256), hidden_activation=Activation.RELU),
    train=TrainConfig(learning_rate=0.001, momentum=0.85, weight_decay=1e-4, batch_size=64,
                      num_iterations=5000, loss=LossKind.MSE, validation_interval=500),
    run=run_mmwave_precoding,
    generate_datasets=generate_datasets,
)
