# (7,4) end-to-end autoencoder against Hamming(7,4) with BPSK and hard
# decisions.
#
# A message of k=4 bits is one of 16 one-hot vectors. The encoder maps it
# to n=7 real channel uses, the channel is the network's noise layer
# (energy-normalized code, Gaussian noise per dimension) and the decoder
# ends in a softmax over the 16 messages. The SNR axis is Eb/N0 in dB.

import logging
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, SplitTag
from .errors import InvalidInputError
from .experiments import (ExperimentConfig, ExperimentEntry, ExperimentName, ExperimentOutcome,
                          NetworkConfig, RunOptions, new_result, one_hot, run_sweep)
from .hamming import K, N, RATE, hamming74_decode, hamming74_encode, hamming_bler_hard
from .metrics import MetricKind, MetricValue
from .nn import Activation, LossKind, Mlp, MlpSpec, NoiseLayerSpec, TrainConfig, init_xavier, train

logger = logging.getLogger(__name__)

NUM_MESSAGES = 1 << K
MODEL_NAME = "autoencoder"


def ebn0_to_dimension_snr_db(ebn0_db: float, rate: float = RATE) -> float:
    """Eb/N0 -> SNR per real dimension of a unit-energy code: 2 R Eb/N0."""
    return float(ebn0_db) + 10.0 * math.log10(2.0 * rate)


@dataclass(frozen=True)
class AutoencoderScenario:
    train_ebn0_db: tuple[float, float] = (4.0, 8.0)
    per_example_noise: bool = True
    train_repeats: int = 64          # copies of each message in the TRAIN split
    validation_repeats: int = 16
    blocks_per_trial: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "train_ebn0_db", tuple(float(v) for v in self.train_ebn0_db))
        if len(self.train_ebn0_db) != 2 or self.train_ebn0_db[0] > self.train_ebn0_db[1]:
            raise InvalidInputError(f"train_ebn0_db must be an ascending pair, got {self.train_ebn0_db}")
        if self.train_repeats < 1 or self.validation_repeats < 0 or self.blocks_per_trial < 1:
            raise InvalidInputError("train_repeats and blocks_per_trial must be >= 1")

    def noise_layer(self) -> NoiseLayerSpec:
        lo, hi = (ebn0_to_dimension_snr_db(v) for v in self.train_ebn0_db)
        return NoiseLayerSpec(position=2, normalize_energy=True, snr_db_range=(lo, hi),
                              per_example=self.per_example_noise)


def network_spec(cfg: ExperimentConfig) -> MlpSpec:
    """one-hot 16 -> encoder hidden -> 7 (linear code) | noise | decoder hidden -> softmax 16."""
    sizes = cfg.network.hidden_sizes
    if len(sizes) != 2:
        raise InvalidInputError(f"autoencoder needs (encoder, decoder) hidden sizes, got {sizes}")
    act = cfg.network.hidden_activation
    return MlpSpec(layer_sizes=(NUM_MESSAGES, sizes[0], N, sizes[1], NUM_MESSAGES),
                   activations=(act, Activation.LINEAR, act, Activation.SOFTMAX),
                   noise_layer=cfg.scenario.noise_layer())


def message_bits(messages) -> np.ndarray:
    """(blocks, 4) bit matrix, MSB first."""
    m = np.asarray(messages, dtype=np.int64)
    return ((m[:, None] >> np.arange(K - 1, -1, -1)) & 1).astype(np.uint8)


def generate_datasets(cfg: ExperimentConfig) -> dict[str, Dataset]:
    """Repeated one-hot messages; the noise layer supplies the channel while training."""
    scn: AutoencoderScenario = cfg.scenario
    eye = np.eye(NUM_MESSAGES)
    parts = {}
    start = 0
    for tag, repeats in ((SplitTag.TRAIN, scn.train_repeats), (SplitTag.VALIDATION, scn.validation_repeats)):
        if repeats == 0:
            continue
        x = np.tile(eye, (repeats, 1))
        parts[tag] = (x, x, np.arange(start, start + x.shape[0]))
        start += x.shape[0]
    return {MODEL_NAME: Dataset.from_splits(parts, seed=cfg.master_seed)}


def hamming_hard_blocks(messages, ebn0_db: float, rng: np.random.Generator) -> np.ndarray:
    """Encode, send as BPSK over AWGN, slice and syndrome-decode; returns (blocks, 4) bits."""
    code = hamming74_encode(message_bits(messages))
    sigma = math.sqrt(1.0 / (2.0 * RATE * 10.0 ** (ebn0_db / 10.0)))
    rx = (1.0 - 2.0 * code.astype(float)) + sigma * rng.standard_normal(code.shape)
    return hamming74_decode((rx < 0).astype(np.uint8))


def uncoded_blocks(messages, ebn0_db: float, rng: np.random.Generator) -> np.ndarray:
    bits = message_bits(messages)
    sigma = math.sqrt(1.0 / (2.0 * 10.0 ** (ebn0_db / 10.0)))
    rx = (1.0 - 2.0 * bits.astype(float)) + sigma * rng.standard_normal(bits.shape)
    return (rx < 0).astype(np.uint8)


def autoencoder_blocks(mlp: Mlp, messages, ebn0_db: float, rng: np.random.Generator) -> np.ndarray:
    x = one_hot(messages, NUM_MESSAGES)
    decided = mlp.classify(x, rng=rng, noise_snr_db=ebn0_to_dimension_snr_db(ebn0_db))
    return message_bits(decided)


def run_autoencoder_74(cfg: ExperimentConfig, options: RunOptions) -> ExperimentOutcome:
    scn: AutoencoderScenario = cfg.scenario
    datasets = generate_datasets(cfg)
    net = init_xavier(network_spec(cfg), cfg.init_seed(0))
    trained = train(net, datasets[MODEL_NAME], cfg.train_config(0), progress=options.progress)
    model = trained.mlp
    logger.info("autoencoder trained, final loss %.4g", trained.final_loss)

    def trial(si: int, snr: float, rng: np.random.Generator):
        messages = rng.integers(NUM_MESSAGES, size=scn.blocks_per_trial)
        truth = message_bits(messages)
        # independent noise per method
        ae_rng, ham_rng, unc_rng = rng.spawn(3)
        return {
            (MODEL_NAME, MetricKind.BLER): (truth, autoencoder_blocks(model, messages, snr, ae_rng)),
            ("hamming_hard", MetricKind.BLER): (truth, hamming_hard_blocks(messages, snr, ham_rng)),
            ("uncoded_bpsk", MetricKind.BLER): (truth, uncoded_blocks(messages, snr, unc_rng)),
        }

    result = new_result(cfg)
    run_sweep(cfg, options, result, trial)
    for snr in cfg.snr_grid_db:
        result.add("hamming_hard_analytic", snr, MetricKind.BLER,
                   MetricValue(value=float(hamming_bler_hard(snr)), stderr=0.0, count=0), 0)
    return ExperimentOutcome(result=result, models={MODEL_NAME: model})


ENTRY = ExperimentEntry(
    name=ExperimentName.AUTOENCODER_74,
    description="(7,4) autoencoder vs Hamming(7,4) hard decision and uncoded BPSK (BLER vs Eb/N0)",
    scenario_type=AutoencoderScenario,
    snr_grid_db=(0.0, 2.0, 4.0, 6.0, 8.0),
    trials_per_point=100,
    network=NetworkConfig(hidden_sizes=(32, 32), hidden_activation=Activation.RELU),
    train=TrainConfig(learning_rate=0.05, momentum=0.9, batch_size=64, num_iterations=5000,
                      loss=LossKind.SOFTMAX_CROSS_ENTROPY, validation_interval=500),
    run=run_autoencoder_74,
    generate_datasets=generate_datasets,
)
