# Desk-scale physical-layer toolkit: channel models, classical receivers,
# a from-scratch MLP and the experiment pipelines that compare them.

__version__ = "0.1.0"

from .errors import ExitCode, PhybenchError, InvalidInputError, ConfigError
from .numerics import svd, eig_hermitian, gmd
from .constellation import ConstellationKind, constellation
from .nn import Activation, LossKind, MlpSpec, Mlp, TrainConfig, init_xavier, train
from .experiments import ExperimentName, ExperimentConfig, SweepResult, RunOptions, run_experiment
from .config import load_config

__all__ = [
    "__version__",
    "ExitCode",
    "PhybenchError",
    "InvalidInputError",
    "ConfigError",
    "svd",
    "eig_hermitian",
    "gmd",
    "ConstellationKind",
    "constellation",
    "Activation",
    "LossKind",
    "MlpSpec",
    "Mlp",
    "TrainConfig",
    "init_xavier",
    "train",
    "ExperimentName",
    "ExperimentConfig",
    "SweepResult",
    "RunOptions",
    "run_experiment",
    "load_config",
]
