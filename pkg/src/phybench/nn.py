# Dense neural networks from scratch: forward/backward propagation, Xavier
# initialization, MSE and softmax cross-entropy losses, SGD with momentum,
# an in-network Gaussian noise layer and finite-difference gradient checks.
#
# Networks are real-valued. Weights of layer l have shape (fan_in, fan_out)
# and act on row vectors: z = a @ W + b. A network of L affine layers has
# layer_sizes of length L + 1. The noise layer at position p (1..L-1) acts
# on the output of affine layer p, before layer p + 1 sees it.

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from .dataset import Dataset, SplitTag
from .errors import InvalidInputError, TrainingDivergedError

logger = logging.getLogger(__name__)

GRADCHECK_STEP = 1e-5
GRADCHECK_FLOOR = 1e-8
GRADCHECK_TOL = 1e-6


class Activation(enum.IntEnum):
    LINEAR = 0
    RELU = 1
    TANH = 2
    SOFTMAX = 3


class LossKind(enum.IntEnum):
    MSE = 0
    SOFTMAX_CROSS_ENTROPY = 1


@dataclass(frozen=True)
class NoiseLayerSpec:
    """Additive Gaussian noise on one hidden representation.

    The SNR is per real dimension: with normalize_energy the layer input
    is scaled to unit average energy per dimension first, and the noise
    variance is 10^(-snr_db/10). Training draws the SNR uniformly from
    snr_db_range, once per batch or once per example.
    """

    position: int
    normalize_energy: bool = False
    snr_db_range: tuple[float, float] = (0.0, 20.0)
    per_example: bool = False

    def __post_init__(self):
        lo, hi = self.snr_db_range
        if not lo <= hi:
            raise InvalidInputError(f"noise SNR range must be ascending, got {self.snr_db_range}")


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    activations: tuple[Activation, ...]
    noise_layer: NoiseLayerSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        object.__setattr__(self, "activations", tuple(Activation(a) for a in self.activations))
        if len(self.layer_sizes) < 2:
            raise InvalidInputError(f"need at least input and output sizes, got {self.layer_sizes}")
        if any(s < 1 for s in self.layer_sizes):
            raise InvalidInputError(f"layer sizes must be >= 1, got {self.layer_sizes}")
        if len(self.activations) != self.num_layers:
            raise InvalidInputError(
                f"{len(self.activations)} activations for {self.num_layers} layers")
        if Activation.SOFTMAX in self.activations[:-1]:
            raise InvalidInputError("softmax is only allowed at the output layer")
        if self.noise_layer is not None and not 1 <= self.noise_layer.position < self.num_layers:
            raise InvalidInputError(
                f"noise layer position {self.noise_layer.position} must be in [1, {self.num_layers - 1}]")

    @classmethod
    def dense(cls, input_dim: int, hidden_sizes, output_dim: int,
              hidden_activation: Activation = Activation.RELU,
              output_activation: Activation = Activation.LINEAR,
              noise_layer: NoiseLayerSpec | None = None) -> "MlpSpec":
        hidden = tuple(int(h) for h in hidden_sizes)
        acts = (Activation(hidden_activation),) * len(hidden) + (Activation(output_activation),)
        return cls(layer_sizes=(input_dim, *hidden, output_dim), activations=acts, noise_layer=noise_layer)

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class VelocityState:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, mlp: "Mlp") -> "VelocityState":
        return cls(weights=[np.zeros_like(w) for w in mlp.weights],
                   biases=[np.zeros_like(b) for b in mlp.biases])


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]        # input seen by each affine layer
    pre_activations: list[np.ndarray]
    output: np.ndarray
    noise_norms: np.ndarray | None = None   # row norms before energy normalization

    @property
    def logits(self) -> np.ndarray:
        return self.pre_activations[-1]

    @property
    def activations(self) -> list[np.ndarray]:
        return self.inputs[1:] + [self.output]


@dataclass
class Mlp:
    spec: MlpSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        sizes = self.spec.layer_sizes
        if len(self.weights) != self.spec.num_layers or len(self.biases) != self.spec.num_layers:
            raise InvalidInputError("parameter count does not match the MlpSpec")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise InvalidInputError(
                    f"layer {i}: W {w.shape} b {b.shape}, expected ({sizes[i]}, {sizes[i + 1]})")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidInputError(f"layer {i} has non-finite parameters")

    @property
    def num_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "Mlp":
        return Mlp(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def forward(self, x, rng=None, training=False, noise_snr_db=None) -> ForwardCache:
        return forward(self, x, rng=rng, training=training, noise_snr_db=noise_snr_db)

    def backward(self, cache: ForwardCache, d_logits) -> Gradients:
        return backward(self, cache, d_logits)

    def predict(self, x, rng=None, noise_snr_db=None) -> np.ndarray:
        return forward(self, x, rng=rng, noise_snr_db=noise_snr_db).output

    def classify(self, x, rng=None, noise_snr_db=None) -> np.ndarray:
        return np.argmax(self.predict(x, rng=rng, noise_snr_db=noise_snr_db), axis=-1)


def init_xavier(spec: MlpSpec, seed: int) -> Mlp:
    """Weights uniform on +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(spec=spec, weights=weights, biases=biases)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def activate(z: np.ndarray, act: Activation) -> np.ndarray:
    act = Activation(act)
    if act is Activation.RELU:
        return np.maximum(z, 0.0)
    if act is Activation.TANH:
        return np.tanh(z)
    if act is Activation.SOFTMAX:
        return softmax(z)
    return z


def activation_backward(z: np.ndarray, a: np.ndarray, act: Activation, da: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. pre-activation z given the gradient w.r.t. a = act(z)."""
    act = Activation(act)
    if act is Activation.RELU:
        return da * (z > 0)
    if act is Activation.TANH:
        return da * (1.0 - a * a)
    if act is Activation.SOFTMAX:
        return a * (da - np.sum(a * da, axis=-1, keepdims=True))
    return da


def _noise_snr(noise: NoiseLayerSpec, rows: int, rng, training: bool, snr_db) -> np.ndarray | None:
    if not training:
        return None if snr_db is None else np.full((rows, 1), float(snr_db))
    if rng is None:
        raise InvalidInputError("a noise layer needs an rng while training")
    lo, hi = noise.snr_db_range
    n = rows if noise.per_example else 1
    return np.broadcast_to(rng.uniform(lo, hi, (n, 1)), (rows, 1))


def forward(mlp: Mlp, x, rng=None, training: bool = False, noise_snr_db=None) -> ForwardCache:
    """Run the affine+activation chain.

    The noise layer adds noise while training (SNR drawn from its range)
    and in evaluation only when noise_snr_db is given; energy
    normalization applies in both modes.
    """
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if a.shape[1] != mlp.spec.input_dim:
        raise InvalidInputError(f"input has {a.shape[1]} features, network expects {mlp.spec.input_dim}")
    noise = mlp.spec.noise_layer
    inputs, pres = [], []
    norms = None
    for i, (w, b, act) in enumerate(zip(mlp.weights, mlp.biases, mlp.spec.activations)):
        if noise is not None and i == noise.position:
            if noise.normalize_energy:
                norms = np.maximum(np.linalg.norm(a, axis=1, keepdims=True), np.finfo(float).tiny)
                a = math.sqrt(a.shape[1]) * a / norms
            snr = _noise_snr(noise, a.shape[0], rng, training, noise_snr_db)
            if snr is not None and np.any(np.isfinite(snr)):
                if rng is None:
                    raise InvalidInputError("noise_snr_db given without an rng")
                std = np.sqrt(10.0 ** (-snr / 10.0))
                a = a + std * rng.standard_normal(a.shape)
        inputs.append(a)
        z = a @ w + b
        pres.append(z)
        a = activate(z, act)
    return ForwardCache(inputs=inputs, pre_activations=pres, output=a, noise_norms=norms)


def loss_and_grad(logits, target, loss_kind: LossKind,
                  output_activation: Activation = Activation.LINEAR) -> tuple[float, np.ndarray]:
    """Loss over a batch and its gradient w.r.t. the output pre-activation.

    MSE averages over every output element of the activated output.
    Softmax cross-entropy works on the logits directly (log-sum-exp),
    averaged over the batch; its gradient is (softmax - target) / B.
    """
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    t = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if z.shape != t.shape:
        raise InvalidInputError(f"output {z.shape} and target {t.shape} differ")
    batch = z.shape[0]
    if LossKind(loss_kind) is LossKind.SOFTMAX_CROSS_ENTROPY:
        shifted = z - z.max(axis=1, keepdims=True)
        log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = float(-np.sum(t * log_p) / batch)
        return loss, (np.exp(log_p) - t) / batch
    out = activate(z, output_activation)
    err = out - t
    loss = float(np.mean(err * err))
    d_out = 2.0 * err / err.size
    return loss, activation_backward(z, out, output_activation, d_out)


def backward(mlp: Mlp, cache: ForwardCache, d_logits) -> Gradients:
    """Exact gradients of the forward chain; the additive noise passes through."""
    dz = np.atleast_2d(np.asarray(d_logits, dtype=np.float64))
    noise = mlp.spec.noise_layer
    n = mlp.spec.num_layers
    d_w: list[np.ndarray] = [None] * n
    d_b: list[np.ndarray] = [None] * n
    for i in range(n - 1, -1, -1):
        d_w[i] = cache.inputs[i].T @ dz
        d_b[i] = dz.sum(axis=0)
        if i == 0:
            break
        da = dz @ mlp.weights[i].T
        prev = mlp.spec.activations[i - 1]
        z_prev = cache.pre_activations[i - 1]
        a_prev = activate(z_prev, prev)
        if noise is not None and i == noise.position and noise.normalize_energy:
            # d/dx of sqrt(d) x / |x| removes the radial component
            x_hat = a_prev / cache.noise_norms
            da = math.sqrt(a_prev.shape[1]) / cache.noise_norms * (
                da - x_hat * np.sum(x_hat * da, axis=1, keepdims=True))
        dz = activation_backward(z_prev, a_prev, prev, da)
    return Gradients(weights=d_w, biases=d_b)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0
    batch_size: int = 32
    num_iterations: int = 1000
    loss: LossKind = LossKind.MSE
    seed: int = 0
    validation_interval: int = 100

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        if not self.learning_rate > 0:
            raise InvalidInputError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidInputError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise InvalidInputError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise InvalidInputError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.num_iterations < 0:
            raise InvalidInputError(f"num_iterations must be >= 0, got {self.num_iterations}")
        if self.validation_interval < 1:
            raise InvalidInputError(f"validation_interval must be >= 1, got {self.validation_interval}")


def sgd_momentum_step(mlp: Mlp, grads: Gradients, velocity: VelocityState,
                      cfg: TrainConfig) -> tuple[Mlp, VelocityState]:
    """v <- mu v - lr (g + wd W); W <- W + v. Biases get no weight decay.

    Parameters and velocity are updated in place and returned.
    """
    lr, mu, wd = cfg.learning_rate, cfg.momentum, cfg.weight_decay
    for i in range(mlp.spec.num_layers):
        vw, vb = velocity.weights[i], velocity.biases[i]
        vw *= mu
        vw -= lr * (grads.weights[i] + wd * mlp.weights[i])
        vb *= mu
        vb -= lr * grads.biases[i]
        mlp.weights[i] += vw
        mlp.biases[i] += vb
    return mlp, velocity


@dataclass
class TrainResult:
    mlp: Mlp
    loss_history: np.ndarray                   # one entry per iteration
    validation_history: list[tuple[int, float]]  # (iteration, loss)

    @property
    def final_loss(self) -> float:
        return float(self.loss_history[-1]) if self.loss_history.size else float("nan")


def evaluate_loss(mlp: Mlp, x, y, loss_kind: LossKind) -> float:
    cache = forward(mlp, x)
    loss, _ = loss_and_grad(cache.logits, y, loss_kind, mlp.spec.activations[-1])
    return loss


def train(mlp: Mlp, dataset: Dataset, cfg: TrainConfig, progress: bool = False) -> TrainResult:
    """Mini-batch SGD with momentum on the TRAIN split of a copy of mlp.

    Batches come from a seeded reshuffle per epoch; the validation loss
    (noise-free) is recorded every cfg.validation_interval iterations when
    the dataset has a VALIDATION split.
    """
    net = mlp.copy()
    x_tr, y_tr = dataset.subset(SplitTag.TRAIN)
    x_va, y_va = dataset.subset(SplitTag.VALIDATION)
    if x_tr.shape[0] == 0:
        raise InvalidInputError("dataset has no training rows")
    if x_tr.shape[1] != net.spec.input_dim or y_tr.shape[1] != net.spec.output_dim:
        raise InvalidInputError(
            f"dataset {x_tr.shape[1]}->{y_tr.shape[1]} does not fit network "
            f"{net.spec.input_dim}->{net.spec.output_dim}")

    rng = np.random.default_rng(cfg.seed)
    velocity = VelocityState.zeros_like(net)
    out_act = net.spec.activations[-1]
    n = x_tr.shape[0]
    bs = min(cfg.batch_size, n)
    perm = rng.permutation(n)
    cursor = 0
    history = np.empty(cfg.num_iterations)
    validation: list[tuple[int, float]] = []

    logger.info("training %s on %d rows: %d iterations, batch %d, lr %g, momentum %g",
                net.spec.layer_sizes, n, cfg.num_iterations, bs, cfg.learning_rate, cfg.momentum)
    bar = tqdm(range(cfg.num_iterations), desc="train", disable=not progress, leave=False)
    for it in bar:
        if cursor + bs > n:
            perm = rng.permutation(n)
            cursor = 0
        idx = perm[cursor:cursor + bs]
        cursor += bs
        cache = forward(net, x_tr[idx], rng=rng, training=True)
        loss, dz = loss_and_grad(cache.logits, y_tr[idx], cfg.loss, out_act)
        if not math.isfinite(loss):
            raise TrainingDivergedError(it, loss)
        history[it] = loss
        sgd_momentum_step(net, backward(net, cache, dz), velocity, cfg)

        if x_va.shape[0] and (it + 1) % cfg.validation_interval == 0:
            val = evaluate_loss(net, x_va, y_va, cfg.loss)
            validation.append((it + 1, val))
            bar.set_postfix(loss=f"{loss:.4g}", val=f"{val:.4g}")
            logger.debug("iteration %d: train loss %.6g, validation loss %.6g", it + 1, loss, val)

    result = TrainResult(mlp=net, loss_history=history, validation_history=validation)
    logger.info("training done: final loss %.6g", result.final_loss)
    return result


@dataclass(frozen=True)
class LayerGradError:
    layer: int
    weight_max_rel: float
    bias_max_rel: float


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    layers: tuple[LayerGradError, ...]

    def passed(self, tol: float = GRADCHECK_TOL) -> bool:
        return self.max_rel_error <= tol


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    floor = np.full(np.shape(analytic), GRADCHECK_FLOOR)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def gradient_check(mlp: Mlp, sample, loss_kind: LossKind, step: float = GRADCHECK_STEP) -> GradCheckReport:
    """Compare backward() against central differences on every parameter.

    sample is (input, target); the network runs in evaluation mode, so a
    noise layer contributes only its energy normalization.
    """
    x, t = sample
    out_act = mlp.spec.activations[-1]
    cache = forward(mlp, x)
    _, dz = loss_and_grad(cache.logits, t, loss_kind, out_act)
    grads = backward(mlp, cache, dz)

    perturbed = mlp.copy()

    def _loss() -> float:
        return loss_and_grad(forward(perturbed, x).logits, t, loss_kind, out_act)[0]

    layers = []
    for i in range(mlp.spec.num_layers):
        errs = []
        pairs = ((perturbed.weights[i], grads.weights[i]), (perturbed.biases[i], grads.biases[i]))
        for param, analytic in pairs:
            numeric = np.empty_like(param)
            for idx in np.ndindex(param.shape):
                orig = param[idx]
                param[idx] = orig + step
                up = _loss()
                param[idx] = orig - step
                down = _loss()
                param[idx] = orig
                numeric[idx] = (up - down) / (2.0 * step)
            errs.append(float(relative_error(analytic, numeric).max()))
        layers.append(LayerGradError(layer=i, weight_max_rel=errs[0], bias_max_rel=errs[1]))
    worst = max(max(e.weight_max_rel, e.bias_max_rel) for e in layers)
    return GradCheckReport(max_rel_error=worst, layers=tuple(layers))


def _signed_sample(rng: np.random.Generator, dim: int) -> np.ndarray:
    # magnitudes kept away from zero so no parameter has a vanishing gradient
    return rng.choice([-1.0, 1.0], dim) * rng.uniform(0.5, 1.5, dim)


def gradcheck_cases(seed: int = 0) -> list[tuple[str, Mlp, tuple, LossKind]]:
    """Small seeded networks covering every activation/loss combination."""
    rng = np.random.default_rng(seed)
    relu, tanh = Activation.RELU, Activation.TANH
    linear, smax = Activation.LINEAR, Activation.SOFTMAX
    mse, sce = LossKind.MSE, LossKind.SOFTMAX_CROSS_ENTROPY
    layouts = [
        ("tanh/linear/mse", (4, 6, 5, 3), tanh, linear, mse, None),
        ("relu/linear/mse", (4, 8, 6, 2), relu, linear, mse, None),
        ("tanh/tanh/mse", (3, 5, 4, 2), tanh, tanh, mse, None),
        ("tanh/softmax/mse", (4, 6, 3), tanh, smax, mse, None),
        ("tanh/softmax/xent", (4, 6, 5, 3), tanh, smax, sce, None),
        ("relu/softmax/xent", (5, 7, 4), relu, smax, sce, None),
        ("tanh/noise/softmax/xent", (5, 6, 4, 6, 3), tanh, smax, sce,
         NoiseLayerSpec(position=2, normalize_energy=True)),
    ]
    cases = []
    for name, sizes, hidden, out, loss, noise in layouts:
        spec = MlpSpec.dense(sizes[0], sizes[1:-1], sizes[-1], hidden, out, noise)
        mlp = init_xavier(spec, int(rng.integers(2**31)))
        x = _signed_sample(rng, sizes[0])
        if out is smax:
            target = np.eye(sizes[-1])[rng.integers(sizes[-1])]
        elif out is tanh:
            target = rng.uniform(-0.9, 0.9, sizes[-1])
        else:
            target = rng.standard_normal(sizes[-1]) * 2.0
        cases.append((name, mlp, (x[None, :], target[None, :]), loss))
    return cases
