# Save and load trained networks as .phyn checkpoints (bit-exact).

import logging
from pathlib import Path

from .errors import FileFormatError
from .fileformat import (CKPT_HDR_SIZE, F8, LAYER_SIZE, NO_NOISE_LAYER, CheckpointHeader,
                         LayerDescriptor, NoiseFlag, expect_eof, read_array, read_exact, write_array)
from .nn import Activation, Mlp, MlpSpec, NoiseLayerSpec

logger = logging.getLogger(__name__)


def _header(spec: MlpSpec) -> CheckpointHeader:
    noise = spec.noise_layer
    if noise is None:
        return CheckpointHeader(num_layers=spec.num_layers)
    flags = NoiseFlag.NONE
    if noise.normalize_energy:
        flags |= NoiseFlag.NORMALIZE_ENERGY
    if noise.per_example:
        flags |= NoiseFlag.PER_EXAMPLE
    lo, hi = noise.snr_db_range
    return CheckpointHeader(num_layers=spec.num_layers, noise_position=noise.position,
                            noise_flags=flags, snr_low_db=lo, snr_high_db=hi)


def save_checkpoint(mlp: Mlp, path) -> Path:
    path = Path(path)
    spec = mlp.spec
    with open(path, "wb") as f:
        f.write(_header(spec).pack())
        for act, w in zip(spec.activations, mlp.weights):
            f.write(LayerDescriptor(activation=int(act), fan_in=w.shape[0], fan_out=w.shape[1]).pack())
        for w, b in zip(mlp.weights, mlp.biases):
            write_array(f, w, F8)
            write_array(f, b, F8)
    logger.info("wrote checkpoint %s (%d parameters)", path, mlp.num_parameters)
    return path


def load_checkpoint(path) -> Mlp:
    with open(path, "rb") as f:
        hdr = CheckpointHeader.unpack(read_exact(f, CKPT_HDR_SIZE, "checkpoint header"))
        if hdr.num_layers < 1:
            raise FileFormatError("checkpoint has no layers")
        layers = [LayerDescriptor.unpack(read_exact(f, LAYER_SIZE, f"layer descriptor {i}"))
                  for i in range(hdr.num_layers)]
        for i, (a, b) in enumerate(zip(layers, layers[1:])):
            if a.fan_out != b.fan_in:
                raise FileFormatError(f"layer {i} fan_out {a.fan_out} != layer {i + 1} fan_in {b.fan_in}")
        try:
            acts = tuple(Activation(d.activation) for d in layers)
        except ValueError as exc:
            raise FileFormatError(f"unknown activation code: {exc}") from exc
        weights, biases = [], []
        for i, d in enumerate(layers):
            weights.append(read_array(f, F8, (d.fan_in, d.fan_out), f"layer {i} weights"))
            biases.append(read_array(f, F8, (d.fan_out,), f"layer {i} bias"))
        expect_eof(f, "checkpoint parameters")

    noise = None
    if hdr.noise_position != NO_NOISE_LAYER:
        noise = NoiseLayerSpec(position=hdr.noise_position,
                               normalize_energy=bool(hdr.noise_flags & NoiseFlag.NORMALIZE_ENERGY),
                               snr_db_range=(hdr.snr_low_db, hdr.snr_high_db),
                               per_example=bool(hdr.noise_flags & NoiseFlag.PER_EXAMPLE))
    sizes = (layers[0].fan_in, *(d.fan_out for d in layers))
    spec = MlpSpec(layer_sizes=sizes, activations=acts, noise_layer=noise)
    return Mlp(spec=spec, weights=weights, biases=biases)
