"""Model bundles: a config JSON plus a weight container.

Record names follow :meth:`Transformer.linears` (``encoder.0.self_attn.q``,
``decoder.1.ffn2``, ...). A linear layer's bias lives in ``<name>.bias``,
layer norms in ``<name>.gain`` / ``<name>.bias``, and the token
embedding in ``embedding``.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import bcm
from .container import WeightContainer, atomic_write
from .errors import ContainerError, ShapeError
from .nn import (
    AttentionWeights,
    DecoderLayerWeights,
    EncoderLayerWeights,
    LinearWeight,
    Norm,
    Transformer,
    TransformerConfig,
)
from .quant import QuantizedBcm

EMBEDDING = "embedding"


def linear_names(config: TransformerConfig, output_proj=False):
    names = []
    for i in range(config.num_layers):
        names += [f"encoder.{i}.self_attn.{k}" for k in "qkvo"]
        names += [f"encoder.{i}.ffn1", f"encoder.{i}.ffn2"]
    if config.has_decoder:
        for i in range(config.num_layers):
            names += [f"decoder.{i}.self_attn.{k}" for k in "qkvo"]
            names += [f"decoder.{i}.cross_attn.{k}" for k in "qkvo"]
            names += [f"decoder.{i}.ffn1", f"decoder.{i}.ffn2"]
    if output_proj:
        names.append("output_proj")
    return names


def load_config(path) -> TransformerConfig:
    with open(path) as fh:
        return TransformerConfig.from_dict(json.load(fh))


def save_config(config: TransformerConfig, path):
    atomic_write(path, json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


def model_to_container(model: Transformer) -> WeightContainer:
    c = WeightContainer()
    c.put(EMBEDDING, np.asarray(model.embedding))
    for name, w in model.linears():
        c.put(name, w.weight)
        if w.bias is not None:
            c.put(f"{name}.bias", w.bias)
    for name, norm in model.norms():
        c.put(f"{name}.gain", norm.gain)
        c.put(f"{name}.bias", norm.bias)
    return c


def save_model(model: Transformer, config_path, weights_path):
    save_config(model.config, config_path)
    model_to_container(model).write(weights_path)


def model_from_container(config: TransformerConfig, c: WeightContainer, positional=True) -> Transformer:
    """Assemble a model, checking each layer's logical shape against the config."""
    d, dff = config.d_model, config.d_ffn

    def vec(name, size):
        v = c.get(name)
        if v.shape != (1, size):
            raise ShapeError(f"{name}: expected length {size}, got shape {v.shape}")
        return v[0]

    def lin(name, m, n):
        w = c.get(name)
        if tuple(w.shape) != (m, n):
            raise ShapeError(f"{name}: expected logical shape {(m, n)}, got {tuple(w.shape)}")
        bias = vec(f"{name}.bias", m) if f"{name}.bias" in c else None
        return LinearWeight(w, bias)

    def attn(prefix):
        return AttentionWeights(*(lin(f"{prefix}.{k}", d, d) for k in "qkvo"))

    def norm(name):
        return Norm(vec(f"{name}.gain", d), vec(f"{name}.bias", d))

    enc = [
        EncoderLayerWeights(
            attn(f"encoder.{i}.self_attn"),
            lin(f"encoder.{i}.ffn1", dff, d),
            lin(f"encoder.{i}.ffn2", d, dff),
            norm(f"encoder.{i}.norm1"),
            norm(f"encoder.{i}.norm2"),
        )
        for i in range(config.num_layers)
    ]
    dec = []
    if config.has_decoder:
        dec = [
            DecoderLayerWeights(
                attn(f"decoder.{i}.self_attn"),
                attn(f"decoder.{i}.cross_attn"),
                lin(f"decoder.{i}.ffn1", dff, d),
                lin(f"decoder.{i}.ffn2", d, dff),
                norm(f"decoder.{i}.norm1"),
                norm(f"decoder.{i}.norm2"),
                norm(f"decoder.{i}.norm3"),
            )
            for i in range(config.num_layers)
        ]
    out = lin("output_proj", config.vocab_size, d) if "output_proj" in c else None
    if EMBEDDING not in c:
        raise ContainerError("weight file has no embedding record")
    embedding = c.dense_view(EMBEDDING)
    return Transformer(config, embedding, enc, dec, out, positional)


def load_model(config_path, weights_path, positional=True) -> Transformer:
    return model_from_container(load_config(config_path), WeightContainer.read(weights_path), positional)


@dataclass(frozen=True)
class ManifestEntry:
    kind: str
    shape: tuple
    block_size: int = None
    mode: str = None
    frac_bits: int = None
    ratio: float = 1.0


def manifest(c: WeightContainer, config: TransformerConfig):
    """Per linear layer: storage kind, block size/mode and compression ratio."""
    out = {}
    for name in linear_names(config, "output_proj" in c):
        w = c.get(name)
        if isinstance(w, QuantizedBcm):
            M = w.dequantize()
            out[name] = ManifestEntry("quant-bcm", w.shape, w.b, w.mode.name, w.index.frac_bits, bcm.compression_ratio(M))
        elif isinstance(w, bcm.BlockCirculantMatrix):
            out[name] = ManifestEntry("bcm", w.shape, w.b, w.mode.name, None, bcm.compression_ratio(w))
        elif hasattr(w, "frac_bits"):
            out[name] = ManifestEntry("quant-dense", w.shape, frac_bits=w.frac_bits)
        else:
            out[name] = ManifestEntry("dense", w.shape)
    return out
