"""Reference transformer forward pass over dense or block-circulant weights.

Activations are ``(seq_len, d_model)`` row-major arrays. Linear layers
hold an ``out x in`` weight and compute ``x @ W.T + bias``; whether ``W``
is dense, block-circulant or fixed-point is hidden behind
:class:`LinearWeight`.
"""

import enum
import math
from dataclasses import dataclass, fields, replace
from typing import Optional, Sequence

import numpy as np

from . import bcm
from .bcm import BlockCirculantMatrix
from .errors import DomainError, ShapeError
from .quant import QuantizedBcm, QuantizedTensor, dequantize, fake_quant, quantize, choose_format, quantize_bcm

__all__ = [
    "Structure",
    "TransformerConfig",
    "SoftmaxImpl",
    "AttentionMask",
    "LinearWeight",
    "AttentionWeights",
    "EncoderLayerWeights",
    "DecoderLayerWeights",
    "Transformer",
    "softmax",
    "scaled_dot_product_attention",
    "multi_head_attention",
    "layer_norm",
    "feed_forward",
    "positional_encoding",
    "encoder_layer",
    "decoder_layer",
]

LAYER_NORM_EPS = 1e-5


class Structure(str, enum.Enum):
    ENCODER_DECODER = "encoder-decoder"
    ENCODER_ONLY = "encoder-only"


@dataclass(frozen=True)
class TransformerConfig:
    num_layers: int
    d_model: int
    num_heads: int
    d_ffn: int
    vocab_size: int
    structure: Structure = Structure.ENCODER_DECODER
    max_seq_len: int = 512

    def __post_init__(self):
        object.__setattr__(self, "structure", Structure(self.structure))
        if self.num_heads < 1 or self.d_model % self.num_heads:
            raise DomainError(
                f"d_model={self.d_model} is not divisible by num_heads={self.num_heads}"
            )
        for name in ("d_model", "d_ffn", "vocab_size", "max_seq_len"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be positive")
        if self.num_layers < 0:
            raise DomainError("num_layers must be >= 0")

    @property
    def d_k(self) -> int:
        return self.d_model // self.num_heads

    @property
    def d_v(self) -> int:
        return self.d_model // self.num_heads

    @property
    def has_decoder(self) -> bool:
        return self.structure is Structure.ENCODER_DECODER

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["structure"] = self.structure.value
        d["d_k"] = self.d_k
        d["d_v"] = self.d_v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TransformerConfig":
        known = {f.name for f in fields(cls)}
        cfg = cls(**{k: v for k, v in d.items() if k in known})
        for key in ("d_k", "d_v"):
            if key in d and d[key] != getattr(cfg, key):
                raise DomainError(f"{key}={d[key]} disagrees with d_model/num_heads={cfg.d_k}")
        return cfg

    @classmethod
    def preset(cls, name: str) -> "TransformerConfig":
        try:
            return PRESETS[name]
        except KeyError:
            raise DomainError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


PRESETS = {
    # 2 layers, hidden 200, 4 heads, WikiText-2 vocabulary
    "shallow": TransformerConfig(2, 200, 4, 800, 33278, Structure.ENCODER_DECODER, 256),
    # 12 layers, hidden 768, 12 heads, encoder only
    "roberta-base": TransformerConfig(12, 768, 12, 3072, 50265, Structure.ENCODER_ONLY, 512),
    "micro": TransformerConfig(2, 16, 2, 32, 64, Structure.ENCODER_DECODER, 32),
}


@dataclass(frozen=True)
class SoftmaxImpl:
    """Exact softmax, or softmax with ``exp`` replaced by a piecewise-linear interpolant.

    The interpolant uses ``segments`` uniform pieces on ``clamp_range``;
    shifted scores below the range are clamped to its lower end.
    """

    mode: str = "exact"
    segments: int = 32
    clamp_range: tuple = (-8.0, 0.0)

    def __post_init__(self):
        if self.mode not in ("exact", "pwl"):
            raise DomainError(f"softmax mode must be 'exact' or 'pwl', got {self.mode!r}")
        lo, hi = self.clamp_range
        if self.segments < 2 or not lo < hi:
            raise DomainError("pwl softmax needs segments >= 2 and lo < hi")

    @classmethod
    def pwl(cls, segments=32, clamp_range=(-8.0, 0.0)):
        return cls("pwl", segments, tuple(clamp_range))

    @property
    def breakpoints(self) -> np.ndarray:
        lo, hi = self.clamp_range
        return np.linspace(lo, hi, self.segments + 1)

    def exp(self, z):
        if self.mode == "exact":
            return np.exp(z)
        bp = self.breakpoints
        return np.interp(z, bp, np.exp(bp))


EXACT = SoftmaxImpl()


def softmax(x, impl: SoftmaxImpl = EXACT, axis=-1):
    """Softmax along ``axis`` after subtracting the row maximum.

    ``-inf`` entries get probability exactly zero under both
    implementations. The piecewise-linear variant renormalises its
    approximate exponentials so rows still sum to one.
    """
    x = np.asarray(x)
    x = x.astype(np.result_type(x.dtype, np.float32), copy=False)
    if x.size == 0 or x.shape[axis] == 0:
        raise DomainError("softmax of an empty input")
    top = np.max(x, axis=axis, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise DomainError("softmax row has no finite entries")
    z = x - top
    visible = np.isfinite(z)
    e = np.where(visible, impl.exp(np.where(visible, z, 0.0)), 0.0).astype(x.dtype, copy=False)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass(frozen=True)
class AttentionMask:
    """Which key positions each query may attend to.

    ``explicit`` is a boolean ``(s_q, s_k)`` matrix with True marking
    visible positions; it is combined with the causal rule when both are set.
    """

    causal: bool = False
    explicit: Optional[np.ndarray] = None

    def visible(self, s_q: int, s_k: int) -> Optional[np.ndarray]:
        vis = None
        if self.causal:
            vis = np.tri(s_q, s_k, dtype=bool)
        if self.explicit is not None:
            ex = np.asarray(self.explicit, dtype=bool)
            if ex.shape != (s_q, s_k):
                raise ShapeError(f"mask shape {ex.shape} does not match scores {(s_q, s_k)}")
            vis = ex if vis is None else vis & ex
        return vis


NO_MASK = AttentionMask()
CAUSAL = AttentionMask(causal=True)


@dataclass(frozen=True, eq=False)
class LinearWeight:
    """One fully connected layer; ``weight`` may be any supported kind."""

    weight: object
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        w = self.weight
        if isinstance(w, (BlockCirculantMatrix, QuantizedTensor, QuantizedBcm)):
            pass
        else:
            w = np.asarray(w, dtype=np.float64)
            if w.ndim != 2:
                raise ShapeError("dense weight must be rank 2")
            object.__setattr__(self, "weight", w)
        if self.bias is not None:
            b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
            if b.shape[0] != self.shape[0]:
                raise ShapeError(f"bias length {b.shape[0]} != out features {self.shape[0]}")
            object.__setattr__(self, "bias", b)

    @property
    def kind(self) -> str:
        w = self.weight
        if isinstance(w, BlockCirculantMatrix):
            return "bcm"
        if isinstance(w, QuantizedBcm):
            return "quant-bcm"
        if isinstance(w, QuantizedTensor):
            return "quant-dense"
        return "dense"

    @property
    def shape(self):
        return tuple(self.weight.shape)

    def dense(self) -> np.ndarray:
        w = self.weight
        if isinstance(w, BlockCirculantMatrix):
            return bcm.expand(w)
        if isinstance(w, QuantizedBcm):
            return bcm.expand(w.dequantize())
        if isinstance(w, QuantizedTensor):
            return dequantize(w)
        return w

    def __call__(self, x):
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.shape[1]:
            raise ShapeError(f"linear layer expects (s, {self.shape[1]}) input, got {x.shape}")
        w = self.weight
        if isinstance(w, QuantizedBcm):
            w = w.dequantize()
        elif isinstance(w, QuantizedTensor):
            w = dequantize(w)
        if isinstance(w, BlockCirculantMatrix):
            y = bcm.matmul(w, x.T).T
        else:
            y = x @ w.T.astype(x.dtype, copy=False)
        if self.bias is not None:
            y = y + self.bias.astype(y.dtype, copy=False)
        return y

    def quantized(self) -> "LinearWeight":
        """Copy with weight and bias rounded to 16-bit fixed point."""
        w = self.weight
        if isinstance(w, BlockCirculantMatrix):
            w = quantize_bcm(w)
        elif isinstance(w, np.ndarray):
            w = quantize(w, choose_format(w))
        bias = None if self.bias is None else fake_quant(self.bias)
        return LinearWeight(w, bias)


def _as_linear(w) -> LinearWeight:
    return w if isinstance(w, LinearWeight) else LinearWeight(w)


@dataclass(frozen=True)
class _Ctx:
    impl: SoftmaxImpl = EXACT
    dtype: type = np.float64
    act_quant: bool = False

    def linear(self, w: LinearWeight, x):
        if self.act_quant:
            x = fake_quant(x)
        return w(x).astype(self.dtype, copy=False)


_DEFAULT_CTX = _Ctx()


def scaled_dot_product_attention(Q, K, V, mask: AttentionMask = NO_MASK, impl: SoftmaxImpl = EXACT):
    """``softmax(Q K^T / sqrt(d_k)) V`` with masked scores set to ``-inf``."""
    Q, K, V = (np.asarray(a) for a in (Q, K, V))
    if Q.ndim != 2 or K.ndim != 2 or V.ndim != 2:
        raise ShapeError("attention operands must be rank 2")
    if Q.shape[1] != K.shape[1] or K.shape[0] != V.shape[0]:
        raise ShapeError(f"incompatible shapes Q{Q.shape} K{K.shape} V{V.shape}")
    scores = (Q @ K.T) / math.sqrt(Q.shape[1])
    vis = (mask or NO_MASK).visible(Q.shape[0], K.shape[0])
    if vis is not None:
        scores = np.where(vis, scores, -np.inf)
    return softmax(scores, impl) @ V


@dataclass(frozen=True, eq=False)
class AttentionWeights:
    """Fused projections; head ``i`` uses rows ``i*d_k:(i+1)*d_k`` of q, k and v."""

    q: LinearWeight
    k: LinearWeight
    v: LinearWeight
    o: LinearWeight

    def items(self):
        return (("q", self.q), ("k", self.k), ("v", self.v), ("o", self.o))

    def map(self, fn) -> "AttentionWeights":
        return AttentionWeights(*(fn(w) for _, w in self.items()))


def multi_head_attention(
    x_q,
    x_kv,
    weights: AttentionWeights,
    num_heads: int,
    mask: AttentionMask = NO_MASK,
    impl: SoftmaxImpl = EXACT,
    _ctx: _Ctx = None,
):
    """``Concat(Head_1..Head_h) W^O`` where each head attends over ``x_kv``."""
    ctx = _ctx or replace(_DEFAULT_CTX, impl=impl)
    x_q, x_kv = np.asarray(x_q), np.asarray(x_kv)
    if x_q.ndim != 2 or x_kv.ndim != 2:
        raise ShapeError("attention inputs must be rank 2")
    d_qk = weights.q.shape[0]
    d_v = weights.v.shape[0]
    if weights.k.shape[0] != d_qk or d_qk % num_heads or d_v % num_heads:
        raise ShapeError(f"projection widths {d_qk}/{d_v} do not split into {num_heads} heads")
    if weights.o.shape[1] != d_v:
        raise ShapeError(f"output projection expects {weights.o.shape[1]} inputs, heads give {d_v}")
    Q = ctx.linear(weights.q, x_q)
    K = ctx.linear(weights.k, x_kv)
    V = ctx.linear(weights.v, x_kv)
    dk, dv = d_qk // num_heads, d_v // num_heads
    heads = [
        scaled_dot_product_attention(
            Q[:, i * dk : (i + 1) * dk],
            K[:, i * dk : (i + 1) * dk],
            V[:, i * dv : (i + 1) * dv],
            mask,
            ctx.impl,
        )
        for i in range(num_heads)
    ]
    return ctx.linear(weights.o, np.concatenate(heads, axis=1))


def layer_norm(x, gain, bias, eps: float = LAYER_NORM_EPS):
    x = np.asarray(x)
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * gain + bias


def feed_forward(x, w1: LinearWeight, w2: LinearWeight, _ctx: _Ctx = None):
    ctx = _ctx or _DEFAULT_CTX
    w1, w2 = _as_linear(w1), _as_linear(w2)
    if w2.shape[1] != w1.shape[0]:
        raise ShapeError(f"ffn inner widths differ: {w1.shape} vs {w2.shape}")
    return ctx.linear(w2, np.maximum(ctx.linear(w1, x), 0.0))


def positional_encoding(seq_len: int, d_model: int) -> np.ndarray:
    """Fixed sinusoidal encoding, sin on even and cos on odd feature indices."""
    pos = np.arange(seq_len)[:, None]
    i = np.arange(d_model)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d_model)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


@dataclass(frozen=True, eq=False)
class Norm:
    gain: np.ndarray
    bias: np.ndarray

    @classmethod
    def identity(cls, d):
        return cls(np.ones(d), np.zeros(d))

    def __call__(self, x):
        return layer_norm(x, self.gain.astype(x.dtype), self.bias.astype(x.dtype))


@dataclass(frozen=True, eq=False)
class EncoderLayerWeights:
    self_attn: AttentionWeights
    ffn1: LinearWeight
    ffn2: LinearWeight
    norm1: Norm
    norm2: Norm


@dataclass(frozen=True, eq=False)
class DecoderLayerWeights:
    self_attn: AttentionWeights
    cross_attn: AttentionWeights
    ffn1: LinearWeight
    ffn2: LinearWeight
    norm1: Norm
    norm2: Norm
    norm3: Norm


def encoder_layer(x, w: EncoderLayerWeights, num_heads: int, mask=NO_MASK, impl=EXACT, _ctx=None):
    """Post-norm encoder layer: self-attention then FFN, each with residual + norm."""
    ctx = _ctx or replace(_DEFAULT_CTX, impl=impl)
    x = w.norm1(x + multi_head_attention(x, x, w.self_attn, num_heads, mask, _ctx=ctx))
    return w.norm2(x + feed_forward(x, w.ffn1, w.ffn2, _ctx=ctx))


def decoder_layer(x, memory, w: DecoderLayerWeights, num_heads: int, impl=EXACT, _ctx=None):
    """Masked self-attention, attention over ``memory``, then FFN."""
    ctx = _ctx or replace(_DEFAULT_CTX, impl=impl)
    x = w.norm1(x + multi_head_attention(x, x, w.self_attn, num_heads, CAUSAL, _ctx=ctx))
    x = w.norm2(x + multi_head_attention(x, memory, w.cross_attn, num_heads, NO_MASK, _ctx=ctx))
    return w.norm3(x + feed_forward(x, w.ffn1, w.ffn2, _ctx=ctx))


PRECISIONS = {"f64": np.float64, "f32": np.float32, "q16": np.float64}


@dataclass(frozen=True, eq=False)
class Transformer:
    """Weights plus config; ``embedding`` is any array indexable by token ids.

    ``output_proj`` maps hidden states to logits; when absent the
    embedding matrix is reused (tied weights).
    """

    config: TransformerConfig
    embedding: object
    encoder: Sequence[EncoderLayerWeights]
    decoder: Sequence[DecoderLayerWeights] = ()
    output_proj: Optional[LinearWeight] = None
    positional: bool = True

    def __post_init__(self):
        cfg = self.config
        if len(self.encoder) != cfg.num_layers:
            raise ShapeError(f"expected {cfg.num_layers} encoder layers, got {len(self.encoder)}")
        want_dec = cfg.num_layers if cfg.has_decoder else 0
        if len(self.decoder) != want_dec:
            raise ShapeError(f"expected {want_dec} decoder layers, got {len(self.decoder)}")
        if tuple(self.embedding.shape) != (cfg.vocab_size, cfg.d_model):
            raise ShapeError(f"embedding shape {self.embedding.shape} != {(cfg.vocab_size, cfg.d_model)}")

    def _check_tokens(self, tokens):
        ids = np.asarray(tokens, dtype=np.int64).reshape(-1)
        if ids.size == 0:
            raise DomainError("token sequence is empty")
        if ids.size > self.config.max_seq_len:
            raise DomainError(f"sequence length {ids.size} exceeds max_seq_len {self.config.max_seq_len}")
        bad = (ids < 0) | (ids >= self.config.vocab_size)
        if bad.any():
            raise DomainError(f"token id {int(ids[bad][0])} outside vocabulary of {self.config.vocab_size}")
        return ids

    def embed(self, tokens, dtype=np.float64):
        ids = self._check_tokens(tokens)
        x = np.asarray(self.embedding[ids], dtype=dtype)
        if self.positional:
            x = x + positional_encoding(ids.size, self.config.d_model).astype(dtype)
        return x

    def _ctx(self, impl, precision):
        if precision not in PRECISIONS:
            raise DomainError(f"precision must be one of {sorted(PRECISIONS)}, got {precision!r}")
        return _Ctx(impl or EXACT, PRECISIONS[precision], precision == "q16")

    def encode(self, tokens, impl=None, precision="f64", mask=NO_MASK):
        ctx = self._ctx(impl, precision)
        x = self.embed(tokens, ctx.dtype)
        for layer in self.encoder:
            x = encoder_layer(x, layer, self.config.num_heads, mask, _ctx=ctx)
        return x

    def decode(self, tokens, memory, impl=None, precision="f64"):
        ctx = self._ctx(impl, precision)
        x = self.embed(tokens, ctx.dtype)
        memory = np.asarray(memory, dtype=ctx.dtype)
        for layer in self.decoder:
            x = decoder_layer(x, memory, layer, self.config.num_heads, _ctx=ctx)
        return x

    def forward(self, tokens, target=None, impl=None, precision="f64", logits=False):
        """Hidden states of the last stack, or logits when ``logits`` is set.

        Encoder-decoder models feed ``target`` (default: ``tokens``) to the
        decoder and attend over the encoding of ``tokens``.
        """
        model = self.quantized() if precision == "q16" else self
        h = model.encode(tokens, impl, precision)
        if self.config.has_decoder:
            h = model.decode(tokens if target is None else target, h, impl, precision)
        if logits:
            if model.output_proj is not None:
                return model.output_proj(h)
            return h @ np.asarray(model.embedding, dtype=h.dtype).T
        return h

    def linears(self):
        """Yield ``(name, LinearWeight)`` for every fully connected layer."""
        for i, layer in enumerate(self.encoder):
            for k, w in layer.self_attn.items():
                yield f"encoder.{i}.self_attn.{k}", w
            yield f"encoder.{i}.ffn1", layer.ffn1
            yield f"encoder.{i}.ffn2", layer.ffn2
        for i, layer in enumerate(self.decoder):
            for k, w in layer.self_attn.items():
                yield f"decoder.{i}.self_attn.{k}", w
            for k, w in layer.cross_attn.items():
                yield f"decoder.{i}.cross_attn.{k}", w
            yield f"decoder.{i}.ffn1", layer.ffn1
            yield f"decoder.{i}.ffn2", layer.ffn2
        if self.output_proj is not None:
            yield "output_proj", self.output_proj

    def norms(self):
        for i, layer in enumerate(self.encoder):
            yield f"encoder.{i}.norm1", layer.norm1
            yield f"encoder.{i}.norm2", layer.norm2
        for i, layer in enumerate(self.decoder):
            for k in ("norm1", "norm2", "norm3"):
                yield f"decoder.{i}.{k}", getattr(layer, k)

    def map_linears(self, fn) -> "Transformer":
        """New model with ``fn(name, weight)`` applied to every linear layer."""
        enc = [
            EncoderLayerWeights(
                layer.self_attn.map(_named(fn, f"encoder.{i}.self_attn")),
                fn(f"encoder.{i}.ffn1", layer.ffn1),
                fn(f"encoder.{i}.ffn2", layer.ffn2),
                layer.norm1,
                layer.norm2,
            )
            for i, layer in enumerate(self.encoder)
        ]
        dec = [
            DecoderLayerWeights(
                layer.self_attn.map(_named(fn, f"decoder.{i}.self_attn")),
                layer.cross_attn.map(_named(fn, f"decoder.{i}.cross_attn")),
                fn(f"decoder.{i}.ffn1", layer.ffn1),
                fn(f"decoder.{i}.ffn2", layer.ffn2),
                layer.norm1,
                layer.norm2,
                layer.norm3,
            )
            for i, layer in enumerate(self.decoder)
        ]
        out = None if self.output_proj is None else fn("output_proj", self.output_proj)
        return replace(self, encoder=enc, decoder=dec, output_proj=out)

    def quantized(self) -> "Transformer":
        return self.map_linears(lambda _, w: w if w.kind.startswith("quant") else w.quantized())

    def densified(self) -> "Transformer":
        return self.map_linears(lambda _, w: LinearWeight(w.dense(), w.bias))


def _named(fn, prefix):
    names = iter("qkvo")
    return lambda w: fn(f"{prefix}.{next(names)}", w)


def random_model(config: TransformerConfig, rng=None, block_size=None, positional=True) -> Transformer:
    """Seeded random model; with ``block_size`` every linear layer is block-circulant."""
    rng = np.random.default_rng(rng)
    d, dff = config.d_model, config.d_ffn

    def lin(m, n):
        if block_size:
            w = bcm.random_bcm(m, n, block_size, rng)
        else:
            w = rng.normal(0.0, 1.0 / math.sqrt(n), size=(m, n))
        return LinearWeight(w, rng.normal(0.0, 0.02, size=m))

    def attn():
        return AttentionWeights(lin(d, d), lin(d, d), lin(d, d), lin(d, d))

    def norm():
        return Norm(1.0 + rng.normal(0.0, 0.05, size=d), rng.normal(0.0, 0.05, size=d))

    enc = [EncoderLayerWeights(attn(), lin(dff, d), lin(d, dff), norm(), norm()) for _ in range(config.num_layers)]
    dec = []
    if config.has_decoder:
        dec = [
            DecoderLayerWeights(attn(), attn(), lin(dff, d), lin(d, dff), norm(), norm(), norm())
            for _ in range(config.num_layers)
        ]
    embedding = rng.normal(0.0, 1.0, size=(config.vocab_size, d))
    return Transformer(config, embedding, enc, dec, None, positional)
