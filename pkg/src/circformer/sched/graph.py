"""Dataflow graphs of encoder and decoder layers.

Node operation counts are multiply-accumulates for dense products,
butterfly-equivalent operations for block-circulant products and
element operations for softmax and add/norm.
"""

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from ..errors import CycleError, DomainError
from .model import LayerProfile, PeClass, ResourceVector


@dataclass(frozen=True)
class PeProfile:
    base_throughput: float
    resources: ResourceVector


# Per-unit cost of each PE class; placeholders meant to be overridden
# by a device config with measured numbers.
DEFAULT_PE_PROFILES = {
    PeClass.PE_A: PeProfile(1.0, ResourceVector(ff=180, lut=120, dsp=1, bram=0)),
    PeClass.PE_B: PeProfile(1.0, ResourceVector(ff=180, lut=120, dsp=1, bram=0)),
    PeClass.PE_FFT: PeProfile(1.0, ResourceVector(ff=900, lut=700, dsp=4, bram=1)),
    PeClass.ADDER: PeProfile(1.0, ResourceVector(ff=64, lut=64, dsp=0, bram=0)),
    PeClass.SOFTMAX: PeProfile(1.0, ResourceVector(ff=300, lut=400, dsp=2, bram=0)),
}


def fft_throughput(block_size: int) -> int:
    """Butterfly-equivalent operations a PE-FFT unit retires per cycle: ``b * log2(b)``."""
    return block_size * max(1, math.ceil(math.log2(block_size)))


@dataclass
class ComputeGraph:
    """DAG of layer profiles; a node's id is its insertion index."""

    nodes: List[LayerProfile] = field(default_factory=list)
    edges: List[Tuple[int, int]] = field(default_factory=list)

    def add(self, layer: LayerProfile) -> int:
        self.nodes.append(layer)
        return len(self.nodes) - 1

    def connect(self, u: int, v: int):
        for x in (u, v):
            if not 0 <= x < len(self.nodes):
                raise DomainError(f"edge endpoint {x} is not a node")
        self.edges.append((u, v))

    def __len__(self):
        return len(self.nodes)

    def successors(self) -> Dict[int, List[int]]:
        succ = {i: [] for i in range(len(self.nodes))}
        for u, v in self.edges:
            succ[u].append(v)
        return succ

    def predecessors(self) -> Dict[int, List[int]]:
        pred = {i: [] for i in range(len(self.nodes))}
        for u, v in self.edges:
            pred[v].append(u)
        return pred

    def topo_order(self) -> List[int]:
        """Kahn's algorithm, always releasing the lowest ready id first.

        Raises:
            CycleError: naming one back edge of a cycle.
        """
        indeg = [0] * len(self.nodes)
        succ = self.successors()
        for _, v in self.edges:
            indeg[v] += 1
        ready = [i for i, d in enumerate(indeg) if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            u = heapq.heappop(ready)
            order.append(u)
            for v in succ[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(ready, v)
        if len(order) != len(self.nodes):
            edge = self._back_edge(set(range(len(self.nodes))) - set(order), succ)
            raise CycleError(f"graph has a cycle through back edge {edge[0]} -> {edge[1]}", edge)
        return order

    def _back_edge(self, stuck, succ):
        color = {}
        for root in sorted(stuck):
            if root in color:
                continue
            stack = [(root, iter(succ[root]))]
            color[root] = 1
            while stack:
                u, it = stack[-1]
                for v in it:
                    if v not in stuck:
                        continue
                    if color.get(v) == 1:
                        return (u, v)
                    if v not in color:
                        color[v] = 1
                        stack.append((v, iter(succ[v])))
                        break
                else:
                    color[u] = 2
                    stack.pop()
        raise AssertionError("no back edge among stuck nodes")

    @property
    def total_ops(self) -> int:
        return sum(n.n_op for n in self.nodes)

    @property
    def stages(self) -> List[int]:
        return sorted({n.stage for n in self.nodes})

    def with_profiles(self, profiles) -> "ComputeGraph":
        """Copy with every node's throughput and unit cost taken from ``profiles``.

        PE-FFT throughput keeps its block-size scaling.
        """
        nodes = []
        for n in self.nodes:
            p = profiles.get(n.pe_class)
            if p is None:
                nodes.append(n)
                continue
            tput = p.base_throughput
            if n.pe_class is PeClass.PE_FFT:
                tput *= fft_throughput(n.attrs.get("block_size", 1))
            nodes.append(replace(n, base_throughput=tput, resources=p.resources))
        return ComputeGraph(nodes, list(self.edges))


def _node(name, n_op, pe, stage, profiles, **attrs):
    p = profiles[pe]
    tput = p.base_throughput
    if pe is PeClass.PE_FFT:
        tput *= fft_throughput(attrs["block_size"])
    return LayerProfile(name, int(n_op), tput, p.resources, pe, 1, stage, attrs)


def _fc(name, s, m, n, stage, block_size, profiles):
    """Fully connected node mapping n inputs to m outputs for s tokens."""
    if block_size:
        b = block_size
        f, g = -(-m // b), -(-n // b)
        ops = s * f * g * fft_throughput(b)
        return _node(name, ops, PeClass.PE_FFT, stage, profiles, block_size=b, kind="fc")
    return _node(name, s * m * n, PeClass.PE_A, stage, profiles, kind="fc")


def _attention_block(g, prefix, cfg, s, s_kv, q_src, kv_src, masked, stage0, block_size, profiles):
    """Projections, per-head attention, output projection and add/norm.

    Returns the add/norm node id. ``q_src``/``kv_src`` are predecessor ids
    (``None`` for external inputs).
    """
    d, h, dk, dv = cfg.d_model, cfg.num_heads, cfg.d_k, cfg.d_v
    q = g.add(_fc(f"{prefix}.QW^Q", s, d, d, stage0, block_size, profiles))
    k = g.add(_fc(f"{prefix}.KW^K", s_kv, d, d, stage0, block_size, profiles))
    v = g.add(_fc(f"{prefix}.VW^V", s_kv, d, d, stage0, block_size, profiles))
    for src, dst in ((q_src, q), (kv_src, k), (kv_src, v)):
        if src is not None:
            g.connect(src, dst)
    outs = []
    for i in range(h):
        extra = {"head": i, "mask": masked}
        qk = g.add(_node(f"{prefix}.head{i}.QK^T", s * s_kv * dk, PeClass.PE_B, stage0 + 1, profiles, **extra))
        sm = g.add(_node(f"{prefix}.head{i}.softmax", s * s_kv, PeClass.SOFTMAX, stage0 + 1, profiles, **extra))
        av = g.add(_node(f"{prefix}.head{i}.AV", s * s_kv * dv, PeClass.PE_B, stage0 + 1, profiles, **extra))
        g.connect(q, qk)
        g.connect(k, qk)
        g.connect(qk, sm)
        g.connect(sm, av)
        g.connect(v, av)
        outs.append(av)
    o = g.add(_fc(f"{prefix}.concat.W^O", s, d, d, stage0 + 2, block_size, profiles))
    for a in outs:
        g.connect(a, o)
    norm = g.add(_node(f"{prefix}.add_norm", s * d, PeClass.ADDER, stage0 + 3, profiles))
    g.connect(o, norm)
    return norm


def _ffn_block(g, prefix, cfg, s, src, stage0, block_size, profiles):
    d, dff = cfg.d_model, cfg.d_ffn
    f1 = g.add(_fc(f"{prefix}.ffn1", s, dff, d, stage0, block_size, profiles))
    f2 = g.add(_fc(f"{prefix}.ffn2", s, d, dff, stage0 + 1, block_size, profiles))
    norm = g.add(_node(f"{prefix}.add_norm", s * d, PeClass.ADDER, stage0 + 2, profiles))
    g.connect(src, f1)
    g.connect(f1, f2)
    g.connect(f2, norm)
    g.connect(src, norm)
    return norm


def _profiles(profiles):
    merged = dict(DEFAULT_PE_PROFILES)
    merged.update(profiles or {})
    return merged


def _encoder_into(g, cfg, seq_len, block_size, profiles, src=None, prefix="enc"):
    n1 = _attention_block(g, f"{prefix}.attn", cfg, seq_len, seq_len, src, src, False, 1, block_size, profiles)
    return _ffn_block(g, f"{prefix}.ffn", cfg, seq_len, n1, 5, block_size, profiles)


def build_encoder_graph(cfg, seq_len: int, block_size: Optional[int] = None, profiles=None) -> ComputeGraph:
    """One encoder layer as 7 pipeline stages.

    Stages: Q/K/V projections, per-head attention (QK^T, softmax, AV),
    concat W^O, add/norm, FFN linear 1, FFN linear 2, add/norm.
    ``block_size`` switches the fully connected nodes to PE-FFT.
    """
    if seq_len < 1:
        raise DomainError("seq_len must be >= 1")
    g = ComputeGraph()
    _encoder_into(g, cfg, seq_len, block_size, _profiles(profiles))
    return g


def _decoder_into(g, cfg, seq_len, block_size, profiles, memory=None, prefix="dec"):
    n1 = _attention_block(g, f"{prefix}.masked_attn", cfg, seq_len, seq_len, None, None, True, 1, block_size, profiles)
    n2 = _attention_block(g, f"{prefix}.cross_attn", cfg, seq_len, seq_len, n1, memory, False, 5, block_size, profiles)
    return _ffn_block(g, f"{prefix}.ffn", cfg, seq_len, n2, 9, block_size, profiles)


def build_decoder_graph(cfg, seq_len: int, block_size: Optional[int] = None, profiles=None) -> ComputeGraph:
    """One decoder layer: masked self-attention, encoder-decoder attention, FFN.

    Key/value projections of the encoder-decoder attention read the
    encoder output, which is external to this graph.
    """
    if not cfg.has_decoder:
        raise DomainError("encoder-only configuration has no decoder")
    if seq_len < 1:
        raise DomainError("seq_len must be >= 1")
    g = ComputeGraph()
    _decoder_into(g, cfg, seq_len, block_size, _profiles(profiles))
    return g


def build_model_graph(cfg, seq_len: int, block_size: Optional[int] = None, profiles=None) -> ComputeGraph:
    """Encoder layer, followed by a decoder layer fed by it when the model has one."""
    if seq_len < 1:
        raise DomainError("seq_len must be >= 1")
    profiles = _profiles(profiles)
    g = ComputeGraph()
    enc_out = _encoder_into(g, cfg, seq_len, block_size, profiles)
    if cfg.has_decoder:
        first = len(g)
        _decoder_into(g, cfg, seq_len, block_size, profiles, memory=enc_out)
        for i in range(first, len(g)):
            n = g.nodes[i]
            g.nodes[i] = replace(n, stage=n.stage + 7, attrs={**n.attrs, "part": "decoder"})
    return g
