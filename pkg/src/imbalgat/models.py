"""Two-layer GAT and GCN node classifiers built on :mod:`imbalgat.numcore`."""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import numcore as nc
from .graphio import GraphDataset
from .numcore import EdgeVector, Tensor

CHECKPOINT_MAGIC = b"IGATM1"


@dataclass(frozen=True)
class Architecture:
    kind: str  # "gat" | "gcn"
    in_dim: int
    num_classes: int
    hidden: int = 8
    heads: int = 2
    out_heads: int = 1
    dropout: float = 0.6
    alpha: float = 0.2

    def __post_init__(self):
        if self.kind not in ("gat", "gcn"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        dims = [self.in_dim, self.num_classes, self.hidden]
        if self.kind == "gat":
            dims += [self.heads, self.out_heads]
        if min(dims) < 1:
            raise ValueError(f"zero-sized layer in {self}")
        if not 0 <= self.dropout < 1:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")


@dataclass
class GatHeadParams:
    W: Tensor
    attn_src: Tensor
    attn_dst: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.W, self.attn_src, self.attn_dst]


@dataclass
class ModelParams:
    arch: Architecture
    # GAT: layers[k] is a list of heads; GCN: layers[k] is a one-element list holding W
    layers: list[list] = field(default_factory=list)

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        out = []
        for k, layer in enumerate(self.layers):
            for h, item in enumerate(layer):
                if isinstance(item, GatHeadParams):
                    out += [(f"l{k}.h{h}.W", item.W), (f"l{k}.h{h}.attn_src", item.attn_src),
                            (f"l{k}.h{h}.attn_dst", item.attn_dst)]
                else:
                    out.append((f"l{k}.W", item))
        return out

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named_tensors()]

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self.tensors())

    def copy(self) -> "ModelParams":
        def dup(t: Tensor) -> Tensor:
            return Tensor(t.data.copy(), requires_grad=t.requires_grad)

        layers = []
        for layer in self.layers:
            layers.append([GatHeadParams(dup(x.W), dup(x.attn_src), dup(x.attn_dst))
                           if isinstance(x, GatHeadParams) else dup(x) for x in layer])
        return ModelParams(self.arch, layers)


@dataclass
class AttentionRecord:
    """Normalized attention (before dropout) for every (layer, head)."""

    weights: dict[tuple[int, int], EdgeVector] = field(default_factory=dict)

    def __getitem__(self, key: tuple[int, int]) -> EdgeVector:
        return self.weights[key]

    def __contains__(self, key) -> bool:
        return key in self.weights


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    shape = shape or (fan_in, fan_out)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_params(arch: Architecture, seed: int) -> ModelParams:
    rng = np.random.default_rng(seed)
    if arch.kind == "gcn":
        return ModelParams(arch, [[glorot(rng, arch.in_dim, arch.hidden)],
                                  [glorot(rng, arch.hidden, arch.num_classes)]])

    def head(d_in, d_out):
        # attention vectors drawn as the halves of one (2*d_out, 1) Glorot vector
        return GatHeadParams(glorot(rng, d_in, d_out), glorot(rng, 2 * d_out, 1, (d_out, 1)),
                             glorot(rng, 2 * d_out, 1, (d_out, 1)))

    hidden = [head(arch.in_dim, arch.hidden) for _ in range(arch.heads)]
    output = [head(arch.hidden * arch.heads, arch.num_classes) for _ in range(arch.out_heads)]
    return ModelParams(arch, [hidden, output])


# --- layers ---------------------------------------------------------------------------------


def gat_head(h: Tensor, graph: GraphDataset, p: GatHeadParams, alpha: float = nc.LEAKY_ALPHA):
    """Single attention head: returns (unactivated output, normalized attention)."""
    z = nc.matmul(h, p.W)
    score = nc.add(nc.gather_nodes(nc.matmul(z, p.attn_src), graph, "row"),
                   nc.gather_nodes(nc.matmul(z, p.attn_dst), graph, "col"))
    att = nc.segment_softmax(nc.leaky_relu(score, alpha), graph)
    return z, att


def gat_layer_forward(
    h: Tensor,
    graph: GraphDataset,
    heads: list[GatHeadParams],
    concat: bool,
    dropout: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
    activation: str = "elu",
    alpha: float = nc.LEAKY_ALPHA,
) -> tuple[Tensor, list[EdgeVector]]:
    if not heads:
        raise ValueError("gat layer needs at least one head")
    outs, atts = [], []
    for p in heads:
        z, att = gat_head(h, graph, p, alpha)
        atts.append(att)
        used = nc.dropout(att, dropout, rng, training)
        outs.append(nc.segment_weighted_sum(used, z, graph))
    if concat:
        out = nc.concat_cols(outs)
    else:
        out = outs[0]
        for o in outs[1:]:
            out = nc.add(out, o)
        if len(outs) > 1:
            out = nc.scale(out, 1.0 / len(outs))
    if activation == "elu":
        out = nc.elu(out)
    elif activation != "identity":
        raise ValueError(f"unknown activation {activation!r}")
    return out, atts


def gcn_norm_weights(graph: GraphDataset) -> EdgeVector:
    """Edge values of D^-1/2 (A + I) D^-1/2 laid out on the CSR slots."""
    d = graph.degrees().astype(np.float64)
    inv = 1.0 / np.sqrt(d)
    w = inv[graph.slot_rows] * inv[graph.col_indices]
    return EdgeVector(w, graph.fingerprint)


def gcn_layer_forward(h: Tensor, graph: GraphDataset, W: Tensor, activation: str = "relu",
                      norm: EdgeVector | None = None) -> Tensor:
    if h.shape[1] != W.shape[0]:
        raise ValueError(f"gcn layer: h is {h.shape}, W is {W.shape}")
    norm = norm if norm is not None else gcn_norm_weights(graph)
    out = nc.segment_weighted_sum(norm, nc.matmul(h, W), graph)
    if activation == "relu":
        return nc.relu(out)
    if activation != "identity":
        raise ValueError(f"unknown activation {activation!r}")
    return out


def model_logits(ds: GraphDataset, params: ModelParams, training: bool = False,
                 rng: np.random.Generator | None = None, features: Tensor | None = None):
    arch = params.arch
    if arch.in_dim != ds.num_features or arch.num_classes != ds.num_classes:
        raise ValueError("model dimensions do not match dataset")
    x = features if features is not None else ds.X
    record = AttentionRecord()
    if arch.kind == "gcn":
        norm = gcn_norm_weights(ds)
        h = nc.dropout(x, arch.dropout, rng, training)
        h = gcn_layer_forward(h, ds, params.layers[0][0], "relu", norm)
        h = nc.dropout(h, arch.dropout, rng, training)
        return gcn_layer_forward(h, ds, params.layers[1][0], "identity", norm), record
    h = nc.dropout(x, arch.dropout, rng, training)
    h, atts = gat_layer_forward(h, ds, params.layers[0], True, arch.dropout, training, rng, "elu", arch.alpha)
    record.weights.update({(0, i): a for i, a in enumerate(atts)})
    h = nc.dropout(h, arch.dropout, rng, training)
    logits, atts = gat_layer_forward(h, ds, params.layers[1], False, arch.dropout, training, rng,
                                     "identity", arch.alpha)
    record.weights.update({(1, i): a for i, a in enumerate(atts)})
    return logits, record


def model_forward(ds: GraphDataset, params: ModelParams, training: bool = False,
                  rng: np.random.Generator | None = None, features: Tensor | None = None):
    """Class probabilities (V, N) and the attention record of every GAT layer."""
    logits, record = model_logits(ds, params, training, rng, features)
    return nc.row_softmax(logits), record


# --- checkpoints ----------------------------------------------------------------------------


class CheckpointError(ValueError):
    pass


def save_checkpoint(params: ModelParams, path) -> None:
    named = params.named_tensors()
    header = {
        "arch": asdict(params.arch),
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in named],
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(hbytes)))
        f.write(hbytes)
        for _, t in named:
            f.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path, expected: Architecture | None = None) -> ModelParams:
    raw = Path(path).read_bytes()
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint")
    pos = len(CHECKPOINT_MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    header = json.loads(raw[pos : pos + hlen])
    pos += hlen
    arch = Architecture(**header["arch"])
    if expected is not None and arch != expected:
        raise CheckpointError(f"checkpoint architecture {arch} does not match expected {expected}")
    params = init_params(arch, 0)
    named = params.named_tensors()
    if [n for n, _ in named] != [t["name"] for t in header["tensors"]]:
        raise CheckpointError(f"{path}: tensor layout does not match architecture")
    for (_, t), meta in zip(named, header["tensors"]):
        if list(t.shape) != meta["shape"]:
            raise CheckpointError(f"{path}: shape mismatch for {meta['name']}")
        n = t.data.size * 8
        if pos + n > len(raw):
            raise CheckpointError(f"{path}: truncated")
        t.data = np.frombuffer(raw[pos : pos + n], dtype="<f8").reshape(t.shape).copy()
        pos += n
    return params
