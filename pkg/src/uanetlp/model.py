"""Multi-scale structural-temporal link predictor.

Per snapshot: a two-layer weighted graph attention stack produces
per-node micro features; community pooling and whole-graph pooling lift
them to meso and macro features; the three scales are concatenated and
fed through a stacked LSTM whose final hidden state is decoded into a
symmetric zero-diagonal link-probability matrix.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tape
from .community import Partition, louvain
from .graphdata import WeightedSnapshot, binarize, build_attributes

SCALES = ("micro", "meso", "macro")
VARIANTS = {
    "full": ("micro", "meso", "macro"),
    "only_micro": ("micro",),
    "no_micro": ("meso", "macro"),
    "no_meso": ("micro", "macro"),
    "no_macro": ("micro", "meso"),
}
LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class ModelDims:
    """Layer widths; defaults follow the 100-node configuration."""

    nodes: int
    gat_hidden: int = 100
    feature_dim: int = 44
    lstm_hidden: int = 256
    lstm_layers: int = 2
    decoder_hidden: int = 256
    scales: tuple = SCALES

    @property
    def attr_dim(self) -> int:
        return self.nodes + 32

    @property
    def fused_dim(self) -> int:
        return self.feature_dim * len(self.scales)

    def validate(self) -> None:
        if not self.scales or any(s not in SCALES for s in self.scales):
            raise ValueError(f"scales must be a non-empty subset of {SCALES}")
        if list(self.scales) != [s for s in SCALES if s in self.scales]:
            raise ValueError("scales must keep the micro, meso, macro order")
        if min(self.nodes, self.gat_hidden, self.feature_dim, self.lstm_hidden,
               self.decoder_hidden) < 1 or self.lstm_layers < 1:
            raise ValueError("all dimensions must be positive")

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes, "gat_hidden": self.gat_hidden,
            "feature_dim": self.feature_dim, "lstm_hidden": self.lstm_hidden,
            "lstm_layers": self.lstm_layers, "decoder_hidden": self.decoder_hidden,
            "scales": list(self.scales),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelDims":
        d = dict(d)
        d["scales"] = tuple(d["scales"])
        return cls(**d)


def _glorot(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    fan_out, fan_in = shape[0], shape[1]
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(dims: ModelDims, seed: int) -> ParamStore:
    """Seeded uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    dims.validate()
    rng = np.random.default_rng(seed)
    store = ParamStore()

    store.add("gat1.W", _glorot(rng, (dims.gat_hidden, dims.attr_dim)))
    store.add("gat1.a", _glorot(rng, (2 * dims.gat_hidden, 1)))
    store.add("gat2.W", _glorot(rng, (dims.feature_dim, dims.gat_hidden)))
    store.add("gat2.a", _glorot(rng, (2 * dims.feature_dim, 1)))

    in_width = dims.fused_dim
    for layer in range(1, dims.lstm_layers + 1):
        cols = dims.lstm_hidden + in_width
        for gate in ("f", "i", "C", "o"):
            store.add(f"lstm{layer}.W_{gate}", _glorot(rng, (dims.lstm_hidden, cols)))
            store.add(f"lstm{layer}.b_{gate}", np.zeros(dims.lstm_hidden))
        in_width = dims.lstm_hidden

    store.add("dec.W1", _glorot(rng, (dims.decoder_hidden, dims.lstm_hidden)))
    store.add("dec.b1", np.zeros(dims.decoder_hidden))
    store.add("dec.W2", _glorot(rng, (dims.nodes, dims.decoder_hidden)))
    store.add("dec.b2", np.zeros(dims.nodes))
    return store


# ---------------------------------------------------------------------------
# Per-snapshot constants, computed once and reused across windows and epochs.

def meso_pool_matrix(weights: np.ndarray, partition: Partition) -> np.ndarray:
    """Row k holds its community's pooling weights: each member's share of
    intra-community incident weight. Zero-weight communities pool uniformly."""
    n = weights.shape[0]
    pool = np.zeros((n, n))
    for comm in partition.communities:
        idx = np.asarray(comm)
        intra = weights[np.ix_(idx, idx)]
        incident = intra.sum(axis=1)
        total = incident.sum()
        share = incident / total if total > 0 else np.full(len(idx), 1.0 / len(idx))
        pool[np.ix_(idx, idx)] = share
    return pool


def macro_pool_matrix(weights: np.ndarray) -> np.ndarray:
    """Every row holds each node's share of total incident weight."""
    n = weights.shape[0]
    strength = weights.sum(axis=1)
    total = strength.sum()
    share = strength / total if total > 0 else np.full(n, 1.0 / n)
    return np.tile(share, (n, 1))


@dataclass
class PreparedSnapshot:
    weights: np.ndarray
    attributes: np.ndarray
    att_weights: np.ndarray   # weights plus unit self-loops, for attention
    att_mask: np.ndarray
    meso_pool: np.ndarray
    macro_pool: np.ndarray
    partition: Partition
    target: np.ndarray        # binarized adjacency


def prepare_snapshot(snapshot: WeightedSnapshot, partition: Partition,
                     ips=None) -> PreparedSnapshot:
    w = snapshot.weights
    att = w + np.eye(snapshot.n)
    return PreparedSnapshot(
        weights=w,
        attributes=build_attributes(snapshot, ips),
        att_weights=att,
        att_mask=att > 0.0,
        meso_pool=meso_pool_matrix(w, partition),
        macro_pool=macro_pool_matrix(w),
        partition=partition,
        target=binarize(snapshot),
    )


def prepare_sequence(snapshots: list[WeightedSnapshot], seed: int) -> list[PreparedSnapshot]:
    """Community detection plus attribute/pooling constants per snapshot.

    Each snapshot gets its own deterministic Louvain seed derived from the
    run seed and the snapshot index.
    """
    out = []
    for t, snap in enumerate(snapshots):
        part = louvain(snap.weights, seed=np.random.SeedSequence([seed, t]))
        out.append(prepare_snapshot(snap, part))
    return out


# ---------------------------------------------------------------------------
# Forward pass

def gat_layer(x, w, a, att_weights: np.ndarray, mask: np.ndarray):
    """One weighted attention layer; returns (features, attention)."""
    wx = ad.matmul(x, ad.transpose(w))
    d = w.shape[0]
    src = ad.matmul(wx, ad.row_slice(a, 0, d))
    dst = ad.matmul(wx, ad.row_slice(a, d, 2 * d))
    scores = ad.leaky_relu(ad.mul(att_weights, ad.add(src, ad.transpose(dst))), LEAKY_SLOPE)
    alpha = ad.masked_row_softmax(scores, mask)
    return ad.elu(ad.matmul(alpha, wx)), alpha


def multi_scale_features(prep: PreparedSnapshot, binding: dict, dims: ModelDims):
    """Micro features through the 2-layer GAT, then the pooled scales."""
    micro, _ = gat_layer(prep.attributes, binding["gat1.W"], binding["gat1.a"],
                         prep.att_weights, prep.att_mask)
    micro, _ = gat_layer(micro, binding["gat2.W"], binding["gat2.a"],
                         prep.att_weights, prep.att_mask)
    parts = []
    for scale in dims.scales:
        if scale == "micro":
            parts.append(micro)
        elif scale == "meso":
            parts.append(ad.weighted_row_sum(prep.meso_pool, micro))
        else:
            parts.append(ad.weighted_row_sum(prep.macro_pool, micro))
    return parts[0] if len(parts) == 1 else ad.concat_cols(*parts)


def lstm_step(y, h_prev, c_prev, binding: dict, layer: str):
    """Standard gated update; h_prev/c_prev may be constant zero arrays."""
    hy = ad.concat_cols(h_prev, y)

    def gate(name):
        return ad.add(ad.matmul(hy, ad.transpose(binding[f"{layer}.W_{name}"])),
                      binding[f"{layer}.b_{name}"])

    f = ad.sigmoid(gate("f"))
    i = ad.sigmoid(gate("i"))
    c_tilde = ad.tanh(gate("C"))
    c = ad.add(ad.mul(f, c_prev), ad.mul(i, c_tilde))
    o = ad.sigmoid(gate("o"))
    return ad.mul(o, ad.tanh(c)), c


def decode(h, binding: dict):
    hidden = ad.relu(ad.add(ad.matmul(h, ad.transpose(binding["dec.W1"])), binding["dec.b1"]))
    return ad.sigmoid(ad.add(ad.matmul(hidden, ad.transpose(binding["dec.W2"])), binding["dec.b2"]))


def refine(a_hat, n: int):
    """Zero the diagonal, then average with the transpose."""
    off_diag = 1.0 - np.eye(n)
    masked = ad.mul(a_hat, off_diag)
    return ad.mul(ad.add(masked, ad.transpose(masked)), 0.5)


def forward_window(binding: dict, prepared_history: list[PreparedSnapshot],
                   dims: ModelDims) -> list:
    """Refined predictions after each consumed snapshot: one per history
    step, the t-th predicting snapshot t+1. LSTM state starts at zero."""
    n = dims.nodes
    h = [np.zeros((n, dims.lstm_hidden)) for _ in range(dims.lstm_layers)]
    c = [np.zeros((n, dims.lstm_hidden)) for _ in range(dims.lstm_layers)]
    predictions = []
    for prep in prepared_history:
        x = multi_scale_features(prep, binding, dims)
        for k in range(dims.lstm_layers):
            h[k], c[k] = lstm_step(x, h[k], c[k], binding, f"lstm{k + 1}")
            x = h[k]
        predictions.append(refine(decode(x, binding), n))
    return predictions


def predict_window(store: ParamStore, prepared_history: list[PreparedSnapshot],
                   dims: ModelDims) -> np.ndarray:
    """Inference: the final-step prediction as a plain array."""
    tape = Tape()
    binding = store.bind(tape)
    return forward_window(binding, prepared_history, dims)[-1].value


# ---------------------------------------------------------------------------
# Checkpoints

def save_checkpoint(path, store: ParamStore, meta: dict) -> None:
    """npz archive: one float64 array per parameter plus a JSON meta entry."""
    arrays = dict(store.items())
    if "_meta" in arrays:
        raise ValueError("'_meta' is a reserved checkpoint entry")
    np.savez(path, _meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["_meta"]))
        store = ParamStore()
        for name in data.files:
            if name != "_meta":
                store.add(name, data[name])
    return store, meta
