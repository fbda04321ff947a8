"""Snapshot sequence data model: node attributes, binarization, sliding
windows, chronological split, and the UANET v1 dataset text format."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IP_BITS = 32
MAGIC = "UANET v1"


class DataError(Exception):
    """Malformed dataset file or inconsistent snapshot data."""


class WeightedSnapshot:
    """Symmetric non-negative link-weight matrix with zero diagonal."""

    __slots__ = ("weights",)

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DataError(f"snapshot must be square, got shape {w.shape}")
        if not np.isfinite(w).all():
            raise DataError("snapshot contains non-finite weights")
        if (w < 0).any():
            raise DataError("snapshot contains negative weights")
        if not np.array_equal(w, w.T):
            raise DataError("snapshot is not symmetric")
        if np.diag(w).any():
            raise DataError("snapshot has nonzero diagonal")
        self.weights = w

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.weights)))

    def __eq__(self, other) -> bool:
        return isinstance(other, WeightedSnapshot) and np.array_equal(self.weights, other.weights)

    def __repr__(self) -> str:
        return f"WeightedSnapshot(n={self.n}, edges={self.num_edges})"


def binarize(snapshot: WeightedSnapshot) -> np.ndarray:
    """0/1 adjacency: entry is 1 exactly where the weight is positive."""
    return (snapshot.weights > 0.0).astype(np.float64)


def density(adjacency: np.ndarray) -> float:
    n = adjacency.shape[0]
    if n < 2:
        return 0.0
    return float(np.count_nonzero(adjacency) / (n * (n - 1)))


def default_ips(n: int) -> list[int]:
    """Deterministic per-node addresses 10.0.(k//256).(k%256)."""
    if n > 65536:
        raise DataError("default IP scheme supports at most 65536 nodes")
    return [(10 << 24) | ((k // 256) << 8) | (k % 256) for k in range(n)]


def ip_bit_matrix(n: int, ips=None) -> np.ndarray:
    """One row per node: the 32 address bits, most significant first."""
    if ips is None:
        ips = default_ips(n)
    ips = list(ips)
    if len(ips) < n:
        raise DataError(f"missing IP entry for node {len(ips)}")
    bits = np.zeros((n, IP_BITS))
    for k in range(n):
        ip = int(ips[k])
        for b in range(IP_BITS):
            bits[k, b] = (ip >> (IP_BITS - 1 - b)) & 1
    return bits


def build_attributes(snapshot: WeightedSnapshot, ips=None) -> np.ndarray:
    """Node attributes: 32 IP bits followed by the node's weight row."""
    return np.hstack([ip_bit_matrix(snapshot.n, ips), snapshot.weights])


@dataclass
class WindowSample:
    """l-1 history snapshots plus the following snapshot binarized as target.

    `start` is the sequence index of the first history snapshot, so the
    target is sequence index start + len(history).
    """

    start: int
    history: list
    target: np.ndarray

    @property
    def target_index(self) -> int:
        return self.start + len(self.history)


@dataclass
class DatasetSplit:
    train: list
    test: list


def sliding_windows(seq: list[WeightedSnapshot], window: int) -> list[WindowSample]:
    """All stride-1 windows of `window` snapshots; the last one is the target."""
    if window < 1:
        raise DataError(f"window length must be >= 1, got {window}")
    if len(seq) < window:
        raise DataError(f"sequence of {len(seq)} snapshots is shorter than window {window}")
    samples = []
    for start in range(len(seq) - window + 1):
        history = seq[start:start + window - 1]
        samples.append(WindowSample(start, history, binarize(seq[start + window - 1])))
    return samples


def split(samples: list[WindowSample], n_train: int) -> DatasetSplit:
    """First n_train samples train, the rest test; order preserved."""
    if not 0 < n_train < len(samples):
        raise DataError(f"n_train must be in (0, {len(samples)}), got {n_train}")
    return DatasetSplit(samples[:n_train], samples[n_train:])


def sequence_stats(seq: list[WeightedSnapshot]) -> dict:
    """Edge-count and density statistics over a snapshot sequence."""
    edges = [s.num_edges for s in seq]
    return {
        "min_edges": min(edges),
        "max_edges": max(edges),
        "avg_edges": sum(edges) / len(edges),
        "avg_density": sum(density(binarize(s)) for s in seq) / len(seq),
    }


@dataclass
class DatasetFile:
    snapshots: list
    comm_radius: float
    seed: int
    comments: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.snapshots[0].n


def write_dataset(path, snapshots: list[WeightedSnapshot], comm_radius: float,
                  seed: int, comments=()) -> None:
    """Line-oriented text format, exact float round-trip.

    Header `UANET v1 <n> <T> <r> <seed>`, optional `#` metadata lines,
    then per snapshot `S <t> <num_edges>` followed by `E <i> <j> <w>`
    lines with i < j (symmetry implied). Floats use the shortest decimal
    that parses back bit-identically.
    """
    n = snapshots[0].n
    lines = [f"{MAGIC} {n} {len(snapshots)} {float(comm_radius)!r} {int(seed)}"]
    lines += [f"# {c}" for c in comments]
    for t, snap in enumerate(snapshots):
        if snap.n != n:
            raise DataError(f"snapshot {t} has {snap.n} nodes, expected {n}")
        ii, jj = np.nonzero(np.triu(snap.weights))
        lines.append(f"S {t} {len(ii)}")
        for i, j in zip(ii, jj):
            lines.append(f"E {i} {j} {snap.weights[i, j]!r}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset(path) -> DatasetFile:
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()

    comments = [ln[1:].strip() for ln in raw if ln.startswith("#")]
    lines = [(no + 1, ln) for no, ln in enumerate(raw) if ln and not ln.startswith("#")]
    if not lines:
        raise DataError(f"{path}: empty dataset file")

    no, header = lines[0]
    parts = header.split()
    if len(parts) != 6 or " ".join(parts[:2]) != MAGIC:
        raise DataError(f"{path}:{no}: malformed header: {header!r}")
    try:
        n, count = int(parts[2]), int(parts[3])
        comm_radius, seed = float(parts[4]), int(parts[5])
    except ValueError as exc:
        raise DataError(f"{path}:{no}: malformed header fields") from exc

    snapshots = []
    pos = 1
    for t in range(count):
        if pos >= len(lines):
            raise DataError(f"{path}: expected snapshot {t}, found end of file")
        no, ln = lines[pos]
        parts = ln.split()
        if len(parts) != 3 or parts[0] != "S" or int(parts[1]) != t:
            raise DataError(f"{path}:{no}: expected 'S {t} <edges>', got {ln!r}")
        num_edges = int(parts[2])
        pos += 1
        w = np.zeros((n, n))
        for _ in range(num_edges):
            if pos >= len(lines):
                raise DataError(f"{path}: snapshot {t} is missing edge lines")
            no, ln = lines[pos]
            parts = ln.split()
            if len(parts) != 4 or parts[0] != "E":
                raise DataError(f"{path}:{no}: expected edge line, got {ln!r}")
            i, j, weight = int(parts[1]), int(parts[2]), float(parts[3])
            if not 0 <= i < j < n:
                raise DataError(f"{path}:{no}: edge index out of range: ({i}, {j}) with n={n}")
            if weight <= 0:
                raise DataError(f"{path}:{no}: edge weight must be positive")
            w[i, j] = w[j, i] = weight
            pos += 1
        snapshots.append(WeightedSnapshot(w))
    if pos != len(lines):
        raise DataError(f"{path}:{lines[pos][0]}: trailing content after last snapshot")
    return DatasetFile(snapshots, comm_radius, seed, comments)
