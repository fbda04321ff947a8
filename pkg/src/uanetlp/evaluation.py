"""Threshold-free ranking metrics over candidate node pairs, two trivial
baselines for sanity comparison, and the ablation-variant runner."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphdata import WeightedSnapshot, binarize
from .model import VARIANTS, ModelDims, predict_window
from .training import TrainConfig, train


class DegenerateSample(Exception):
    """Metric undefined: the sample lacks a positive (or negative) label."""


@dataclass
class ScoredPairs:
    """All unordered node pairs i < j with prediction score and true label."""

    i: np.ndarray
    j: np.ndarray
    scores: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.scores.shape[0]


def collect_pairs(a_true: np.ndarray, a_hat: np.ndarray) -> ScoredPairs:
    a_true = np.asarray(a_true, dtype=np.float64)
    a_hat = np.asarray(a_hat, dtype=np.float64)
    if a_true.shape != a_hat.shape:
        raise ValueError(f"shape mismatch: {a_true.shape} vs {a_hat.shape}")
    for name, m in (("labels", a_true), ("scores", a_hat)):
        if not np.array_equal(m, m.T):
            raise ValueError(f"{name} matrix is not symmetric")
    if not np.isfinite(a_hat).all():
        raise ValueError("scores contain non-finite values")
    if not np.isin(a_true, (0.0, 1.0)).all():
        raise ValueError("labels must be 0/1")
    iu = np.triu_indices(a_true.shape[0], k=1)
    return ScoredPairs(iu[0], iu[1], a_hat[iu], a_true[iu])


def _tie_groups(sorted_scores: np.ndarray):
    """Yield (start, stop) index ranges of equal-score runs."""
    start = 0
    for k in range(1, len(sorted_scores) + 1):
        if k == len(sorted_scores) or sorted_scores[k] != sorted_scores[start]:
            yield start, k
            start = k


def auc(pairs: ScoredPairs) -> float:
    """Mann-Whitney statistic: concordant plus half the tied pairs."""
    labels, scores = pairs.labels, pairs.scores
    positives = int(labels.sum())
    negatives = len(labels) - positives
    if positives == 0 or negatives == 0:
        raise DegenerateSample("need at least one positive and one negative pair")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    for start, stop in _tie_groups(sorted_scores):
        ranks[order[start:stop]] = 0.5 * (start + stop - 1) + 1.0
    u = ranks[labels == 1.0].sum() - positives * (positives + 1) / 2.0
    return float(u / (positives * negatives))


def auprc(pairs: ScoredPairs) -> float:
    """Average precision with step interpolation; tied positives all get
    the precision at their tie group's boundary."""
    labels, scores = pairs.labels, pairs.scores
    positives = int(labels.sum())
    if positives == 0:
        raise DegenerateSample("need at least one positive pair")
    order = np.argsort(-scores, kind="mergesort")
    sorted_labels = labels[order]
    sorted_scores = scores[order]
    ap = 0.0
    true_seen = 0
    for start, stop in _tie_groups(sorted_scores):
        group_true = int(sorted_labels[start:stop].sum())
        true_seen += group_true
        if group_true:
            ap += (group_true / positives) * (true_seen / stop)
    return float(ap)


def baseline_common_neighbor(history: list[WeightedSnapshot]) -> np.ndarray:
    """Common-neighbor counts on the union of the binarized history,
    scaled into [0, 1] by the maximum count."""
    if not history:
        raise ValueError("need at least one history snapshot")
    union = np.zeros_like(history[0].weights, dtype=bool)
    for snap in history:
        union |= snap.weights > 0.0
    b = union.astype(np.float64)
    counts = b @ b
    np.fill_diagonal(counts, 0.0)
    peak = counts.max()
    return counts / peak if peak > 0 else counts


def baseline_persistence(history: list[WeightedSnapshot]) -> np.ndarray:
    """Predicts that the last observed topology repeats."""
    if not history:
        raise ValueError("need at least one history snapshot")
    return binarize(history[-1])


@dataclass
class SampleMetrics:
    target_index: int
    auc: float | None
    auprc: float | None

    @property
    def skipped(self) -> bool:
        return self.auc is None or self.auprc is None


@dataclass
class MetricReport:
    method: str
    samples: list

    @property
    def mean_auc(self) -> float:
        vals = [s.auc for s in self.samples if s.auc is not None]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def mean_auprc(self) -> float:
        vals = [s.auprc for s in self.samples if s.auprc is not None]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def num_skipped(self) -> int:
        return sum(s.skipped for s in self.samples)


def evaluate_scores(method: str, score_fn, samples: list) -> MetricReport:
    """Score every test window with `score_fn(sample) -> matrix`."""
    rows = []
    for sample in samples:
        pairs = collect_pairs(sample.target, score_fn(sample))
        try:
            rows.append(SampleMetrics(sample.target_index, auc(pairs), auprc(pairs)))
        except DegenerateSample:
            rows.append(SampleMetrics(sample.target_index, None, None))
    return MetricReport(method, rows)


def evaluate_model(store, dims: ModelDims, prepared: list, samples: list,
                   method: str = "model") -> MetricReport:
    window = len(samples[0].history) + 1

    def score(sample):
        return predict_window(store, prepared[sample.start:sample.start + window - 1], dims)

    return evaluate_scores(method, score, samples)


def evaluate_baselines(samples: list) -> list[MetricReport]:
    return [
        evaluate_scores("common_neighbor",
                        lambda s: baseline_common_neighbor(s.history), samples),
        evaluate_scores("persistence",
                        lambda s: baseline_persistence(s.history), samples),
    ]


def run_ablation(snapshots: list[WeightedSnapshot], variant: str,
                 cfg: TrainConfig, base_dims: ModelDims | None = None):
    """Train and evaluate one fusion variant; returns (report, train result).

    The variant only changes which scales are concatenated (and with it
    the LSTM input width); data, split, partitions, and seeds are shared.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; valid: {', '.join(VARIANTS)}")
    if base_dims is None:
        base_dims = ModelDims(nodes=snapshots[0].n)
    dims = ModelDims(
        nodes=base_dims.nodes, gat_hidden=base_dims.gat_hidden,
        feature_dim=base_dims.feature_dim, lstm_hidden=base_dims.lstm_hidden,
        lstm_layers=base_dims.lstm_layers, decoder_hidden=base_dims.decoder_hidden,
        scales=VARIANTS[variant])
    result = train(snapshots, cfg, dims)
    report = evaluate_model(result.store, dims, result.prepared, result.split.test,
                            method=variant)
    return report, result
