"""Desk-scale federated training: dataset ingestion/synthesis, trust-derived
label noise, non-IID partitioning, softmax-regression local training whose
epoch count follows the local-accuracy target, federated averaging, and
evaluation.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .network import TrustGraph

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Malformed or inconsistent IDX input files."""


@dataclass
class Dataset:
    features: np.ndarray  # (n, d), values in [0, 1]
    labels: np.ndarray    # (n,), ints in [0, classes)
    classes: int

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ValueError("features/labels length mismatch")
        if len(self.labels) and (self.labels.min() < 0
                                 or self.labels.max() >= self.classes):
            raise ValueError("labels out of range")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class ClientShard:
    """One client's slice of the dataset, with its noisy label view."""

    owner: int
    indices: np.ndarray
    noise_fraction: float
    labels: np.ndarray  # labels after noise, aligned with indices


@dataclass
class GlobalModel:
    weights: np.ndarray  # (d, classes)
    bias: np.ndarray     # (classes,)
    round: int = 0

    @classmethod
    def zeros(cls, dim: int, classes: int) -> "GlobalModel":
        return cls(weights=np.zeros((dim, classes)), bias=np.zeros(classes))

    def copy(self) -> "GlobalModel":
        return GlobalModel(weights=self.weights.copy(), bias=self.bias.copy(),
                           round=self.round)


def load_idx(images_path: str, labels_path: str) -> Dataset:
    """Read an IDX image/label file pair (big-endian, as published)."""
    with open(images_path, "rb") as fh:
        header = fh.read(16)
        if len(header) < 16:
            raise IdxFormatError(f"{images_path}: truncated header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGES_MAGIC:
            raise IdxFormatError(
                f"{images_path}: bad magic 0x{magic:08x}, "
                f"expected 0x{IDX_IMAGES_MAGIC:08x}")
        raw = fh.read(count * rows * cols)
        if len(raw) < count * rows * cols:
            raise IdxFormatError(f"{images_path}: truncated pixel data")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
    with open(labels_path, "rb") as fh:
        header = fh.read(8)
        if len(header) < 8:
            raise IdxFormatError(f"{labels_path}: truncated header")
        magic, label_count = struct.unpack(">II", header)
        if magic != IDX_LABELS_MAGIC:
            raise IdxFormatError(
                f"{labels_path}: bad magic 0x{magic:08x}, "
                f"expected 0x{IDX_LABELS_MAGIC:08x}")
        raw = fh.read(label_count)
        if len(raw) < label_count:
            raise IdxFormatError(f"{labels_path}: truncated label data")
        labels = np.frombuffer(raw, dtype=np.uint8)
    if count != label_count:
        raise IdxFormatError(
            f"image/label count mismatch: {count} images vs {label_count} labels")
    return Dataset(features=images.astype(np.float64) / 255.0,
                   labels=labels.astype(np.int64),
                   classes=int(labels.max()) + 1 if label_count else 10)


def generate_synthetic(classes: int, dim: int, n: int, separation: float,
                       rng: np.random.Generator) -> Dataset:
    """Axis-aligned Gaussian blobs, one per class, unit within-class stddev
    and pairwise centre distance `separation`; min-max scaled to [0, 1]."""
    if classes < 2:
        raise ValueError("classes must be at least 2")
    if classes > dim:
        raise ValueError("need dim >= classes for axis-aligned centres")
    centres = np.zeros((classes, dim))
    for c in range(classes):
        centres[c, c] = separation / math.sqrt(2.0)
    labels = rng.integers(0, classes, size=n)
    features = centres[labels] + rng.standard_normal((n, dim))
    lo, hi = features.min(), features.max()
    features = (features - lo) / (hi - lo) if hi > lo else features * 0.0
    return Dataset(features=features, labels=labels, classes=classes)


def _noise_fractions(trust: TrustGraph, noise_scale: float,
                     literal: bool) -> np.ndarray:
    """Per-client noisy-label fraction derived from trust connectivity.

    The literal rule 1 - s_i / total makes nearly every client's share of the
    total trust mass tiny, which floods all shards with noise at realistic
    population sizes; the default instead normalizes connectivity within each
    tier and scales by noise_scale, so the best-connected client of a tier
    gets (almost) clean data.

    An FC's quality score is its aggregate outgoing trust (how engaged it is
    with the social network); an SC's is its strongest incoming link, since a
    recommended client is vouched for by its best recommender.
    """
    row = trust.weights.sum(axis=1)   # per-FC aggregate connectivity
    col = trust.weights.max(axis=0) if trust.num_fc else np.zeros(trust.num_sc)
    if literal:
        col_sum = trust.weights.sum(axis=0)
        total = trust.weights.sum()
        if total <= 0:
            return np.ones(trust.num_clients)
        frac = 1.0 - np.concatenate([row, col_sum]) / total
    else:
        fc = 1.0 - row / row.max() if row.max() > 0 else np.ones_like(row)
        sc = 1.0 - col / col.max() if col.max() > 0 else np.ones_like(col)
        frac = noise_scale * np.concatenate([fc, sc])
    return np.clip(frac, 0.0, 1.0)


def _apply_noise(dataset: Dataset, indices: np.ndarray, fraction: float,
                 rng: np.random.Generator) -> np.ndarray:
    labels = dataset.labels[indices].copy()
    n_noisy = int(round(fraction * len(indices)))
    if n_noisy:
        flip = rng.choice(len(indices), size=n_noisy, replace=False)
        # Uniform flip to a *different* class.
        labels[flip] = (labels[flip]
                        + rng.integers(1, dataset.classes, size=n_noisy)
                        ) % dataset.classes
    return labels


def partition_scenario1(dataset: Dataset, trust: TrustGraph,
                        rng: np.random.Generator, *, noise_scale: float = 0.5,
                        literal_noise: bool = False) -> list[ClientShard]:
    """IID uniform split over all clients, with trust-derived label noise."""
    n_clients = trust.num_clients
    perm = rng.permutation(len(dataset))
    splits = np.array_split(perm, n_clients)
    fractions = _noise_fractions(trust, noise_scale, literal_noise)
    shards = []
    for owner, idx in enumerate(splits):
        labels = _apply_noise(dataset, idx, float(fractions[owner]), rng)
        shards.append(ClientShard(owner=owner, indices=idx,
                                  noise_fraction=float(fractions[owner]),
                                  labels=labels))
    return shards


def partition_scenario2(dataset: Dataset, trust: TrustGraph,
                        heterogeneity: float, rng: np.random.Generator, *,
                        noise_scale: float = 0.5,
                        literal_noise: bool = False) -> list[ClientShard]:
    """Non-IID split: each client draws a `heterogeneity` fraction from one
    dominant class (round-robin over classes) and the rest IID; Scenario 1
    noise applies on top."""
    if not 0.0 <= heterogeneity <= 1.0:
        raise ValueError("heterogeneity must lie in [0, 1]")
    n_clients = trust.num_clients
    sizes = [len(s) for s in np.array_split(np.arange(len(dataset)), n_clients)]
    by_class = [list(rng.permutation(np.nonzero(dataset.labels == c)[0]))
                for c in range(dataset.classes)]
    assigned: list[list[int]] = [[] for _ in range(n_clients)]
    for owner in range(n_clients):
        pool = by_class[owner % dataset.classes]
        want = int(round(heterogeneity * sizes[owner]))
        take = min(want, len(pool))
        assigned[owner] = [pool.pop() for _ in range(take)]
    rest = [i for pool in by_class for i in pool]
    rest = list(rng.permutation(np.array(rest, dtype=np.int64))) if rest else []
    for owner in range(n_clients):
        need = sizes[owner] - len(assigned[owner])
        assigned[owner].extend(rest[:need])
        rest = rest[need:]
    fractions = _noise_fractions(trust, noise_scale, literal_noise)
    shards = []
    for owner, idx_list in enumerate(assigned):
        idx = np.array(sorted(int(i) for i in idx_list), dtype=np.int64)
        labels = _apply_noise(dataset, idx, float(fractions[owner]), rng)
        shards.append(ClientShard(owner=owner, indices=idx,
                                  noise_fraction=float(fractions[owner]),
                                  labels=labels))
    return shards


def softmax_loss_grad(weights: np.ndarray, bias: np.ndarray, x: np.ndarray,
                      y: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy loss and its analytic gradient."""
    logits = x @ weights + bias
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = len(y)
    loss = -float(np.mean(np.log(probs[np.arange(n), y] + 1e-300)))
    probs[np.arange(n), y] -= 1.0
    return loss, x.T @ probs / n, probs.sum(axis=0) / n


def sample_losses(model: GlobalModel, x: np.ndarray,
                  y: np.ndarray) -> np.ndarray:
    """Per-sample cross-entropy losses."""
    logits = x @ model.weights + model.bias
    logits -= logits.max(axis=1, keepdims=True)
    log_probs = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    return -log_probs[np.arange(len(y)), y]


def num_local_epochs(theta: float, nu: float = 5.0) -> int:
    """Epoch budget implied by the local-accuracy target."""
    return max(1, math.ceil(nu * math.log(1.0 / theta)))


def local_train(model: GlobalModel, dataset: Dataset, shard: ClientShard,
                theta: float, lr: float, rng: np.random.Generator, *,
                nu: float = 5.0, batch_size: int = 32) -> GlobalModel:
    """Mini-batch gradient descent from the global weights on one shard."""
    if not 0.01 <= theta <= 0.99:
        raise ValueError("theta must lie in [0.01, 0.99]")
    local = model.copy()
    x_all = dataset.features[shard.indices]
    y_all = shard.labels
    n = len(y_all)
    if n == 0:
        return local
    for _ in range(num_local_epochs(theta, nu)):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            _, gw, gb = softmax_loss_grad(local.weights, local.bias,
                                          x_all[batch], y_all[batch])
            local.weights -= lr * gw
            local.bias -= lr * gb
    return local


def aggregate(locals_and_sizes: list[tuple[GlobalModel, int]],
              current: GlobalModel) -> GlobalModel:
    """Sample-count-weighted federated averaging; an empty round keeps the
    previous global model (only the round counter advances)."""
    nxt = current.copy()
    nxt.round = current.round + 1
    if not locals_and_sizes:
        return nxt
    total = sum(size for _, size in locals_and_sizes)
    nxt.weights = sum((size / total) * m.weights for m, size in locals_and_sizes)
    nxt.bias = sum((size / total) * m.bias for m, size in locals_and_sizes)
    if not (np.isfinite(nxt.weights).all() and np.isfinite(nxt.bias).all()):
        raise FloatingPointError("aggregated model has non-finite entries")
    return nxt


def evaluate(model: GlobalModel, dataset: Dataset) -> float:
    """Argmax-class accuracy; argmax ties resolve to the lowest class."""
    scores = dataset.features @ model.weights + model.bias
    return float(np.mean(np.argmax(scores, axis=1) == dataset.labels))
