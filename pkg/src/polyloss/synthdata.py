"""Seeded synthetic classification datasets.

Every generator draws from ``numpy.random.Generator(PCG64(seed))``; the same
generator parameters and seed always give byte-identical arrays.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    means: np.ndarray
    scale: float
    seed: int
    generator_spec: dict = field(default_factory=dict)

    @property
    def num_classes(self) -> int:
        return len(self.means)

    @property
    def class_counts(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.num_classes).tolist()

    def split(self, test_fraction: float, seed: int) -> tuple["Dataset", "Dataset"]:
        """Stratified seeded split; every class keeps at least one training example."""
        rng = make_rng(seed)
        train_idx, test_idx = [], []
        for c in range(self.num_classes):
            idx = np.flatnonzero(self.labels == c)
            idx = idx[rng.permutation(len(idx))]
            n_test = min(int(math.floor(len(idx) * test_fraction)), len(idx) - 1)
            test_idx.append(idx[:n_test])
            train_idx.append(idx[n_test:])
        train_idx = np.sort(np.concatenate(train_idx))
        test_idx = np.sort(np.concatenate(test_idx))
        return self._subset(train_idx), self._subset(test_idx)

    def _subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.means, self.scale,
                       self.seed, dict(self.generator_spec))

    def to_csv(self, path) -> None:
        d = self.features.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(d)] + ["label"])
            for row, y in zip(self.features, self.labels):
                w.writerow([repr(float(v)) for v in row] + [int(y)])


def _circle_means(k: int, d: int, separation: float) -> np.ndarray:
    """Class means on a circle in the first two dims, neighbours ``separation`` apart."""
    means = np.zeros((k, d))
    if d == 1:
        means[:, 0] = separation * (np.arange(k) - (k - 1) / 2)
        return means
    radius = separation / (2 * math.sin(math.pi / k))
    angles = 2 * math.pi * np.arange(k) / k
    means[:, 0] = radius * np.cos(angles)
    means[:, 1] = radius * np.sin(angles)
    return means


def _sample(means: np.ndarray, counts, scale: float, rng) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    d = means.shape[1]
    for c, (mu, n) in enumerate(zip(means, counts)):
        xs.append(mu + scale * rng.standard_normal((int(n), d)))
        ys.append(np.full(int(n), c, dtype=np.int64))
    return np.concatenate(xs), np.concatenate(ys)


def gaussian_blobs(k: int = 2, n_per_class: int = 100, d: int = 2,
                   separation: float = 4.0, seed: int = 0) -> Dataset:
    """``k`` unit-variance Gaussian clusters, ``n_per_class`` points each."""
    if k < 2 or n_per_class < 1 or d < 1 or not separation > 0:
        raise ValueError(f"degenerate blob parameters k={k} n={n_per_class} d={d} sep={separation}")
    means = _circle_means(k, d, separation)
    x, y = _sample(means, [n_per_class] * k, 1.0, make_rng(seed))
    spec = {"generator": "blobs", "k": k, "n_per_class": n_per_class, "d": d,
            "separation": separation}
    return Dataset(x, y, means, 1.0, int(seed), spec)


def imbalanced_binary(n_majority: int = 1000, n_minority: int = 10, overlap: float = 0.75,
                      d: int = 2, seed: int = 0) -> Dataset:
    """Two Gaussian classes with means at -1 and +1 along the first axis.

    ``overlap`` is the per-class standard deviation; class 0 is the majority.
    """
    if not n_majority >= n_minority >= 1:
        raise ValueError(f"need n_majority >= n_minority >= 1, got {n_majority}, {n_minority}")
    if not overlap > 0 or d < 1:
        raise ValueError(f"degenerate parameters overlap={overlap} d={d}")
    means = np.zeros((2, d))
    means[0, 0], means[1, 0] = -1.0, 1.0
    x, y = _sample(means, [n_majority, n_minority], overlap, make_rng(seed))
    spec = {"generator": "imbalanced", "n_majority": n_majority, "n_minority": n_minority,
            "overlap": overlap, "d": d}
    return Dataset(x, y, means, float(overlap), int(seed), spec)


def long_tail(k: int = 10, n_head: int = 200, decay: float = 0.7, d: int = 2,
              separation: float = 3.0, seed: int = 0) -> Dataset:
    """Class ``c`` gets ``ceil(n_head * decay**c)`` examples."""
    if k < 2 or n_head < 1 or not 0 < decay <= 1:
        raise ValueError(f"degenerate long-tail parameters k={k} n_head={n_head} decay={decay}")
    counts = [math.ceil(n_head * decay ** c) for c in range(k)]
    if min(counts) < 1 or n_head * decay ** (k - 1) < 1e-300:
        raise ValueError(f"decay {decay} leaves empty classes for k={k}")
    means = _circle_means(k, d, separation)
    x, y = _sample(means, counts, 1.0, make_rng(seed))
    spec = {"generator": "long-tail", "k": k, "n_head": n_head, "decay": decay, "d": d,
            "separation": separation}
    return Dataset(x, y, means, 1.0, int(seed), spec)


GENERATORS = {
    "blobs": gaussian_blobs,
    "imbalanced": imbalanced_binary,
    "long-tail": long_tail,
}


def generate(spec: dict, seed: int) -> Dataset:
    """Build a dataset from a ``{"generator": name, **params}`` record."""
    params = dict(spec)
    name = params.pop("generator", None)
    if name not in GENERATORS:
        raise ValueError(f"unknown dataset generator {name!r}; expected one of {sorted(GENERATORS)}")
    return GENERATORS[name](**params, seed=seed)
