"""Diagnostics on composed relation vectors: sparsity, average norm, direction classification."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingStore
from .operators import RelationOperator, compose_rows

DEFAULT_EPS_GRID = (0.0, 0.001, 0.01, 0.05, 0.1, 0.2)


def sparsity(x, eps: float) -> float:
    """Fraction of entries with |x_i| <= eps."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty vector")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return float(np.mean(np.abs(x) <= eps))


@dataclass
class SparsityCurve:
    epsilon_grid: tuple[float, ...]
    values: dict[str, list[float]] = field(default_factory=dict)

    def rows(self):
        for op, vals in self.values.items():
            for eps, v in zip(self.epsilon_grid, vals):
                yield op, eps, v

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("operator,epsilon,mean_sparsity\n")
            for op, eps, v in self.rows():
                fh.write(f"{op},{eps!r},{v!r}\n")


def _composed(pairs, store, op):
    vecs, kept = compose_rows(store, op, list(pairs))
    if not kept.any():
        raise ValueError("every pair is out of vocabulary")
    return vecs


def average_sparsity(pairs: Sequence[tuple[str, str]], store: EmbeddingStore, ops,
                     eps_grid: Sequence[float] = DEFAULT_EPS_GRID) -> SparsityCurve:
    """Mean sparsity of the composed vectors for each operator and threshold."""
    grid = tuple(float(e) for e in eps_grid)
    if any(e < 0 for e in grid) or list(grid) != sorted(grid):
        raise ValueError("eps grid must be ascending and non-negative")
    if isinstance(ops, (str, RelationOperator)):
        ops = [ops]
    curve = SparsityCurve(grid)
    for op in ops:
        op = RelationOperator.parse(op)
        a = np.abs(_composed(pairs, store, op))
        curve.values[op.value] = [float(np.mean(np.mean(a <= e, axis=1))) for e in grid]
    return curve


def average_norm(pairs: Sequence[tuple[str, str]], store: EmbeddingStore, op) -> float:
    """Mean l2 norm of the composed relation vectors."""
    return float(np.mean(np.linalg.norm(_composed(pairs, store, op), axis=1)))


def sample_pairs(pairs: Sequence, k: int, seed: int) -> list:
    """``k`` pairs drawn without replacement (all of them if fewer)."""
    pairs = list(pairs)
    if k >= len(pairs):
        return pairs
    idx = np.random.default_rng(seed).choice(len(pairs), size=k, replace=False)
    return [pairs[i] for i in sorted(idx)]


# --- linear max-margin classifier ------------------------------------------

@dataclass
class LinearClassifier:
    weights: np.ndarray
    bias: float
    cost: float
    objective_trace: list[float] = field(default_factory=list)

    def decision(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def predict(self, x) -> np.ndarray:
        return np.where(self.decision(x) >= 0, 1, -1)


def svm_objective(w, b, x, y, lam) -> float:
    margins = y * (x @ w + b)
    return float(0.5 * lam * (w @ w) + np.mean(np.maximum(0.0, 1.0 - margins)))


def train_linear_classifier(features, labels, cost: float = 1.0, seed: int = 0,
                            epochs: int = 300) -> LinearClassifier:
    """Hinge loss + l2 penalty by full-batch subgradient descent.

    Objective: lam/2 ||w||^2 + mean(hinge), lam = 1 / (cost * N), step size
    1 / (lam * t). The bias is unregularised. The best iterate seen is
    returned and ``objective_trace`` records the best objective so far.
    Training starts from zero and is deterministic; ``seed`` is accepted for
    interface uniformity only.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("features must be (N, d) with one label per row")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be +1/-1")
    if len(np.unique(y)) < 2:
        raise ValueError("both classes must be present")
    if cost <= 0:
        raise ValueError("cost must be positive")
    n, d = x.shape
    lam = 1.0 / (cost * n)
    w = np.zeros(d)
    b = 0.0
    best = (svm_objective(w, b, x, y, lam), w.copy(), b)
    trace = [best[0]]
    for t in range(1, epochs + 1):
        eta = 1.0 / (lam * t)
        viol = y * (x @ w + b) < 1.0
        grad_w = lam * w - (y[viol] @ x[viol]) / n
        grad_b = -np.sum(y[viol]) / n
        w = w - eta * grad_w
        b = b - eta * grad_b
        obj = svm_objective(w, b, x, y, lam)
        if obj < best[0]:
            best = (obj, w.copy(), b)
        trace.append(best[0])
    return LinearClassifier(best[1], float(best[2]), cost, trace)


# --- direction (asymmetry) classification -----------------------------------

@dataclass
class DirectionDataset:
    relation: str
    pairs: list[tuple[str, str]]

    def reversed(self) -> list[tuple[str, str]]:
        return [(b, a) for a, b in self.pairs]


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Seeded shuffle then contiguous split into ``folds`` nearly equal parts."""
    perm = np.random.default_rng(seed).permutation(n)
    out = np.empty(n, dtype=np.int64)
    for f, chunk in enumerate(np.array_split(perm, folds)):
        out[chunk] = f
    return out


def asymmetry_cv(dataset: DirectionDataset, store: EmbeddingStore, op, folds: int = 5,
                 cost: float = 1.0, seed: int = 0, epochs: int = 300) -> float:
    """Mean held-out accuracy of original (+1) vs swapped (-1) relation vectors.

    Folds are assigned per word pair, so a pair and its reversal are always in
    the same fold.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    op = RelationOperator.parse(op)
    fwd, kept = compose_rows(store, op, dataset.pairs)
    rev, _ = compose_rows(store, op, dataset.reversed())
    n = len(fwd)
    if n < folds:
        raise ValueError(f"relation {dataset.relation}: {n} usable pairs for {folds} folds")
    assign = fold_assignment(n, folds, seed)
    accs = []
    for f in range(folds):
        tr, te = assign != f, assign == f
        if not tr.any() or not te.any():
            raise ValueError("fold without both classes")
        x_tr = np.vstack([fwd[tr], rev[tr]])
        y_tr = np.concatenate([np.ones(tr.sum()), -np.ones(tr.sum())])
        clf = train_linear_classifier(x_tr, y_tr, cost=cost, seed=seed, epochs=epochs)
        x_te = np.vstack([fwd[te], rev[te]])
        y_te = np.concatenate([np.ones(te.sum()), -np.ones(te.sum())])
        accs.append(float(np.mean(clf.predict(x_te) == y_te)))
    return float(np.mean(accs))


def asymmetry_by_relation(datasets: Sequence[DirectionDataset], store: EmbeddingStore, op,
                          folds: int = 5, cost: float = 1.0, seed: int = 0,
                          epochs: int = 300) -> dict[str, float]:
    return {d.relation: asymmetry_cv(d, store, op, folds, cost, seed, epochs) for d in datasets}


def group_by_relation(triples) -> list[DirectionDataset]:
    groups: dict[str, list] = {}
    for w1, w2, rel in triples:
        groups.setdefault(rel, []).append((w1, w2))
    return [DirectionDataset(rel, pairs) for rel, pairs in groups.items()]
