"""1-nearest-neighbour relation classification over composed relation vectors."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingStore
from .operators import RelationOperator, compose_rows
from .reports import EvalReport

METRICS = ("cosine", "euclidean")


@dataclass(frozen=True)
class LabeledPair:
    w1: str
    w2: str
    relation: str

    def __post_init__(self):
        if not self.relation:
            raise ValueError("empty relation label")


def read_labeled_pairs(path: str | Path) -> list[LabeledPair]:
    """TSV ``w1 w2 relation_label``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split("\t") if "\t" in line else line.split()
            parts = [p.strip() for p in parts if p.strip()]
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 3:
                raise ValueError(f"{path}:line {lineno}: expected 'w1 w2 relation'")
            out.append(LabeledPair(*parts))
    return out


def _unit_rows(x):
    n = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(n < 1e-12, np.inf, n)


def nearest_neighbours(queries: np.ndarray, pool: np.ndarray, metric: str = "cosine",
                       exclude_self: bool = False, chunk: int = 1024) -> np.ndarray:
    """Index into ``pool`` of each query's nearest neighbour; ties to lowest index.

    With ``exclude_self`` queries and pool are the same rows and the diagonal
    is skipped (leave-one-out).
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if metric == "cosine":
        q, p = _unit_rows(queries), _unit_rows(pool)
    else:
        q, p = queries, pool
        p_sq = (p * p).sum(axis=1)
    out = np.empty(len(q), dtype=np.int64)
    for s in range(0, len(q), chunk):
        block = q[s:s + chunk]
        if metric == "cosine":
            score = block @ p.T
        else:
            # maximise -||q - p||^2 = 2 q.p - ||p||^2 - ||q||^2
            score = 2.0 * block @ p.T - p_sq[None, :]
        if exclude_self:
            r = np.arange(len(block))
            score[r, s + r] = -np.inf
        out[s:s + len(block)] = np.argmax(score, axis=1)
    return out


def eval_1nn(dataset: Sequence[LabeledPair], store: EmbeddingStore, op, mode: str = "loo",
             metric: str = "cosine", test_fraction: float = 0.2, seed: int = 0) -> EvalReport:
    """Accuracy = correct matches / classified pairs.

    ``loo``: every in-vocabulary pair is classified by its nearest neighbour
    among all the others. ``split``: a seeded shuffle holds out
    ``test_fraction`` of the pairs, classified against the rest.
    OOV pairs are dropped and reported through coverage.
    """
    op = RelationOperator.parse(op)
    pairs = [(p.w1, p.w2) for p in dataset]
    vecs, kept = compose_rows(store, op, pairs)
    labels = np.array([p.relation for p, k in zip(dataset, kept) if k])
    n = len(labels)
    if n < 2:
        raise ValueError("need at least 2 in-vocabulary pairs for 1-NN")
    if mode == "loo":
        nn = nearest_neighbours(vecs, vecs, metric, exclude_self=True)
        pred, gold = labels[nn], labels
    elif mode == "split":
        perm = np.random.default_rng(seed).permutation(n)
        n_test = max(1, int(round(test_fraction * n)))
        if n_test >= n:
            raise ValueError("test split leaves no training pairs")
        test, train = perm[:n_test], np.sort(perm[n_test:])
        nn = nearest_neighbours(vecs[test], vecs[train], metric)
        pred, gold = labels[train][nn], labels[test]
    else:
        raise ValueError("mode must be 'loo' or 'split'")
    correct = pred == gold
    per_cat = {lab: float(correct[gold == lab].mean()) for lab in dict.fromkeys(gold.tolist())}
    return EvalReport(
        task="eval-diffvec", operator=op.value, accuracy=float(correct.mean()),
        coverage=n / len(dataset), per_category=per_cat,
        metrics={"classified": int(len(gold)), "correct": int(correct.sum()), "mode": mode,
                 "metric": metric, "seed": seed},
    )
