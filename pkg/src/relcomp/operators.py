"""Unsupervised relation composition operators and batched relational scoring."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingStore


class RelationOperator(str, enum.Enum):
    PAIRDIFF = "pairdiff"
    CONCAT = "concat"
    ADD = "add"
    MULT = "mult"

    @classmethod
    def parse(cls, name: "str | RelationOperator") -> "RelationOperator":
        if isinstance(name, cls):
            return name
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(op.value for op in cls)
            raise ValueError(f"unknown operator {name!r} (expected one of {valid})") from None

    @property
    def commutative(self) -> bool:
        return self in (RelationOperator.ADD, RelationOperator.MULT)

    def output_dim(self, n: int) -> int:
        return 2 * n if self is RelationOperator.CONCAT else n


ALL_OPERATORS = tuple(RelationOperator)


@dataclass(frozen=True)
class RelationVector:
    entries: np.ndarray
    operator: RelationOperator
    source_pair: tuple[str, str]


def compose(op, a, b) -> np.ndarray:
    """Relation vector for (a, b). Works row-wise on 2-D inputs as well.

    pairdiff: b - a; concat: [a, b]; add: a + b; mult: a * b.
    """
    op = RelationOperator.parse(op)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if op is RelationOperator.PAIRDIFF:
        return b - a
    if op is RelationOperator.ADD:
        return a + b
    if op is RelationOperator.MULT:
        return a * b
    return np.concatenate([a, b], axis=-1)


def compose_pair(store: EmbeddingStore, op, w1: str, w2: str) -> RelationVector:
    op = RelationOperator.parse(op)
    vec = compose(op, store.matrix[store.index_of(w1)], store.matrix[store.index_of(w2)])
    return RelationVector(vec, op, (w1, w2))


def compose_rows(store: EmbeddingStore, op, pairs) -> tuple[np.ndarray, np.ndarray]:
    """Compose every in-vocabulary pair.

    Returns ``(vectors, kept)`` where ``kept`` is a boolean mask over ``pairs``.
    """
    kept = np.array([(a in store and b in store) for a, b in pairs], dtype=bool)
    idx_a = [store.index_of(a) for (a, _), k in zip(pairs, kept) if k]
    idx_b = [store.index_of(b) for (_, b), k in zip(pairs, kept) if k]
    m = store.matrix
    return compose(op, m[idx_a], m[idx_b]).reshape(len(idx_a), -1), kept


@dataclass(frozen=True)
class CorrelationMatrix:
    values: np.ndarray
    zero_variance: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def off_diagonal(self) -> np.ndarray:
        mask = ~np.eye(self.n, dtype=bool)
        return self.values[mask]


def dimension_correlation(store: EmbeddingStore | np.ndarray) -> CorrelationMatrix:
    """Pearson correlation between every pair of embedding dimensions.

    Zero-variance columns get 1 on the diagonal and 0 elsewhere and are listed
    in ``zero_variance``.
    """
    w = store.matrix if isinstance(store, EmbeddingStore) else np.asarray(store, dtype=np.float64)
    if w.shape[0] < 2:
        raise ValueError("need at least 2 rows to correlate dimensions")
    centered = w - w.mean(axis=0)
    ss = np.sqrt((centered ** 2).sum(axis=0))
    flat = ss == 0
    scaled = centered / np.where(flat, 1.0, ss)
    c = scaled.T @ scaled
    c = np.clip((c + c.T) / 2, -1.0, 1.0)
    c[flat, :] = 0.0
    c[:, flat] = 0.0
    np.fill_diagonal(c, 1.0)
    return CorrelationMatrix(c, tuple(int(i) for i in np.flatnonzero(flat)))


# Candidate scoring.
#
# For a query whose composed target vector is ``target`` and whose fixed side
# is the vector ``fixed``, score every candidate ``e`` by
# cos(target, f(fixed, e)) (side="right") or cos(target, f(e, fixed))
# (side="left").  The dot products and squared norms are expanded so a batch
# of queries reduces to matrix products against the candidate matrix.

# composed squared norms below this fraction of the operand scale are
# cancellation noise around an exact zero vector
_REL_ZERO = 1e-12


def candidate_scores(op, targets, fixed, candidates, side: str = "right",
                     cand_sqnorm=None) -> np.ndarray:
    """Cosine scores, shape (queries, candidates). Degenerate vectors score 0."""
    op = RelationOperator.parse(op)
    T = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    F = np.atleast_2d(np.asarray(fixed, dtype=np.float64))
    E = np.asarray(candidates, dtype=np.float64)
    n = E.shape[1]
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if T.shape[1] != op.output_dim(n) or F.shape[1] != n:
        raise ValueError("dimension mismatch between targets, fixed vectors and candidates")
    e2 = (E * E).sum(axis=1) if cand_sqnorm is None else cand_sqnorm
    f2 = (F * F).sum(axis=1)

    if op is RelationOperator.MULT:
        dot = (T * F) @ E.T
        sq = (F * F) @ (E * E).T
        scale = sq
    elif op is RelationOperator.CONCAT:
        if side == "right":
            t_fixed, t_cand = T[:, :n], T[:, n:]
        else:
            t_cand, t_fixed = T[:, :n], T[:, n:]
        dot = (t_fixed * F).sum(axis=1)[:, None] + t_cand @ E.T
        sq = f2[:, None] + e2[None, :]
        scale = sq
    else:
        # pairdiff right: e - f, pairdiff left: f - e, add: f + e
        if op is RelationOperator.ADD:
            sign = 1.0
            cand_sign = 1.0
        else:
            sign = -1.0
            cand_sign = 1.0 if side == "right" else -1.0
        fixed_sign = sign * cand_sign
        tf = (T * F).sum(axis=1)
        dot = cand_sign * (T @ E.T) + fixed_sign * tf[:, None]
        cross = F @ E.T
        scale = f2[:, None] + e2[None, :]
        sq = scale + 2.0 * sign * cross
    t_norm = np.sqrt((T * T).sum(axis=1))
    x_norm = np.sqrt(np.clip(sq, 0.0, None))
    degenerate = (sq <= _REL_ZERO * scale) | (x_norm < 1e-12) | (t_norm[:, None] < 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = dot / (t_norm[:, None] * x_norm)
    out = np.where(degenerate, 0.0, out)
    return np.clip(out, -1.0, 1.0)
