"""Count-based word vectors: co-occurrence counting, PPMI, truncated SVD, NMF."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .embeddings import EmbeddingStore

log = logging.getLogger(__name__)

WEIGHTINGS = ("inverse-distance", "uniform")
NMF_EPS = 1e-12


@dataclass
class CooccurrenceMatrix:
    """Square sparse word-by-word table; targets and contexts share ``vocab``."""

    vocab: tuple[str, ...]
    counts: sp.csr_matrix
    window: int = 5
    weighting: str = "inverse-distance"

    def __post_init__(self):
        self.counts = sp.csr_matrix(self.counts, dtype=np.float64)
        self.counts.eliminate_zeros()
        if self.counts.shape != (len(self.vocab), len(self.vocab)):
            raise ValueError("count table shape does not match vocabulary")
        self._index = {w: i for i, w in enumerate(self.vocab)}

    def __getitem__(self, pair: tuple[str, str]) -> float:
        x, y = pair
        return float(self.counts[self._index[x], self._index[y]])

    def total(self) -> float:
        return float(self.counts.sum())

    def to_dense(self) -> np.ndarray:
        return self.counts.toarray()


@dataclass
class FactorizationResult:
    left: np.ndarray
    right: np.ndarray
    singular_values: np.ndarray | None = None
    objective_trace: list[float] = field(default_factory=list)
    n_iter: int = 0

    def reconstruct(self) -> np.ndarray:
        if self.singular_values is None:
            return self.left @ self.right
        return (self.left * self.singular_values) @ self.right


def _sentences(corpus) -> list[list[str]]:
    corpus = list(corpus)
    if corpus and all(isinstance(t, str) for t in corpus):
        return [corpus]
    return [list(s) for s in corpus]


def build_cooccurrence(corpus: Iterable, window: int = 5, weighting: str = "inverse-distance",
                       vocab_size: int = 50_000) -> CooccurrenceMatrix:
    """Symmetric windowed co-occurrence counts over the most frequent tokens.

    ``corpus`` is either one token sequence or an iterable of sentences
    (token sequences); windows never cross sentence boundaries. Each pair of
    in-vocabulary tokens at distance d <= window adds 1/d (or 1 for uniform
    weighting) to both (x, y) and (y, x).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if vocab_size < 1:
        raise ValueError("vocab_size must be >= 1")
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}")
    sentences = _sentences(corpus)
    freq = Counter()
    first = {}
    pos = 0
    for sent in sentences:
        for tok in sent:
            freq[tok] += 1
            if tok not in first:
                first[tok] = pos
            pos += 1
    if not freq:
        raise ValueError("empty corpus")
    ranked = sorted(freq, key=lambda t: (-freq[t], first[t]))[:vocab_size]
    index = {t: i for i, t in enumerate(ranked)}
    V = len(ranked)

    rows, cols, vals = [], [], []
    for sent in sentences:
        ids = np.fromiter((index.get(t, -1) for t in sent), dtype=np.int64, count=len(sent))
        for d in range(1, min(window, len(ids) - 1) + 1):
            left, right = ids[:-d], ids[d:]
            ok = (left >= 0) & (right >= 0)
            if not ok.any():
                continue
            w = 1.0 / d if weighting == "inverse-distance" else 1.0
            l, r = left[ok], right[ok]
            rows += [l, r]
            cols += [r, l]
            vals += [np.full(len(l), w), np.full(len(l), w)]
    if rows:
        m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(V, V)).tocsr()
        m.sum_duplicates()
    else:
        m = sp.csr_matrix((V, V))
    return CooccurrenceMatrix(tuple(ranked), m, window, weighting)


def ppmi(m: CooccurrenceMatrix) -> CooccurrenceMatrix:
    """max(0, ln p(x,y) / (p(x) p(y))) with maximum-likelihood probabilities."""
    c = m.counts.tocoo()
    total = c.sum()
    if total <= 0:
        raise ValueError("cannot compute PPMI of an all-zero matrix")
    row = np.asarray(m.counts.sum(axis=1)).ravel()
    col = np.asarray(m.counts.sum(axis=0)).ravel()
    pmi = np.log(c.data * total / (row[c.row] * col[c.col]))
    keep = pmi > 0
    out = sp.coo_matrix((pmi[keep], (c.row[keep], c.col[keep])), shape=c.shape).tocsr()
    return CooccurrenceMatrix(m.vocab, out, m.window, m.weighting)


def _as_operand(m):
    if isinstance(m, CooccurrenceMatrix):
        return m.counts
    if sp.issparse(m):
        return m.tocsr().astype(np.float64)
    return np.asarray(m, dtype=np.float64)


def _fix_signs(u, vt):
    # largest-magnitude entry of each left column made positive
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivot, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, vt * signs[:, None]


def truncated_svd(m, k: int, seed: int = 0, oversample: int = 10,
                  power_iter: int = 7) -> FactorizationResult:
    """Rank-k SVD by seeded randomized subspace iteration.

    Returns left singular vectors (m x k), singular values (descending) and
    right singular vectors (k x n).
    """
    a = _as_operand(m)
    rows, cols = a.shape
    if not 1 <= k <= min(rows, cols):
        raise ValueError(f"k={k} out of range [1, {min(rows, cols)}]")
    width = min(k + oversample, min(rows, cols))
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((cols, width))
    q, _ = np.linalg.qr(a @ omega)
    for _ in range(power_iter):
        z, _ = np.linalg.qr(a.T @ q)
        q, _ = np.linalg.qr(a @ z)
    b = np.asarray((a.T @ q).T)
    ub, s, vt = np.linalg.svd(b, full_matrices=False)
    u = q @ ub[:, :k]
    u, vt = _fix_signs(u, vt[:k])
    return FactorizationResult(left=u, right=vt, singular_values=s[:k])


def svd_embeddings(m: CooccurrenceMatrix, k: int = 300, seed: int = 0) -> EmbeddingStore:
    """Word vectors = left singular vectors scaled by singular values."""
    res = truncated_svd(m, k, seed=seed)
    return EmbeddingStore(m.vocab, res.left * res.singular_values, casefold=False)


def _nmf_objective(a, g, h, a_sq):
    if sp.issparse(a):
        # ||A - GH||^2 expanded to stay sparse
        cross = np.sum((a @ h.T) * g)
        val = a_sq - 2.0 * cross + np.sum((g.T @ g) * (h @ h.T))
        return max(float(val), 0.0)
    r = a - g @ h
    return float(np.sum(r * r))


def nmf(m, d: int, max_iter: int = 200, tol: float = 1e-4, seed: int = 0) -> FactorizationResult:
    """Frobenius-loss NMF with Lee-Seung multiplicative updates.

    Factors start uniform on (0, 1]. Stops when the relative objective decrease
    falls below ``tol`` (or the objective reaches 0) or after ``max_iter``
    iterations. ``objective_trace[i]`` is ||A - GH||_F^2 after iteration i+1.
    """
    a = _as_operand(m)
    rows, cols = a.shape
    data = a.data if sp.issparse(a) else a
    if np.any(data < 0):
        raise ValueError("NMF input has negative entries")
    if not 1 <= d <= min(rows, cols):
        raise ValueError(f"d={d} out of range [1, {min(rows, cols)}]")
    rng = np.random.default_rng(seed)
    # 1 - U[0, 1) lies in (0, 1]
    g = 1.0 - rng.random((rows, d))
    h = 1.0 - rng.random((d, cols))
    a_sq = float(np.sum(data * data))

    trace = []
    prev = None
    it = 0
    for it in range(1, max_iter + 1):
        h *= np.asarray(g.T @ a) / (g.T @ g @ h + NMF_EPS)
        g *= np.asarray(a @ h.T) / (g @ (h @ h.T) + NMF_EPS)
        obj = _nmf_objective(a, g, h, a_sq)
        trace.append(obj)
        if obj == 0.0:
            break
        if prev is not None and (prev - obj) / prev < tol:
            break
        prev = obj
    return FactorizationResult(left=g, right=h, objective_trace=trace, n_iter=it)


def nmf_embeddings(m: CooccurrenceMatrix, d: int = 300, max_iter: int = 200, tol: float = 1e-4,
                   seed: int = 0) -> EmbeddingStore:
    res = nmf(m, d, max_iter=max_iter, tol=tol, seed=seed)
    return EmbeddingStore(m.vocab, res.left, casefold=False)


def read_corpus(path: str | Path, lowercase: bool = True) -> list[list[str]]:
    """One sentence per line, whitespace-tokenised."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            toks = (line.lower() if lowercase else line).split()
            if toks:
                out.append(toks)
    return out


def save_matrix(m: CooccurrenceMatrix, path: str | Path) -> None:
    """Sparse ``row_token col_token weight`` lines, vocabulary order in a header comment."""
    c = m.counts.tocoo()
    order = np.lexsort((c.col, c.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# window={m.window} weighting={m.weighting}\n")
        fh.write("# vocab: " + " ".join(m.vocab) + "\n")
        for i in order:
            fh.write(f"{m.vocab[c.row[i]]} {m.vocab[c.col[i]]} {c.data[i]:.17g}\n")


def load_matrix(path: str | Path) -> CooccurrenceMatrix:
    vocab: list[str] = []
    meta = {}
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("vocab:"):
                    vocab = body[len("vocab:"):].split()
                else:
                    for kv in body.split():
                        if "=" in kv:
                            k, v = kv.split("=", 1)
                            meta[k] = v
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:line {lineno}: expected 'row col weight'")
            try:
                triples.append((parts[0], parts[1], float(parts[2])))
            except ValueError:
                raise ValueError(f"{path}:line {lineno}: non-numeric weight {parts[2]!r}") from None
    index = {w: i for i, w in enumerate(vocab)}
    for r, c, _ in triples:
        for t in (r, c):
            if t not in index:
                index[t] = len(vocab)
                vocab.append(t)
    V = len(vocab)
    if triples:
        rows = [index[r] for r, _, _ in triples]
        cols = [index[c] for _, c, _ in triples]
        vals = [w for _, _, w in triples]
        counts = sp.coo_matrix((vals, (rows, cols)), shape=(V, V)).tocsr()
    else:
        counts = sp.csr_matrix((V, V))
    return CooccurrenceMatrix(tuple(vocab), counts, int(meta.get("window", 5)),
                              meta.get("weighting", "inverse-distance"))
