"""Word / entity embedding tables: text I/O, normalisation, lookup, cosine."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

# norms below this are treated as zero by cosine()
DEGENERATE_NORM = 1e-12


class EmbeddingFormatError(ValueError):
    """Malformed embedding file. ``line`` is 1-based, or None for file-level problems."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = f"{path}:" if path else ""
        where += f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class TokenNotFound(KeyError):
    def __init__(self, token: str):
        super().__init__(token)
        self.token = token


@dataclass(frozen=True)
class EmbeddingStore:
    """Immutable vocabulary-indexed table of dense vectors.

    ``casefold`` controls both how tokens were stored and how lookups are
    folded. ``warnings`` tallies non-fatal events (duplicate tokens, zero rows).
    """

    vocab: tuple[str, ...]
    matrix: np.ndarray
    normalized: bool = False
    casefold: bool = True
    warnings: Counter = field(default_factory=Counter, compare=False)
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if matrix.shape[1] < 1:
            raise ValueError("embedding dimensionality must be >= 1")
        if matrix.shape[0] != len(self.vocab):
            raise ValueError(
                f"row count {matrix.shape[0]} != vocabulary size {len(self.vocab)}")
        index = {}
        for i, tok in enumerate(self.vocab):
            if tok in index:
                raise ValueError(f"duplicate token {tok!r}")
            index[tok] = i
        matrix.setflags(write=False)
        object.__setattr__(self, "vocab", tuple(self.vocab))
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "index", index)

    @classmethod
    def from_pairs(cls, items: Iterable[tuple[str, Sequence[float]]], casefold: bool = True,
                   normalized: bool = False) -> "EmbeddingStore":
        vocab, rows, seen, dups = [], [], set(), 0
        for tok, vec in items:
            key = tok.lower() if casefold else tok
            if key in seen:
                dups += 1
                continue
            seen.add(key)
            vocab.append(key)
            rows.append(np.asarray(vec, dtype=np.float64))
        if not rows:
            raise ValueError("no vectors given")
        store = cls(tuple(vocab), np.vstack(rows), normalized=normalized, casefold=casefold)
        if dups:
            store.warnings["duplicate_tokens"] += dups
        return store

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def key(self, token: str) -> str:
        return token.lower() if self.casefold else token

    def __contains__(self, token: str) -> bool:
        return self.key(token) in self.index

    def index_of(self, token: str) -> int:
        try:
            return self.index[self.key(token)]
        except KeyError:
            raise TokenNotFound(token) from None

    def get(self, token: str) -> np.ndarray | None:
        i = self.index.get(self.key(token))
        return None if i is None else self.matrix[i]

    def rows(self, tokens: Sequence[str]) -> np.ndarray:
        return self.matrix[[self.index_of(t) for t in tokens]]


def lookup(store: EmbeddingStore, token: str) -> np.ndarray:
    """Row for ``token``; raises TokenNotFound on a miss."""
    return store.matrix[store.index_of(token)]


def _parse_float_row(fields, lineno, path):
    try:
        return [float(x) for x in fields]
    except ValueError:
        bad = next(x for x in fields if not _is_float(x))
        raise EmbeddingFormatError(f"non-numeric value {bad!r}", lineno, path) from None


def _is_float(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_embeddings(path: str | Path, casefold: bool = True) -> EmbeddingStore:
    """Read the ``token v1 ... vn`` text format.

    A first line consisting of exactly two integers is taken as a
    ``count dim`` header. Duplicate tokens keep their first occurrence.
    """
    path = str(path)
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise EmbeddingFormatError(f"cannot read file: {exc.strerror}", None, path) from None

    vocab, rows, seen = [], [], set()
    dups = 0
    dim = None
    header_dim = None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.rstrip(" ").split(" ")
            if lineno == 1 and len(fields) == 2 and all(f.lstrip("-").isdigit() for f in fields):
                header_dim = int(fields[1])
                continue
            if len(fields) < 2:
                raise EmbeddingFormatError("line has a token but no values", lineno, path)
            tok, values = fields[0], fields[1:]
            if dim is None:
                dim = len(values)
                if header_dim is not None and header_dim != dim:
                    raise EmbeddingFormatError(
                        f"header declares dim {header_dim} but row has {dim} values", lineno, path)
            elif len(values) != dim:
                raise EmbeddingFormatError(
                    f"dimension mismatch: expected {dim} values, found {len(values)}", lineno, path)
            vec = _parse_float_row(values, lineno, path)
            key = tok.lower() if casefold else tok
            if key in seen:
                dups += 1
                continue
            seen.add(key)
            vocab.append(key)
            rows.append(vec)
    if not rows:
        raise EmbeddingFormatError("empty embedding file", None, path)
    store = EmbeddingStore(tuple(vocab), np.asarray(rows, dtype=np.float64), casefold=casefold)
    if dups:
        log.warning("%s: %d duplicate tokens ignored (first occurrence kept)", path, dups)
        store.warnings["duplicate_tokens"] += dups
    return store


def save_embeddings(store: EmbeddingStore, path: str | Path, header: bool = False) -> None:
    """Write the text format with 9 significant digits per value."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(store)} {store.dim}\n")
        for tok, row in zip(store.vocab, store.matrix):
            fh.write(tok + " " + " ".join(f"{v:.9g}" for v in row) + "\n")


def normalize(store: EmbeddingStore) -> EmbeddingStore:
    """Scale every non-zero row to unit l2 norm.

    Zero rows are kept as-is and counted in ``warnings["zero_rows"]`` of the
    returned store.
    """
    norms = np.linalg.norm(store.matrix, axis=1)
    zero = norms == 0
    scaled = store.matrix / np.where(zero, 1.0, norms)[:, None]
    out = EmbeddingStore(store.vocab, scaled, normalized=True, casefold=store.casefold)
    out.warnings.update(store.warnings)
    out.warnings["zero_rows"] = int(zero.sum())
    if zero.any():
        log.warning("%d zero rows left unnormalised", int(zero.sum()))
    return out


def cosine(x, y, return_flag: bool = False):
    """Cosine similarity; 0.0 (flagged degenerate) if either norm < 1e-12."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx < DEGENERATE_NORM or ny < DEGENERATE_NORM:
        return (0.0, True) if return_flag else 0.0
    value = float(np.clip(x @ y / (nx * ny), -1.0, 1.0))
    return (value, False) if return_flag else value


def cosine_rows(query: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Cosine of one query against each row; degenerate rows score 0."""
    qn = np.linalg.norm(query)
    rn = np.linalg.norm(rows, axis=1)
    if qn < DEGENERATE_NORM:
        return np.zeros(len(rows))
    denom = np.where(rn < DEGENERATE_NORM, np.inf, rn * qn)
    return np.clip(rows @ query / denom, -1.0, 1.0)
