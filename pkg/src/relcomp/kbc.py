"""Knowledge base completion with mean relation prototypes (raw ranking)."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingStore, TokenNotFound
from .operators import RelationOperator, candidate_scores, compose
from .reports import EvalReport

log = logging.getLogger(__name__)


class UnknownRelation(KeyError):
    pass


@dataclass(frozen=True)
class KnowledgeTriple:
    head: str
    relation: str
    tail: str

    def __post_init__(self):
        if not (self.head and self.relation and self.tail):
            raise ValueError("knowledge triple has an empty field")


@dataclass
class RelationPrototypeTable:
    operator: RelationOperator
    prototypes: dict[str, np.ndarray] = field(default_factory=dict)
    support: dict[str, int] = field(default_factory=dict)
    skipped: int = 0

    def __contains__(self, relation: str) -> bool:
        return relation in self.prototypes

    def __getitem__(self, relation: str) -> np.ndarray:
        try:
            return self.prototypes[relation]
        except KeyError:
            raise UnknownRelation(relation) from None


@dataclass(frozen=True)
class RankResult:
    rank: int
    top: tuple[tuple[str, float], ...]


def read_triples(path: str | Path) -> list[KnowledgeTriple]:
    """TSV ``head relation tail``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:line {lineno}: expected 'head relation tail'")
            out.append(KnowledgeTriple(*(p.strip() for p in parts)))
    return out


def build_relation_prototypes(train: Iterable[KnowledgeTriple], entities: EmbeddingStore,
                              op) -> RelationPrototypeTable:
    """Per relation, the mean of f(head, tail) over its training pairs."""
    op = RelationOperator.parse(op)
    heads, tails = defaultdict(list), defaultdict(list)
    seen = []
    skipped = 0
    for t in train:
        if t.relation not in heads:
            seen.append(t.relation)
            heads[t.relation]
        if t.head not in entities or t.tail not in entities:
            skipped += 1
            continue
        heads[t.relation].append(entities.index_of(t.head))
        tails[t.relation].append(entities.index_of(t.tail))
    table = RelationPrototypeTable(op, skipped=skipped)
    m = entities.matrix
    for rel in seen:
        if not heads[rel]:
            raise ValueError(f"relation {rel!r} has no training pair with known entities")
        composed = compose(op, m[heads[rel]], m[tails[rel]])
        table.prototypes[rel] = composed.mean(axis=0)
        table.support[rel] = len(heads[rel])
    if skipped:
        log.warning("%d training triples skipped (unknown entity)", skipped)
    return table


def _scores(side, op, proto, fixed_vec, cand):
    # tail: cos(r, f(h, e)); head: cos(r, f(e, t))
    return candidate_scores(op, proto, fixed_vec, cand, side="right" if side == "tail" else "left")


def rank_entities(query: KnowledgeTriple, side: str, prototypes: RelationPrototypeTable,
                  entities: EmbeddingStore, op=None, candidates: Sequence[str] | None = None,
                  top_k: int = 10) -> RankResult:
    """Rank of the gold head/tail among candidates: 1 + #strictly higher scores."""
    if side not in ("head", "tail"):
        raise ValueError("side must be 'head' or 'tail'")
    op = prototypes.operator if op is None else RelationOperator.parse(op)
    proto = prototypes[query.relation]
    gold_tok = query.tail if side == "tail" else query.head
    fixed_tok = query.head if side == "tail" else query.tail
    rows = (np.arange(len(entities)) if candidates is None
            else np.array([entities.index_of(c) for c in candidates], dtype=np.int64))
    gold = entities.index_of(gold_tok)
    where = np.flatnonzero(rows == gold)
    if not len(where):
        raise TokenNotFound(gold_tok)
    s = _scores(side, op, proto, entities.matrix[entities.index_of(fixed_tok)],
                entities.matrix[rows])[0]
    rank = 1 + int(np.sum(s > s[where[0]]))
    order = np.argsort(-s, kind="stable")[:top_k]
    return RankResult(rank, tuple((entities.vocab[rows[i]], float(s[i])) for i in order))


def eval_kbc(test: Sequence[KnowledgeTriple], prototypes: RelationPrototypeTable,
             entities: EmbeddingStore, op=None, batch_size: int = 256,
             known: Iterable[KnowledgeTriple] | None = None) -> EvalReport:
    """Mean Rank and Hits@10 over head and tail predictions, all entities as candidates.

    Rankings are raw unless ``known`` triples are given, in which case other
    known true entities are removed from the count (filtered setting).
    Triples with an unseen relation or unknown entity are skipped.
    """
    if not test:
        raise ValueError("empty test set")
    op = prototypes.operator if op is None else RelationOperator.parse(op)
    usable = [t for t in test
              if t.relation in prototypes and t.head in entities and t.tail in entities]
    filt = None
    if known is not None:
        filt = defaultdict(set)
        for t in known:
            if t.head in entities and t.tail in entities:
                h, r, tl = entities.index_of(t.head), t.relation, entities.index_of(t.tail)
                filt[("tail", h, r)].add(tl)
                filt[("head", tl, r)].add(h)
    m = entities.matrix
    e_sq = (m * m).sum(axis=1)
    ranks = {"head": [], "tail": []}
    for side in ("tail", "head"):
        for s in range(0, len(usable), batch_size):
            chunk = usable[s:s + batch_size]
            protos = np.vstack([prototypes[t.relation] for t in chunk])
            fixed_idx = [entities.index_of(t.head if side == "tail" else t.tail) for t in chunk]
            gold_idx = np.array([entities.index_of(t.tail if side == "tail" else t.head)
                                 for t in chunk])
            sc = candidate_scores(op, protos, m[fixed_idx], m,
                                  side="right" if side == "tail" else "left", cand_sqnorm=e_sq)
            gold_s = sc[np.arange(len(chunk)), gold_idx]
            higher = sc > gold_s[:, None]
            if filt is not None:
                for q, t in enumerate(chunk):
                    others = filt.get((side, fixed_idx[q], t.relation), set()) - {gold_idx[q]}
                    if others:
                        higher[q, list(others)] = False
            ranks[side].extend((1 + higher.sum(axis=1)).tolist())
    all_ranks = np.array(ranks["head"] + ranks["tail"], dtype=np.float64)
    if not len(all_ranks):
        mr = h10 = None
    else:
        mr = float(all_ranks.mean())
        h10 = float(100.0 * np.mean(all_ranks <= 10))
    return EvalReport(
        task="eval-kbc", operator=op.value, accuracy=None,
        coverage=len(usable) / len(test),
        metrics={
            "mean_rank": mr, "hits_at_10": h10,
            "mean_rank_head": float(np.mean(ranks["head"])) if ranks["head"] else None,
            "mean_rank_tail": float(np.mean(ranks["tail"])) if ranks["tail"] else None,
            "evaluated": len(usable), "skipped": len(test) - len(usable),
            "setting": "filtered" if filt is not None else "raw",
        },
    )
