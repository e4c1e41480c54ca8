"""Relational similarity benchmarks: SAT, SemEval-2012 Task 2 and analogy completion."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingStore, cosine
from .operators import RelationOperator, candidate_scores, compose
from .reports import EvalReport

OOV_POLICIES = ("incorrect", "skip")

Pair = tuple[str, str]


@dataclass(frozen=True)
class AnalogyQuestion:
    stem: Pair
    choices: tuple[Pair, ...]
    answer_index: int

    def __post_init__(self):
        if not 0 <= self.answer_index < len(self.choices):
            raise ValueError("answer_index outside choice range")


@dataclass(frozen=True)
class CompletionItem:
    a: str
    b: str
    c: str
    d_gold: str
    category: str = "default"
    category_kind: str = "syntactic"

    def __post_init__(self):
        if not all((self.a, self.b, self.c, self.d_gold)):
            raise ValueError("completion item has an empty token")


@dataclass(frozen=True)
class MaxDiffQuestion:
    candidates: tuple[Pair, ...]
    gold_most: int
    gold_least: int


@dataclass
class SemEvalSubcategory:
    name: str
    prototypes: list[Pair]
    members: list[Pair] = field(default_factory=list)
    maxdiff_questions: list[MaxDiffQuestion] = field(default_factory=list)

    def __post_init__(self):
        if not self.prototypes:
            raise ValueError(f"subcategory {self.name} has no prototypes")


@dataclass(frozen=True)
class SatAnswer:
    chosen: int | None
    scores: tuple[float | None, ...]


def _relvec(store, op, pair):
    a, b = pair
    va, vb = store.get(a), store.get(b)
    if va is None or vb is None:
        return None
    return compose(op, va, vb)


def _argmax(scores):
    best = None
    for i, s in enumerate(scores):
        if s is not None and (best is None or s > scores[best]):
            best = i
    return best


def _argmin(scores):
    best = None
    for i, s in enumerate(scores):
        if s is not None and (best is None or s < scores[best]):
            best = i
    return best


def _check_oov(oov):
    if oov not in OOV_POLICIES:
        raise ValueError(f"oov policy must be one of {OOV_POLICIES}")


def _accuracy(correct, answered, total, oov):
    denom = total if oov == "incorrect" else answered
    return correct / denom if denom else 0.0


# --- SAT -------------------------------------------------------------------

def answer_sat_question(q: AnalogyQuestion, store: EmbeddingStore, op) -> SatAnswer:
    """Pick the choice whose relation vector has the highest cosine with the stem's.

    Choices with an OOV word get score None; an OOV stem leaves the whole
    question unanswered (chosen is None). Ties go to the lowest index.
    """
    op = RelationOperator.parse(op)
    stem = _relvec(store, op, q.stem)
    if stem is None:
        return SatAnswer(None, tuple(None for _ in q.choices))
    scores = []
    for choice in q.choices:
        v = _relvec(store, op, choice)
        scores.append(None if v is None else cosine(stem, v))
    return SatAnswer(_argmax(scores), tuple(scores))


def eval_sat(dataset: Sequence[AnalogyQuestion], store: EmbeddingStore, op,
             oov: str = "incorrect") -> EvalReport:
    _check_oov(oov)
    if not dataset:
        raise ValueError("empty SAT dataset")
    op = RelationOperator.parse(op)
    correct = answered = 0
    for q in dataset:
        ans = answer_sat_question(q, store, op)
        if ans.chosen is None:
            continue
        answered += 1
        correct += ans.chosen == q.answer_index
    total = len(dataset)
    return EvalReport(
        task="eval-sat", operator=op.value,
        accuracy=_accuracy(correct, answered, total, oov),
        coverage=answered / total,
        metrics={"correct": correct, "answered": answered, "total": total, "oov_policy": oov},
    )


# --- SemEval-2012 Task 2 ---------------------------------------------------

def semeval_score(pair: Pair, sub: SemEvalSubcategory, store: EmbeddingStore, op) -> float | None:
    """Mean cosine between the pair's relation vector and each prototype's.

    OOV prototypes are skipped. None means the score is undefined (pair OOV or
    every prototype OOV).
    """
    op = RelationOperator.parse(op)
    v = _relvec(store, op, pair)
    if v is None:
        return None
    sims = [cosine(v, p) for p in (_relvec(store, op, pr) for pr in sub.prototypes) if p is not None]
    if not sims:
        return None
    return float(np.mean(sims))


def eval_semeval(dataset: Sequence[SemEvalSubcategory], store: EmbeddingStore, op,
                 oov: str = "incorrect") -> EvalReport:
    """MaxDiff accuracy: correct most- and least-illustrative picks over all picks."""
    _check_oov(oov)
    if not dataset or not any(s.maxdiff_questions for s in dataset):
        raise ValueError("empty SemEval dataset")
    op = RelationOperator.parse(op)
    correct = answered = total = 0
    per_cat = {}
    for sub in dataset:
        c_sub = a_sub = 0
        for q in sub.maxdiff_questions:
            scores = [semeval_score(p, sub, store, op) for p in q.candidates]
            most, least = _argmax(scores), _argmin(scores)
            total += 2
            if most is None:
                continue
            a_sub += 2
            c_sub += (most == q.gold_most) + (least == q.gold_least)
        correct += c_sub
        answered += a_sub
        n_sub = 2 * len(sub.maxdiff_questions)
        if n_sub:
            per_cat[sub.name] = _accuracy(c_sub, a_sub, n_sub, oov)
    return EvalReport(
        task="eval-semeval", operator=op.value,
        accuracy=_accuracy(correct, answered, total, oov),
        coverage=answered / total, per_category=per_cat,
        metrics={"correct_picks": correct, "answered_picks": answered, "total_picks": total,
                 "subcategories": len(dataset), "oov_policy": oov},
    )


# --- analogy completion ----------------------------------------------------

def resolve_search_vocab(store: EmbeddingStore, words: Iterable[str] | None = None,
                         limit: int | None = None) -> np.ndarray:
    """Row indices of the search space, in the given (or store) order."""
    if words is None:
        idx = np.arange(len(store))
    else:
        seen, idx = set(), []
        for w in words:
            i = store.index.get(store.key(w))
            if i is not None and i not in seen:
                seen.add(i)
                idx.append(i)
        idx = np.asarray(idx, dtype=np.int64)
    return idx[:limit] if limit is not None else idx


def complete_analogy(a: str, b: str, c: str, store: EmbeddingStore, op,
                     search_vocab: np.ndarray | Sequence[str] | None = None,
                     exclusions: Iterable[str] = (), top_k: int | None = None
                     ) -> list[tuple[str, float]]:
    """Rank d by cos(f(a, b), f(c, d)) over the search space minus {a, b, c}.

    Ties keep search-vocabulary order.
    """
    op = RelationOperator.parse(op)
    rows = _search_rows(store, search_vocab)
    va, vb, vc = (store.matrix[store.index_of(w)] for w in (a, b, c))
    excluded = {store.index_of(w) for w in (a, b, c)}
    excluded |= {store.index[store.key(w)] for w in exclusions if w in store}
    rows = rows[~np.isin(rows, list(excluded))]
    scores = candidate_scores(op, compose(op, va, vb), vc, store.matrix[rows])[0]
    order = np.argsort(-scores, kind="stable")
    if top_k is not None:
        order = order[:top_k]
    return [(store.vocab[rows[i]], float(scores[i])) for i in order]


def _search_rows(store, search_vocab):
    if search_vocab is None:
        return np.arange(len(store))
    arr = np.asarray(search_vocab)
    if arr.dtype.kind in "iu":
        return arr.astype(np.int64)
    return resolve_search_vocab(store, list(search_vocab))


def eval_analogy_completion(dataset: Sequence[CompletionItem], store: EmbeddingStore, op,
                            search_vocab=None, oov: str = "incorrect",
                            batch_size: int = 256, task: str = "eval-analogy") -> EvalReport:
    """Top-1 accuracy, overall and per category / category kind."""
    _check_oov(oov)
    if not dataset:
        raise ValueError("empty analogy dataset")
    op = RelationOperator.parse(op)
    rows = _search_rows(store, search_vocab)
    cand = store.matrix[rows]
    cand_sq = (cand * cand).sum(axis=1)
    pos_in_search = {int(r): j for j, r in enumerate(rows)}

    usable = [i for i, it in enumerate(dataset)
              if all(w in store for w in (it.a, it.b, it.c, it.d_gold))]
    hits = np.zeros(len(dataset), dtype=bool)
    for start in range(0, len(usable), batch_size):
        chunk = [dataset[i] for i in usable[start:start + batch_size]]
        ia = [store.index_of(it.a) for it in chunk]
        ib = [store.index_of(it.b) for it in chunk]
        ic = [store.index_of(it.c) for it in chunk]
        m = store.matrix
        targets = compose(op, m[ia], m[ib])
        scores = candidate_scores(op, targets, m[ic], cand, cand_sqnorm=cand_sq)
        for q, (x, y, z) in enumerate(zip(ia, ib, ic)):
            for r in (x, y, z):
                j = pos_in_search.get(r)
                if j is not None:
                    scores[q, j] = -np.inf
        best = np.argmax(scores, axis=1)
        for q, it in enumerate(chunk):
            gold = store.index_of(it.d_gold)
            hits[usable[start + q]] = rows[best[q]] == gold and np.isfinite(scores[q, best[q]])

    usable_mask = np.zeros(len(dataset), dtype=bool)
    usable_mask[usable] = True

    def acc(mask):
        n_total = int(mask.sum())
        n_ans = int((mask & usable_mask).sum())
        return _accuracy(int((hits & mask).sum()), n_ans, n_total, oov)

    cats = np.array([it.category for it in dataset])
    kinds = np.array([it.category_kind for it in dataset])
    per_cat = {c: acc(cats == c) for c in dict.fromkeys(cats.tolist())}
    per_kind = {k: acc(kinds == k) for k in dict.fromkeys(kinds.tolist())}
    everything = np.ones(len(dataset), dtype=bool)
    return EvalReport(
        task=task, operator=op.value, accuracy=acc(everything),
        coverage=len(usable) / len(dataset), per_category=per_cat,
        metrics={"per_kind": per_kind, "correct": int(hits.sum()), "answered": len(usable),
                 "total": len(dataset), "search_vocab_size": int(len(rows)), "oov_policy": oov},
    )


# --- dataset readers -------------------------------------------------------

def read_sat_tsv(path: str | Path) -> list[AnalogyQuestion]:
    """Normalised SAT TSV: ``stem_a stem_b c1_a c1_b ... answer_index`` (0-based)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) % 2 != 1 or len(parts) < 5:
                raise ValueError(f"{path}:line {lineno}: malformed SAT row")
            words, ans = parts[:-1], int(parts[-1])
            pairs = [tuple(words[i:i + 2]) for i in range(0, len(words), 2)]
            out.append(AnalogyQuestion(pairs[0], tuple(pairs[1:]), ans))
    return out


def write_sat_tsv(questions: Iterable[AnalogyQuestion], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            words = [*q.stem, *(w for pair in q.choices for w in pair)]
            fh.write("\t".join(words + [str(q.answer_index)]) + "\n")


def convert_sat_turney(path: str | Path) -> list[AnalogyQuestion]:
    """Parse the original SAT distribution format.

    Blocks separated by blank lines: an optional source line, the stem line
    ``w1 w2 pos``, the choice lines, and a final answer letter. Lines starting
    with ``#`` are comments.
    """
    blocks, cur = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                continue
            if not line:
                if cur:
                    blocks.append(cur)
                cur = []
            else:
                cur.append(line)
    if cur:
        blocks.append(cur)
    out = []
    for blk in blocks:
        letter = blk[-1]
        if len(letter) != 1 or not letter.isalpha():
            raise ValueError(f"SAT block without answer letter: {blk[:2]}")
        body = [ln.split() for ln in blk[:-1]]
        # the source line is the one that is not a 'w1 w2 pos' triple
        body = [p for p in body if len(p) == 3 and ":" in p[2]] or body
        pairs = [(p[0], p[1]) for p in body]
        out.append(AnalogyQuestion(pairs[0], tuple(pairs[1:]), ord(letter.lower()) - ord("a")))
    return out


def read_completion(path: str | Path, default_kind: str = "syntactic") -> list[CompletionItem]:
    """Google / MSR format: ``a b c d`` lines under optional ``: category`` headers.

    Google categories whose name starts with ``gram`` are syntactic, the
    rest semantic; items before any header get ``default_kind``.
    """
    items = []
    cat, kind = "default", default_kind
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(":"):
                cat = line[1:].strip()
                kind = "syntactic" if cat.startswith("gram") else "semantic"
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"{path}:line {lineno}: expected 4 tokens")
            items.append(CompletionItem(*parts, category=cat, category_kind=kind))
    return items


def _pair(s: str) -> Pair:
    a, sep, b = s.partition(":")
    if not sep or not a or not b:
        raise ValueError(f"bad word pair {s!r}; expected 'a:b'")
    return a, b


def _read_pairs(path: Path) -> list[Pair]:
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        out.append(_pair(parts[0]) if len(parts) == 1 else (parts[0], parts[1]))
    return out


def read_semeval(directory: str | Path) -> list[SemEvalSubcategory]:
    """Per-subcategory files in ``directory``.

    ``NAME.prototypes`` and ``NAME.members`` hold one pair per line (``a:b``
    or ``a b``); ``NAME.maxdiff.tsv`` holds one question per line: candidate
    pairs as ``a:b`` followed by the gold most and least pairs.
    """
    directory = Path(directory)
    subs = []
    for proto in sorted(directory.glob("*.prototypes")):
        name = proto.name[: -len(".prototypes")]
        members_path = directory / f"{name}.members"
        members = _read_pairs(members_path) if members_path.exists() else []
        questions = []
        md = directory / f"{name}.maxdiff.tsv"
        if md.exists():
            for lineno, line in enumerate(md.read_text(encoding="utf-8").splitlines(), start=1):
                parts = line.split()
                if not parts or parts[0].startswith("#"):
                    continue
                if len(parts) < 4:
                    raise ValueError(f"{md}:line {lineno}: need >= 2 candidates plus most/least")
                cands = tuple(_pair(p) for p in parts[:-2])
                most, least = _pair(parts[-2]), _pair(parts[-1])
                if most not in cands or least not in cands:
                    raise ValueError(f"{md}:line {lineno}: gold pair not among candidates")
                questions.append(MaxDiffQuestion(cands, cands.index(most), cands.index(least)))
        subs.append(SemEvalSubcategory(name, _read_pairs(proto), members, questions))
    if not subs:
        raise ValueError(f"no *.prototypes files in {directory}")
    return subs
