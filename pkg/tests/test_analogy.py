import numpy as np
import pytest

import oracles
from conftest import make_store
from relcomp.analogy import (AnalogyQuestion, CompletionItem, MaxDiffQuestion, SemEvalSubcategory,
                             answer_sat_question, complete_analogy, convert_sat_turney,
                             eval_analogy_completion, eval_sat, eval_semeval, read_completion,
                             read_sat_tsv, read_semeval, resolve_search_vocab, semeval_score,
                             write_sat_tsv)
from relcomp.operators import ALL_OPERATORS, candidate_scores


def basis(n, *idx):
    v = np.zeros(n)
    for i in idx:
        v[i] += 1.0
    return v


@pytest.fixture
def offset_store():
    """man->woman and king->queen share offset e1; every other offset is orthogonal."""
    n = 12
    words = {
        "man": basis(n, 0), "woman": basis(n, 0, 1),
        "king": basis(n, 2), "queen": basis(n, 2, 1),
        "apple": basis(n, 3), "pear": basis(n, 3, 4),
        "car": basis(n, 5), "bus": basis(n, 5, 6),
        "cat": basis(n, 7), "dog": basis(n, 8),
    }
    return make_store(list(words), list(words.values()))


def test_sat_exact_construction(offset_store):
    q = AnalogyQuestion(("man", "woman"), (("apple", "pear"), ("car", "bus"), ("king", "queen"),
                                           ("cat", "dog")), 2)
    ans = answer_sat_question(q, offset_store, "pairdiff")
    assert ans.chosen == 2
    assert ans.scores[2] == pytest.approx(1.0)
    assert ans.scores[0] == 0.0 and ans.scores[1] == 0.0


def test_sat_ties_go_to_lowest_index(offset_store):
    q = AnalogyQuestion(("man", "woman"), (("apple", "pear"), ("car", "bus")), 1)
    assert answer_sat_question(q, offset_store, "pairdiff").chosen == 0


def test_sat_oov_handling(offset_store):
    q = AnalogyQuestion(("man", "zzz"), (("king", "queen"), ("car", "bus")), 0)
    ans = answer_sat_question(q, offset_store, "pairdiff")
    assert ans.chosen is None
    q2 = AnalogyQuestion(("man", "woman"), (("zzz", "queen"), ("king", "queen")), 0)
    ans2 = answer_sat_question(q2, offset_store, "pairdiff")
    assert ans2.scores[0] is None and ans2.chosen == 1

    rep = eval_sat([q, q], offset_store, "pairdiff")
    assert rep.accuracy == 0.0 and rep.coverage == 0.0
    one = eval_sat([AnalogyQuestion(("man", "woman"), (("car", "bus"), ("king", "queen")), 1)],
                   offset_store, "pairdiff")
    assert one.accuracy == 1.0 and one.coverage == 1.0
    with pytest.raises(ValueError):
        eval_sat([], offset_store, "add")


def test_sat_skip_policy(offset_store):
    good = AnalogyQuestion(("man", "woman"), (("car", "bus"), ("king", "queen")), 1)
    bad = AnalogyQuestion(("man", "zzz"), (("car", "bus"), ("king", "queen")), 1)
    assert eval_sat([good, bad], offset_store, "pairdiff").accuracy == 0.5
    skip = eval_sat([good, bad], offset_store, "pairdiff", oov="skip")
    assert skip.accuracy == 1.0 and skip.coverage == 0.5


def test_pairdiff_swap_leaves_sat_scores(random_store):
    q = AnalogyQuestion(("w0", "w1"), (("w2", "w3"), ("w4", "w5")), 0)
    qs = AnalogyQuestion(("w1", "w0"), (("w3", "w2"), ("w5", "w4")), 0)
    s1 = answer_sat_question(q, random_store, "pairdiff").scores
    s2 = answer_sat_question(qs, random_store, "pairdiff").scores
    np.testing.assert_allclose(s1, s2, atol=1e-15)


def test_semeval_score_examples(offset_store):
    sub = SemEvalSubcategory("x", [("man", "woman")])
    assert semeval_score(("man", "woman"), sub, offset_store, "pairdiff") == pytest.approx(1.0)
    sub2 = SemEvalSubcategory("x", [("king", "queen"), ("car", "bus")])
    assert semeval_score(("man", "woman"), sub2, offset_store, "pairdiff") == pytest.approx(0.5)
    sub3 = SemEvalSubcategory("x", [("king", "queen"), ("zzz", "bus")])
    assert semeval_score(("man", "woman"), sub3, offset_store, "pairdiff") == pytest.approx(1.0)
    assert semeval_score(("man", "zzz"), sub2, offset_store, "pairdiff") is None
    assert semeval_score(("man", "woman"), SemEvalSubcategory("x", [("zz", "q")]),
                         offset_store, "pairdiff") is None


def test_maxdiff_exact_construction(offset_store):
    # candidate 0 matches the prototype offset, its reversal scores -1, others 0
    q = MaxDiffQuestion((("king", "queen"), ("apple", "pear"), ("queen", "king"), ("car", "bus")),
                        gold_most=0, gold_least=2)
    sub = SemEvalSubcategory("gender", [("man", "woman")], maxdiff_questions=[q])
    rep = eval_semeval([sub], offset_store, "pairdiff")
    assert rep.accuracy == 1.0
    assert rep.per_category == {"gender": 1.0}


def test_maxdiff_all_tied(offset_store):
    cands = (("apple", "pear"), ("car", "bus"), ("cat", "dog"))
    sub = SemEvalSubcategory("s", [("man", "woman")], maxdiff_questions=[
        MaxDiffQuestion(cands, 0, 0), MaxDiffQuestion(cands, 1, 2)])
    # every pick lands on candidate 0
    assert eval_semeval([sub], offset_store, "pairdiff").accuracy == 0.5


def test_maxdiff_random_baseline():
    rng = np.random.default_rng(2024)
    words = [f"w{i}" for i in range(200)]
    store = make_store(words, rng.standard_normal((200, 10)))
    subs = []
    n_q = 0
    for s in range(20):
        protos = [tuple(rng.choice(words, 2, replace=False)) for _ in range(3)]
        qs = []
        for _ in range(100):
            cands = tuple(tuple(rng.choice(words, 2, replace=False)) for _ in range(4))
            qs.append(MaxDiffQuestion(cands, int(rng.integers(4)), int(rng.integers(4))))
        n_q += len(qs)
        subs.append(SemEvalSubcategory(f"s{s}", protos, maxdiff_questions=qs))
    rep = eval_semeval(subs, store, "pairdiff")
    # independent recount of the picks
    hits = 0
    for sub in subs:
        for q in sub.maxdiff_questions:
            sc = [np.mean([oracles.cos(oracles.compose("pairdiff", store.get(a), store.get(b)),
                                       oracles.compose("pairdiff", store.get(c), store.get(d)))
                           for c, d in sub.prototypes]) for a, b in q.candidates]
            hits += (int(np.argmax(sc)) == q.gold_most) + (int(np.argmin(sc)) == q.gold_least)
    assert rep.accuracy == pytest.approx(hits / (2 * n_q))
    assert rep.accuracy == pytest.approx(0.25, abs=0.03)


def test_completion_exact_construction(offset_store):
    ranked = complete_analogy("man", "woman", "king", offset_store, "pairdiff")
    assert ranked[0][0] == "queen"
    assert ranked[0][1] == pytest.approx(1.0)
    assert {"man", "woman", "king"}.isdisjoint(w for w, _ in ranked)
    rep = eval_analogy_completion([CompletionItem("man", "woman", "king", "queen")],
                                  offset_store, "pairdiff")
    assert rep.accuracy == 1.0 and rep.coverage == 1.0


def test_completion_gold_in_question_is_unreachable(offset_store):
    rep = eval_analogy_completion([CompletionItem("man", "woman", "king", "man")],
                                  offset_store, "pairdiff")
    assert rep.accuracy == 0.0


@pytest.mark.parametrize("op", [op.value for op in ALL_OPERATORS])
def test_completion_matches_exhaustive_oracle(op, random_store):
    vectors = {w: random_store.get(w) for w in random_store.vocab}
    for a, b, c in [("w0", "w1", "w2"), ("w10", "w3", "w44"), ("w7", "w7", "w9")]:
        got = [w for w, _ in complete_analogy(a, b, c, random_store, op)]
        assert got == oracles.rank_completion(vectors, list(random_store.vocab), op, a, b, c)


def test_completion_search_vocab_restricts(random_store):
    rows = resolve_search_vocab(random_store, ["w5", "w6", "nope", "w7"], limit=2)
    assert [random_store.vocab[i] for i in rows] == ["w5", "w6"]
    ranked = complete_analogy("w0", "w1", "w2", random_store, "pairdiff", search_vocab=rows)
    assert {w for w, _ in ranked} == {"w5", "w6"}


def test_pairdiff_self_query_scores_b_highest(random_store):
    # (a, b, a): candidate b reproduces the query offset exactly; b itself is
    # excluded from complete_analogy output, so score the full vocabulary
    a, b = random_store.get("w3"), random_store.get("w8")
    s = candidate_scores("pairdiff", b - a, a, random_store.matrix)[0]
    assert int(np.argmax(s)) == random_store.index_of("w8")
    assert s.max() == pytest.approx(1.0)


def _items(store, rng, n):
    words = list(store.vocab)
    return [CompletionItem(*rng.choice(words, 4, replace=False),
                           category="gram1" if i % 2 else "capital",
                           category_kind="syntactic" if i % 2 else "semantic") for i in range(n)]


def test_completion_eval_agrees_with_oracle_and_is_order_invariant(random_store):
    rng = np.random.default_rng(9)
    items = _items(random_store, rng, 40)
    # make a quarter of them answerable by construction: gold = oracle top-1
    vectors = {w: random_store.get(w) for w in random_store.vocab}
    fixed = []
    for i, it in enumerate(items):
        if i % 4 == 0:
            top = oracles.rank_completion(vectors, list(random_store.vocab), "mult", it.a, it.b, it.c)[0]
            it = CompletionItem(it.a, it.b, it.c, top, it.category, it.category_kind)
        fixed.append(it)
    expected = np.mean([oracles.rank_completion(vectors, list(random_store.vocab), "mult",
                                                it.a, it.b, it.c)[0] == it.d_gold for it in fixed])
    rep = eval_analogy_completion(fixed, random_store, "mult", batch_size=7)
    assert rep.accuracy == pytest.approx(expected)
    assert rep.accuracy >= 0.25
    rev = eval_analogy_completion(fixed[::-1], random_store, "mult")
    assert rev.accuracy == rep.accuracy
    assert set(rep.metrics["per_kind"]) == {"semantic", "syntactic"}
    scaled = make_store(random_store.vocab, 3.5 * random_store.matrix)
    assert eval_analogy_completion(fixed, scaled, "mult").accuracy == rep.accuracy


def test_completion_oov_items(offset_store):
    items = [CompletionItem("man", "woman", "king", "queen"), CompletionItem("man", "zzz", "king", "queen")]
    rep = eval_analogy_completion(items, offset_store, "pairdiff")
    assert rep.accuracy == 0.5 and rep.coverage == 0.5
    assert eval_analogy_completion(items, offset_store, "pairdiff", oov="skip").accuracy == 1.0
    with pytest.raises(ValueError):
        eval_analogy_completion([], offset_store, "add")


def test_readers(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text(": capital-common\nAthens Greece Baghdad Iraq\n: gram1-adj\nfast faster slow slower\n")
    items = read_completion(g)
    assert items[0].category_kind == "semantic" and items[1].category_kind == "syntactic"
    assert items[0].d_gold == "Iraq"

    qs = [AnalogyQuestion(("a", "b"), (("c", "d"), ("e", "f")), 1)]
    write_sat_tsv(qs, tmp_path / "sat.tsv")
    assert read_sat_tsv(tmp_path / "sat.tsv") == qs

    t = tmp_path / "turney.txt"
    t.write_text("# comment\n\n190 FROM REAL SATs\nostrich bird n:n\nlion cat n:n\n"
                 "goose flock n:n\newe sheep n:n\ncub bear n:n\nprimate monkey n:n\na\n\n"
                 "KS type\nlull trust n:n\nbalk fortitude v:n\nbetray loyalty v:n\n"
                 "cajole compliance v:n\nhinder destination v:n\nsoothe passion v:n\nc\n")
    conv = convert_sat_turney(t)
    assert conv[0].stem == ("ostrich", "bird") and conv[0].answer_index == 0
    assert conv[0].choices[0] == ("lion", "cat") and len(conv[0].choices) == 5
    assert conv[1].answer_index == 2

    d = tmp_path / "semeval"
    d.mkdir()
    (d / "1a.prototypes").write_text("car:engine\nface:nose\n")
    (d / "1a.members").write_text("car:engine\nhand:finger\n")
    (d / "1a.maxdiff.tsv").write_text("hand:finger\tcar:wheel\tdog:cat\tcar:wheel\tdog:cat\n")
    subs = read_semeval(d)
    assert subs[0].name == "1a" and subs[0].prototypes[1] == ("face", "nose")
    assert subs[0].maxdiff_questions[0] == MaxDiffQuestion(
        (("hand", "finger"), ("car", "wheel"), ("dog", "cat")), 1, 2)
