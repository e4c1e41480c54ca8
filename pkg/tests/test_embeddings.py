import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import make_store
from relcomp.embeddings import (EmbeddingFormatError, TokenNotFound, cosine, load_embeddings,
                                lookup, normalize, save_embeddings)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def write(tmp_path, text, name="emb.txt"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_two_line_file(tmp_path):
    store = load_embeddings(write(tmp_path, "a 1 0\nb 0 1\n"))
    assert store.vocab == ("a", "b")
    assert store.dim == 2
    assert not store.normalized
    np.testing.assert_array_equal(lookup(store, "a"), [1.0, 0.0])


def test_header_line_is_skipped(tmp_path):
    store = load_embeddings(write(tmp_path, "2 3\nx 1 2 3\ny 4 5 6\n"))
    assert store.vocab == ("x", "y") and store.dim == 3


def test_dimension_mismatch_names_line(tmp_path):
    with pytest.raises(EmbeddingFormatError) as exc:
        load_embeddings(write(tmp_path, "a 1 0\nb 0 1\nc 1 2 3\n"))
    assert exc.value.line == 3


def test_non_numeric_value_names_line(tmp_path):
    with pytest.raises(EmbeddingFormatError) as exc:
        load_embeddings(write(tmp_path, "a 1 0\nb 0 x\n"))
    assert exc.value.line == 2
    assert "'x'" in str(exc.value)


def test_empty_and_missing_files(tmp_path):
    with pytest.raises(EmbeddingFormatError, match="empty"):
        load_embeddings(write(tmp_path, ""))
    with pytest.raises(EmbeddingFormatError, match="cannot read"):
        load_embeddings(tmp_path / "nope.txt")


def test_duplicates_keep_first(tmp_path):
    store = load_embeddings(write(tmp_path, "a 1 0\nb 0 1\na 5 5\n"))
    assert store.vocab == ("a", "b")
    np.testing.assert_array_equal(store.matrix[0], [1, 0])
    assert store.warnings["duplicate_tokens"] == 1


def test_casefold_lookup(tmp_path):
    path = write(tmp_path, "a 1 0\nb 0 1\n")
    store = load_embeddings(path)
    np.testing.assert_array_equal(lookup(store, "A"), [1, 0])
    with pytest.raises(TokenNotFound) as exc:
        lookup(store, "z")
    assert exc.value.token == "z"

    ents = load_embeddings(write(tmp_path, "Obama 1 0\nobama 0 1\n", "ent.txt"), casefold=False)
    assert ents.vocab == ("Obama", "obama")
    assert "OBAMA" not in ents


def test_miss_is_distinct_from_zero_vector():
    store = make_store(["z"], [[0.0, 0.0]])
    assert store.get("z") is not None
    assert store.get("q") is None


def test_round_trip_is_textually_stable(tmp_path, rng):
    store = make_store([f"t{i}" for i in range(20)], rng.standard_normal((20, 7)) * 10)
    p1, p2 = tmp_path / "1.txt", tmp_path / "2.txt"
    save_embeddings(store, p1)
    again = load_embeddings(p1)
    save_embeddings(again, p2)
    assert p1.read_text() == p2.read_text()
    np.testing.assert_allclose(again.matrix, store.matrix, rtol=1e-8)
    # a store already at 9 significant digits reloads bitwise
    np.testing.assert_array_equal(load_embeddings(p2).matrix, again.matrix)


def test_normalize_examples():
    store = make_store(["a", "z", "u"], [[3, 4], [0, 0], [1, 0]])
    out = normalize(store)
    np.testing.assert_allclose(out.matrix, [[0.6, 0.8], [0, 0], [1, 0]], atol=1e-15)
    assert out.normalized
    assert out.warnings["zero_rows"] == 1


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 4), elements=finite))
def test_normalize_idempotent(m):
    store = make_store([f"w{i}" for i in range(6)], m)
    once = normalize(store)
    twice = normalize(once)
    np.testing.assert_allclose(twice.matrix, once.matrix, atol=1e-12)
    norms = np.linalg.norm(once.matrix, axis=1)
    nonzero = np.linalg.norm(m, axis=1) > 0
    np.testing.assert_allclose(norms[nonzero], 1.0, atol=1e-6)


def test_cosine_examples():
    assert cosine([1, 0], [0, 1]) == 0
    assert cosine([1, 1], [2, 2]) == pytest.approx(1.0, abs=1e-15)
    assert cosine([1, 0], [1, 1]) == pytest.approx(0.70710678, abs=1e-8)
    assert cosine([0, 0], [1, 1], return_flag=True) == (0.0, True)
    with pytest.raises(ValueError):
        cosine([1, 2], [1, 2, 3])


vec = arrays(np.float64, 5, elements=finite)


@settings(max_examples=100, deadline=None)
@given(vec, vec, st.floats(0.01, 100), st.floats(0.01, 100))
def test_cosine_symmetric_and_scale_invariant(x, y, alpha, beta):
    assert cosine(x, y) == cosine(y, x)
    if np.linalg.norm(x) > 1e-6 and np.linalg.norm(y) > 1e-6:
        assert cosine(alpha * x, beta * y) == pytest.approx(cosine(x, y), abs=1e-9)
    assert -1.0 <= cosine(x, y) <= 1.0


def test_store_is_read_only():
    store = make_store(["a"], [[1.0, 2.0]])
    with pytest.raises(ValueError):
        store.matrix[0, 0] = 5
