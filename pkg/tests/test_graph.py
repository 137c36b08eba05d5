import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from re_forge import graph
from re_forge.errors import MalformedLine, ReForgeError, ZeroCooccurrence
from re_forge.graph import Vocabulary, VocabGraph, WordPieceTokenizer


def brute_npmi(docs, window, x, y):
    """Enumerate windows directly and evaluate the probability formulas."""
    windows = []
    for d in docs:
        if not d:
            continue
        if len(d) <= window:
            windows.append(d)
        else:
            windows.extend(d[i:i + window] for i in range(len(d) - window + 1))
    n = len(windows)
    p_x = sum(x in w for w in windows) / n
    p_y = sum(y in w for w in windows) / n
    p_xy = sum(x in w and y in w for w in windows) / n
    if p_xy == 1:
        return 0.0, 0.0
    pmi = math.log(p_xy / (p_x * p_y))
    return pmi, pmi / -math.log(p_xy)


# -- preprocessing -------------------------------------------------------------

def test_preprocess_example():
    assert graph.preprocess("The drug, aspirin, works.", ["the"]) == ["drug", "aspirin", "works"]


def test_preprocess_empty():
    assert graph.preprocess("", []) == []


def test_preprocess_keeps_intraword_punctuation():
    assert graph.preprocess("IC50 of 0.8-79 nM") == ["ic50", "of", "0.8-79", "nm"]


def test_preprocess_split_all():
    assert graph.preprocess("N-acetyl (x)", policy=graph.SPLIT_ALL) == ["n", "acetyl", "x"]
    with pytest.raises(ReForgeError):
        graph.preprocess("x", policy="other")


# -- WordPiece -------------------------------------------------------------------

def test_wordpiece_continuation():
    tok = WordPieceTokenizer(["[UNK]", "x", "##yz", "##y"])
    assert tok.tokenize_word("xyz") == ["x", "##yz"]


def test_wordpiece_whole_word_and_unknown():
    tok = WordPieceTokenizer(["[UNK]", "aspirin", "as"])
    assert tok.tokenize(["aspirin", "qq", "as"]) == ["aspirin", "[UNK]", "as"]
    assert tok.tokenize_word("asz") == ["[UNK]"]


def test_wordpiece_requires_unk(tmp_path):
    with pytest.raises(ReForgeError):
        WordPieceTokenizer(["a"])
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("[UNK]\nx\n##yz\n", encoding="utf-8")
    assert graph.wordpiece_tokenize(["xyz"], vocab) == ["x", "##yz"]


# -- window counts and NPMI ------------------------------------------------------

def test_counts_example_window20():
    c = graph.count_windows([["a", "b"], ["a", "b"], ["c", "d"]], 20)
    assert (c.total_windows, c.token_windows["a"], c.pair("a", "b"), c.pair("a", "c")) == (3, 2, 2, 0)


def test_counts_example_window2():
    c = graph.count_windows([["a", "b", "c"]], 2)
    assert (c.total_windows, c.token_windows["b"], c.pair("a", "c")) == (2, 2, 0)


def test_counts_empty_and_window_check():
    c = graph.count_windows([], 5)
    assert c.total_windows == 0 and not c.token_windows and not c.pair_windows
    with pytest.raises(ReForgeError):
        graph.count_windows([["a"]], 1)


def test_presence_not_multiplicity():
    c = graph.count_windows([["a", "a", "b", "a"]], 20)
    assert c.token_windows["a"] == 1 and c.pair("a", "b") == 1


def test_npmi_full_association():
    c = graph.count_windows([["a", "b"], ["a", "b"], ["c", "d"]], 20)
    pmi, v = graph.npmi(c, "a", "b")
    assert pmi == pytest.approx(math.log(1.5), abs=1e-15)
    assert v == pytest.approx(1.0, abs=1e-15)


def test_npmi_negative_association():
    c = graph.count_windows([["a", "b", "c"], ["a", "c"]], 2)
    pmi, v = graph.npmi(c, "a", "b")
    assert pmi == pytest.approx(math.log(3 / 4), abs=1e-15)
    assert v == pytest.approx(math.log(3 / 4) / -math.log(1 / 3), abs=1e-15)
    assert v == pytest.approx(-0.2618, abs=1e-4)


def test_npmi_degenerate_and_zero():
    c = graph.count_windows([["a", "b"]], 20)
    assert graph.npmi(c, "a", "b") == (0.0, 0.0)
    with pytest.raises(ZeroCooccurrence):
        graph.npmi(graph.count_windows([["a", "b"], ["c"]], 2), "a", "c")
    with pytest.raises(ZeroCooccurrence):
        graph.npmi(c, "a", "a")


token_docs = st.lists(st.lists(st.sampled_from("abcdef"), max_size=20), max_size=10)


@settings(max_examples=200, deadline=None)
@given(token_docs, st.sampled_from([2, 5, 20]))
def test_npmi_matches_oracle(docs, window):
    c = graph.count_windows(docs, window)
    for (x, y) in c.pair_windows:
        pmi, v = graph.npmi(c, x, y)
        bp, bv = brute_npmi(docs, window, x, y)
        assert abs(pmi - bp) <= 1e-12 and abs(v - bv) <= 1e-12
        assert -1.0 <= v <= 1.0
        assert graph.npmi(c, y, x) == (pmi, v)


@settings(max_examples=100, deadline=None)
@given(token_docs, st.sampled_from([2, 5, 20]), st.randoms(use_true_random=False))
def test_counts_order_independent(docs, window, rnd):
    shuffled = list(docs)
    rnd.shuffle(shuffled)
    a = graph.count_windows(docs, window)
    b = graph.count_windows(shuffled, window, threads=3)
    assert a == b
    for (x, y), n in a.pair_windows.items():
        assert n <= min(a.token_windows[x], a.token_windows[y]) <= a.total_windows


# -- graph and normalization -------------------------------------------------------

def test_build_graph_examples():
    g = graph.build_graph(graph.count_windows([["a", "b"], ["a", "b"], ["c", "d"]], 20))
    v = g.vocab
    assert g.edges == {(v["a"], v["b"]): pytest.approx(1.0), (v["c"], v["d"]): pytest.approx(1.0)}
    g2 = graph.build_graph(graph.count_windows([["a", "b", "c"], ["a", "c"]], 2))
    assert g2.edges == {}
    assert graph.build_graph(graph.WindowCounts(20)).num_nodes == 0


def test_extra_tokens_are_isolated_nodes():
    g = graph.build_graph(graph.count_windows([["a", "b"], ["c"]], 2), extra_tokens=["zz"])
    assert "zz" in g.vocab and all(g.vocab["zz"] not in e for e in g.edges)


def test_normalize_examples():
    two = VocabGraph(Vocabulary(["a", "b"]), {(0, 1): 1.0})
    np.testing.assert_allclose(graph.normalize_adjacency(two), [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
    none = VocabGraph(Vocabulary(["a", "b", "c"]), {})
    np.testing.assert_array_equal(graph.normalize_adjacency(none), np.eye(3))
    np.testing.assert_array_equal(graph.normalize_adjacency(VocabGraph(Vocabulary(["a"]), {})), [[1.0]])


def random_graph(rng, n):
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.4:
                edges[(i, j)] = rng.uniform(1e-3, 1.0)
    return VocabGraph(Vocabulary([f"w{i:02d}" for i in range(n)]), edges)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2 ** 32))
def test_normalized_spectrum(n, seed):
    g = random_graph(random.Random(seed), n)
    a = graph.normalize_adjacency(g)
    assert np.max(np.abs(a - a.T)) <= 1e-12
    assert np.all(a >= 0)
    eig = np.linalg.eigvalsh(a)
    assert eig.min() >= -1 - 1e-12 and eig.max() <= 1 + 1e-12
    sp = graph.normalize_adjacency(g, as_sparse=True).toarray()
    np.testing.assert_allclose(sp, a, atol=1e-15)


def test_vocabulary_roundtrip():
    v = Vocabulary(["b", "##x", "a"])
    assert v.tokens == ("##x", "a", "b")
    assert all(v[v.token(i)] == i for i in range(len(v)))
    assert Vocabulary.from_text(v.to_text()) == v
    with pytest.raises(ReForgeError):
        Vocabulary.from_text("b\na\n")


def test_graph_text_roundtrip():
    g = graph.build_vocab_graph(["aspirin blocks cox", "aspirin blocks cox", "dopamine binds d2"],
                                stopwords=["the"], window_size=3)
    text = graph.graph_to_text(g)
    back = graph.graph_from_text(text)
    assert back.vocab == g.vocab and back.edges == g.edges and back.window_size == 3
    assert graph.graph_to_text(back) == text
    assert text.splitlines()[0] == f"{g.num_nodes} {len(g.edges)} 3"


def test_graph_text_errors():
    with pytest.raises(MalformedLine):
        graph.graph_from_text("x y z\n")
    with pytest.raises(MalformedLine):
        graph.graph_from_text("1 0 20\na 7\n")


def test_build_vocab_graph_with_wordpiece():
    tok = WordPieceTokenizer(["[UNK]", "x", "##yz", "aspirin"])
    g = graph.build_vocab_graph(["xyz aspirin", "xyz"], tokenizer=tok, window_size=2)
    assert set(g.vocab.tokens) == {"x", "##yz", "aspirin"}
