"""NPMI vocabulary graph: preprocessing, WordPiece, window counts, edges, Ã.

Pipeline: :func:`preprocess` -> :class:`WordPieceTokenizer` ->
:func:`count_windows` -> :func:`build_graph` -> :func:`normalize_adjacency`.

Co-occurrence is presence-based: within one sliding window a token, or an
unordered pair of distinct tokens, counts once however often it repeats.
Windows never span documents.  Logarithms are natural.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import sparse

from .errors import MalformedLine, ReForgeError, ZeroCooccurrence

DEFAULT_WINDOW = 20
UNK = "[UNK]"

KEEP_INTRAWORD = "keep-intraword"
SPLIT_ALL = "split-all"


def _is_punct(ch: str) -> bool:
    cp = ord(ch)
    if 33 <= cp <= 47 or 58 <= cp <= 64 or 91 <= cp <= 96 or 123 <= cp <= 126:
        return True
    return unicodedata.category(ch).startswith("P")


def preprocess(text: str, stopwords: Iterable[str] = (), policy: str = KEEP_INTRAWORD) -> list:
    """Lowercase, strip punctuation and drop stopwords.

    ``keep-intraword`` removes punctuation only at the edges of a
    whitespace-delimited word, so chemical names such as ``0.8-79`` or
    ``N-acetyl`` survive intact.  ``split-all`` instead breaks words at every
    punctuation character and discards the punctuation.
    """
    stop = {w.lower() for w in stopwords}
    words = []
    for raw in text.lower().split():
        if policy == KEEP_INTRAWORD:
            lo, hi = 0, len(raw)
            while lo < hi and _is_punct(raw[lo]):
                lo += 1
            while hi > lo and _is_punct(raw[hi - 1]):
                hi -= 1
            pieces = [raw[lo:hi]]
        elif policy == SPLIT_ALL:
            pieces, cur = [], []
            for ch in raw:
                if _is_punct(ch):
                    pieces.append("".join(cur))
                    cur = []
                else:
                    cur.append(ch)
            pieces.append("".join(cur))
        else:
            raise ReForgeError(f"unknown punctuation policy {policy!r}")
        words.extend(p for p in pieces if p and p not in stop)
    return words


def load_word_list(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


class WordPieceTokenizer:
    """Greedy longest-match-first subword segmentation over a fixed vocabulary."""

    def __init__(self, vocab: Iterable[str], unk_token: str = UNK, max_chars: int = 100):
        self.vocab = set(vocab)
        if unk_token not in self.vocab:
            raise ReForgeError(f"vocabulary lacks the unknown token {unk_token}")
        self.unk_token = unk_token
        self.max_chars = max_chars

    @classmethod
    def from_file(cls, path, **kwargs):
        with open(path, encoding="utf-8") as fh:
            return cls((line.rstrip("\n") for line in fh if line.strip()), **kwargs)

    def tokenize_word(self, word: str) -> list:
        if len(word) > self.max_chars:
            return [self.unk_token]
        pieces = []
        start = 0
        while start < len(word):
            end = len(word)
            match = None
            while start < end:
                piece = word[start:end]
                if start > 0:
                    piece = "##" + piece
                if piece in self.vocab:
                    match = piece
                    break
                end -= 1
            if match is None:
                return [self.unk_token]
            pieces.append(match)
            start = end
        return pieces

    def tokenize(self, words: Sequence[str]) -> list:
        out = []
        for word in words:
            out.extend(self.tokenize_word(word))
        return out


def wordpiece_tokenize(words: Sequence[str], vocab_file) -> list:
    return WordPieceTokenizer.from_file(vocab_file).tokenize(words)


@dataclass
class WindowCounts:
    """Sliding-window tallies: ``#SW``, ``#SW(x)`` and ``#SW(x, y)`` (pairs keyed x < y)."""

    window_size: int = DEFAULT_WINDOW
    total_windows: int = 0
    token_windows: Counter = field(default_factory=Counter)
    pair_windows: Counter = field(default_factory=Counter)

    def __add__(self, other: "WindowCounts") -> "WindowCounts":
        if self.window_size != other.window_size:
            raise ReForgeError("cannot combine counts with different window sizes")
        return WindowCounts(
            self.window_size,
            self.total_windows + other.total_windows,
            self.token_windows + other.token_windows,
            self.pair_windows + other.pair_windows,
        )

    def pair(self, x: str, y: str) -> int:
        return self.pair_windows.get((x, y) if x < y else (y, x), 0)


def _windows(tokens: Sequence[str], window_size: int):
    if not tokens:
        return
    if len(tokens) <= window_size:
        yield tokens
        return
    for i in range(len(tokens) - window_size + 1):
        yield tokens[i:i + window_size]


def _count_document(tokens: Sequence[str], window_size: int) -> WindowCounts:
    counts = WindowCounts(window_size)
    for window in _windows(tokens, window_size):
        uniq = sorted(set(window))
        counts.total_windows += 1
        counts.token_windows.update(uniq)
        counts.pair_windows.update(combinations(uniq, 2))
    return counts


def count_windows(docs: Iterable[Sequence[str]], window_size: int = DEFAULT_WINDOW, threads: int = 1) -> WindowCounts:
    """Aggregate window counts over documents.

    A document with fewer than ``window_size`` tokens is a single window; an
    empty document contributes nothing.
    """
    if window_size < 2:
        raise ReForgeError("window_size must be at least 2")
    docs = list(docs)
    if threads > 1 and len(docs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda d: _count_document(d, window_size), docs))
    else:
        parts = [_count_document(d, window_size) for d in docs]
    total = WindowCounts(window_size)
    for part in parts:
        total = total + part
    return total


def npmi(counts: WindowCounts, x: str, y: str):
    """Return ``(pmi, npmi)`` for the pair; the pair must co-occur.

    When the pair fills every window (P(x, y) = 1) both values are 0.
    """
    n_xy = counts.pair(x, y) if x != y else 0
    if n_xy <= 0:
        raise ZeroCooccurrence(f"{x!r} and {y!r} never share a window")
    n = counts.total_windows
    n_x, n_y = counts.token_windows[x], counts.token_windows[y]
    if n_xy == n:
        return 0.0, 0.0
    # integer products are exact, so the ratio is symmetric in x and y and
    # exactly 1 for independent tokens
    pmi = math.log((n_xy * n) / (n_x * n_y))
    value = pmi / math.log(n / n_xy)
    # mathematically within [-1, 1]; clamp rounding excursions at the ends
    return pmi, min(1.0, max(-1.0, value))


class Vocabulary:
    """Token -> node index, indices assigned in sorted token order."""

    def __init__(self, tokens: Iterable[str]):
        self.tokens = tuple(sorted(set(tokens)))
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __getitem__(self, token) -> int:
        return self.index[token]

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def token(self, i: int) -> str:
        return self.tokens[i]

    def to_text(self) -> str:
        return "".join(tok + "\n" for tok in self.tokens)

    @classmethod
    def from_text(cls, content: str) -> "Vocabulary":
        tokens = [line for line in content.split("\n") if line]
        vocab = cls(tokens)
        if list(vocab.tokens) != tokens:
            raise ReForgeError("vocabulary file must list unique tokens in sorted order")
        return vocab


@dataclass
class VocabGraph:
    """Token nodes with positive-NPMI edges ``(i, j) -> weight`` for ``i < j``.

    Every node carries an implicit self-weight of 1.
    """

    vocab: Vocabulary
    edges: dict
    window_size: int = DEFAULT_WINDOW
    _normalized: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def num_nodes(self) -> int:
        return len(self.vocab)

    def adjacency(self) -> np.ndarray:
        n = self.num_nodes
        a = np.eye(n)
        for (i, j), w in self.edges.items():
            a[i, j] = a[j, i] = w
        return a

    def sparse_adjacency(self) -> sparse.csr_matrix:
        n = self.num_nodes
        rows = list(range(n))
        cols = list(range(n))
        vals = [1.0] * n
        for (i, j), w in self.edges.items():
            rows += [i, j]
            cols += [j, i]
            vals += [w, w]
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def normalized(self) -> np.ndarray:
        if self._normalized is None:
            self._normalized = normalize_adjacency(self)
        return self._normalized


def build_graph(counts: WindowCounts, extra_tokens: Iterable[str] = ()) -> VocabGraph:
    """Nodes are every counted token (plus ``extra_tokens``); edge iff NPMI > 0."""
    vocab = Vocabulary(list(counts.token_windows) + list(extra_tokens))
    edges = {}
    for (x, y), n_xy in counts.pair_windows.items():
        if n_xy <= 0:
            continue
        _, value = npmi(counts, x, y)
        if value > 0:
            i, j = vocab[x], vocab[y]
            edges[(min(i, j), max(i, j))] = value
    return VocabGraph(vocab, dict(sorted(edges.items())), counts.window_size)


def normalize_adjacency(g: VocabGraph, *, as_sparse: bool = False):
    """``D^-1/2 A D^-1/2`` with the unit diagonal included in ``A``."""
    if as_sparse:
        a = g.sparse_adjacency()
        d = np.asarray(a.sum(axis=1)).ravel()
        inv = sparse.diags(1.0 / np.sqrt(d))
        return (inv @ a @ inv).tocsr()
    a = g.adjacency()
    inv = 1.0 / np.sqrt(a.sum(axis=1))
    return a * inv[:, None] * inv[None, :]


def build_vocab_graph(texts: Iterable[str], *, stopwords: Iterable[str] = (),
                      tokenizer: Optional[WordPieceTokenizer] = None,
                      window_size: int = DEFAULT_WINDOW, policy: str = KEEP_INTRAWORD,
                      extra_texts: Iterable[str] = (), threads: int = 1) -> VocabGraph:
    """Run the whole pipeline over ``texts`` (one string per document).

    ``extra_texts`` only contribute nodes, never window counts, so text kept
    out of graph statistics (validation or test abstracts) can still be
    represented.
    """
    stopwords = list(stopwords)

    def tokens_of(text):
        words = preprocess(text, stopwords, policy)
        return tokenizer.tokenize(words) if tokenizer is not None else words

    docs = [tokens_of(t) for t in texts]
    counts = count_windows(docs, window_size, threads)
    extra = [tok for t in extra_texts for tok in tokens_of(t)]
    return build_graph(counts, extra)


# -- serialization -----------------------------------------------------------

def graph_to_text(g: VocabGraph) -> str:
    """Header ``V E window``, then ``token index`` lines, then ``i j weight`` lines."""
    lines = [f"{g.num_nodes} {len(g.edges)} {g.window_size}"]
    lines.extend(f"{tok} {i}" for i, tok in enumerate(g.vocab.tokens))
    lines.extend(f"{i} {j} {w:.17g}" for (i, j), w in sorted(g.edges.items()))
    return "\n".join(lines) + "\n"


def graph_from_text(content: str) -> VocabGraph:
    lines = content.split("\n")
    try:
        v, e, window = (int(x) for x in lines[0].split())
    except ValueError:
        raise MalformedLine(1, "header must be 'V E window_size'", lines[0]) from None
    tokens = []
    for k in range(v):
        lineno = k + 2
        parts = lines[k + 1].rsplit(" ", 1)
        if len(parts) != 2 or parts[1] != str(k):
            raise MalformedLine(lineno, "expected 'token index'", lines[k + 1])
        tokens.append(parts[0])
    vocab = Vocabulary(tokens)
    if list(vocab.tokens) != tokens:
        raise MalformedLine(2, "tokens must be unique and sorted")
    edges = {}
    for k in range(e):
        lineno = v + k + 2
        parts = lines[v + k + 1].split()
        if len(parts) != 3:
            raise MalformedLine(lineno, "expected 'i j weight'", lines[v + k + 1])
        i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        if not (0 <= i < j < v) or not (0 < w <= 1):
            raise MalformedLine(lineno, "edge out of range", lines[v + k + 1])
        edges[(i, j)] = w
    return VocabGraph(vocab, edges, window)
