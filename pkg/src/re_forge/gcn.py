"""Graph convolution over the vocabulary graph, with hand-derived gradients.

Matrices are 2-D float64 numpy arrays.  The two-layer model has no biases,
no dropout and a single ReLU::

    out = relu(X @ Ã @ W_vh) @ W_hc        # X: m×v, Ã: v×v, W_vh: v×h, W_hc: h×c
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, MalformedLine
from .graph import UNK, Vocabulary

# Dense Ã beyond this many nodes is refused by the demo path.
DENSE_NODE_CAP = 5000


def _as_matrix(name, m) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch(f"{name} contains non-finite values")
    return arr


def gcn_layer(a_norm, x, w) -> np.ndarray:
    """One graph convolution ``Ã X W``."""
    a_norm, x, w = _as_matrix("a_norm", a_norm), _as_matrix("x", x), _as_matrix("w", w)
    n = a_norm.shape[0]
    if a_norm.shape != (n, n):
        raise DimensionMismatch(f"a_norm must be square, got {a_norm.shape}")
    if x.shape[0] != n:
        raise DimensionMismatch(f"x has {x.shape[0]} rows, a_norm has {n}")
    if w.shape[0] != x.shape[1]:
        raise DimensionMismatch(f"w has {w.shape[0]} rows, x has {x.shape[1]} columns")
    return a_norm @ (x @ w)


@dataclass
class VgcnParams:
    w_vh: np.ndarray
    w_hc: np.ndarray

    def __post_init__(self):
        self.w_vh = _as_matrix("w_vh", self.w_vh)
        self.w_hc = _as_matrix("w_hc", self.w_hc)
        if self.w_vh.shape[1] != self.w_hc.shape[0]:
            raise DimensionMismatch(
                f"hidden sizes disagree: w_vh is {self.w_vh.shape}, w_hc is {self.w_hc.shape}")

    @classmethod
    def random(cls, vocab_size: int, hidden: int, out: int, rng: np.random.Generator, scale: float = None):
        scale = scale if scale is not None else 1.0 / math.sqrt(max(hidden, 1))
        return cls(rng.normal(0.0, scale, (vocab_size, hidden)), rng.normal(0.0, scale, (hidden, out)))


def _check_vgcn(x_mv, a_norm, params):
    x_mv, a_norm = _as_matrix("x_mv", x_mv), _as_matrix("a_norm", a_norm)
    v = a_norm.shape[0]
    if a_norm.shape != (v, v):
        raise DimensionMismatch(f"a_norm must be square, got {a_norm.shape}")
    if x_mv.shape[1] != v:
        raise DimensionMismatch(f"x_mv has {x_mv.shape[1]} columns, vocabulary has {v}")
    if params.w_vh.shape[0] != v:
        raise DimensionMismatch(f"w_vh has {params.w_vh.shape[0]} rows, vocabulary has {v}")
    return x_mv, a_norm


def vgcn_forward(x_mv, a_norm, params: VgcnParams) -> np.ndarray:
    x_mv, a_norm = _check_vgcn(x_mv, a_norm, params)
    hidden = np.maximum((x_mv @ a_norm) @ params.w_vh, 0.0)
    return hidden @ params.w_hc


def vgcn_gradients(x_mv, a_norm, params: VgcnParams, upstream):
    """Gradients of ``sum(upstream * vgcn_forward(...))`` w.r.t. W_vh and W_hc.

    The ReLU derivative is taken as 0 at exactly 0.
    """
    x_mv, a_norm = _check_vgcn(x_mv, a_norm, params)
    upstream = _as_matrix("upstream", upstream)
    m, c = x_mv.shape[0], params.w_hc.shape[1]
    if upstream.shape != (m, c):
        raise DimensionMismatch(f"upstream must be {(m, c)}, got {upstream.shape}")
    xa = x_mv @ a_norm
    pre = xa @ params.w_vh
    hidden = np.maximum(pre, 0.0)
    grad_w_hc = hidden.T @ upstream
    grad_hidden = (upstream @ params.w_hc.T) * (pre > 0.0)
    grad_w_vh = xa.T @ grad_hidden
    return grad_w_vh, grad_w_hc


def _loss(x_mv, a_norm, params, upstream):
    return float(np.sum(upstream * vgcn_forward(x_mv, a_norm, params)))


def check_gradients(x_mv, a_norm, params: VgcnParams, upstream, *, step: float = 1e-5,
                    entries: int = None, rng: np.random.Generator = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks every parameter, or a random subset of ``entries`` per matrix.
    Relative error is ``|a - n| / max(|a|, |n|)``, taken as 0 when both are 0
    (dead ReLU units give exactly zero on both sides).
    """
    grads = vgcn_gradients(x_mv, a_norm, params, upstream)
    worst = 0.0
    for name, grad in zip(("w_vh", "w_hc"), grads):
        w = getattr(params, name)
        positions = list(np.ndindex(*w.shape))
        if entries is not None and entries < len(positions):
            rng = rng or np.random.default_rng(0)
            pick = rng.choice(len(positions), size=entries, replace=False)
            positions = [positions[i] for i in sorted(pick)]
        for pos in positions:
            orig = w[pos]
            w[pos] = orig + step
            up = _loss(x_mv, a_norm, params, upstream)
            w[pos] = orig - step
            down = _loss(x_mv, a_norm, params, upstream)
            w[pos] = orig
            numeric = (up - down) / (2 * step)
            scale = max(abs(grad[pos]), abs(numeric))
            if scale > 0.0:
                worst = max(worst, abs(grad[pos] - numeric) / scale)
    return worst


def build_sentence_features(tokens: Sequence[str], vocab: Vocabulary) -> np.ndarray:
    """1×v row of token occurrence counts; [UNK] and out-of-vocabulary tokens are ignored."""
    row = np.zeros((1, len(vocab)))
    for tok in tokens:
        if tok != UNK and tok in vocab:
            row[0, vocab[tok]] += 1.0
    return row


def build_batch_features(token_lists: Sequence[Sequence[str]], vocab: Vocabulary) -> np.ndarray:
    if not token_lists:
        return np.zeros((0, len(vocab)))
    return np.vstack([build_sentence_features(t, vocab) for t in token_lists])


def concat_embeddings(graph_emb, token_embs) -> np.ndarray:
    """Prepend a 1×c graph embedding to t×d token embeddings as extra sequence rows.

    The graph vector is zero-padded to a multiple of d and cut into
    ``ceil(c / d)`` rows; the result is ``(t + ceil(c/d)) × d``.
    """
    graph_emb = _as_matrix("graph_emb", graph_emb)
    token_embs = _as_matrix("token_embs", token_embs)
    if graph_emb.shape[0] != 1:
        raise DimensionMismatch(f"graph_emb must be a single row, got {graph_emb.shape}")
    d = token_embs.shape[1]
    if d == 0:
        raise DimensionMismatch("token embeddings have zero width")
    c = graph_emb.shape[1]
    k = -(-c // d)
    padded = np.zeros(k * d)
    padded[:c] = graph_emb[0]
    return np.vstack([padded.reshape(k, d), token_embs])


# -- serialization -----------------------------------------------------------

def matrix_to_text(m) -> str:
    """``rows cols`` header, then one space-separated row per line (17 significant digits)."""
    m = _as_matrix("matrix", m)
    lines = [f"{m.shape[0]} {m.shape[1]}"]
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in m)
    return "\n".join(lines) + "\n"


def matrix_from_text(content: str) -> np.ndarray:
    lines = content.split("\n")
    try:
        rows, cols = (int(x) for x in lines[0].split())
    except ValueError:
        raise MalformedLine(1, "header must be 'rows cols'", lines[0]) from None
    data = np.zeros((rows, cols))
    for r in range(rows):
        parts = lines[r + 1].split() if r + 1 < len(lines) else []
        if len(parts) != cols:
            raise MalformedLine(r + 2, f"expected {cols} values")
        data[r] = [float(p) for p in parts]
    return data


def embeddings_to_tsv(instance_ids: Sequence[str], embeddings) -> str:
    """One line per instance: ``instance_id TAB c TAB v1 TAB v2 ...``."""
    embeddings = _as_matrix("embeddings", embeddings)
    if len(instance_ids) != embeddings.shape[0]:
        raise DimensionMismatch("one embedding row per instance id is required")
    c = embeddings.shape[1]
    return "".join(
        "\t".join([iid, str(c)] + [f"{v:.17g}" for v in row]) + "\n"
        for iid, row in zip(instance_ids, embeddings)
    )
