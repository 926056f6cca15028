"""Word-vector table, similarity-order post-processing, and cosine retrieval.

Vectors are read from the common textual format (optional ``count dim``
header, then one ``token v1 .. vd`` row per line). The post-processing step
re-expresses the table in its gram-matrix eigenbasis and raises the spectrum
to a configurable power, shifting the similarity captured by cosine between
more-syntactic and more-semantic regimes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .corpus_io import Sentence

log = logging.getLogger(__name__)

EIGENVALUE_FLOOR = 1e-10
EXPORT_DECIMALS = 6


class EmbeddingFormatError(ValueError):
    """The vector file contains no parseable rows."""


class NumericError(ArithmeticError):
    """A linear-algebra step produced non-finite values."""


@dataclass
class EmbeddingTable:
    """token -> dense vector map; ``alpha_applied`` records post-processing."""

    dim: int
    vectors: Dict[str, np.ndarray]
    alpha_applied: Optional[float] = None

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, token: str) -> Optional[np.ndarray]:
        return self.vectors.get(token)

    def tokens(self) -> List[str]:
        return list(self.vectors)


@dataclass(frozen=True)
class SentenceVector:
    """Mean vector of the covered tokens of a sentence or term."""

    vector: np.ndarray
    covered_tokens: int
    total_tokens: int


@dataclass(frozen=True)
class SimilarityHit:
    sentence_id: int
    score: float


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Parse a textual word-vector file.

    The dimension comes from the header when present, otherwise from the
    first data row. Rows with the wrong component count or unparseable /
    non-finite values are skipped with a warning; for duplicate tokens the
    first row wins.
    """
    p = Path(path)
    if not p.is_file():
        raise EmbeddingFormatError(f"embedding file not found: {p}")
    vectors: Dict[str, np.ndarray] = {}
    dim: Optional[int] = None
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            parts = line.split()
            if not parts:
                continue
            if lineno == 0 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    dim = int(parts[1])
                    continue
            token, comps = parts[0], parts[1:]
            if dim is None:
                if not comps:
                    log.warning("%s:%d: no vector components; row skipped", p, lineno)
                    continue
                dim = len(comps)
            if len(comps) != dim:
                log.warning(
                    "%s:%d: expected %d components, got %d; row skipped",
                    p, lineno, dim, len(comps),
                )
                continue
            try:
                vec = np.array([float(c) for c in comps], dtype=np.float64)
            except ValueError:
                log.warning("%s:%d: unparseable vector component; row skipped", p, lineno)
                continue
            if not np.all(np.isfinite(vec)):
                log.warning("%s:%d: non-finite vector component; row skipped", p, lineno)
                continue
            if token in vectors:
                log.warning("%s:%d: duplicate token %r; first kept", p, lineno, token)
                continue
            vectors[token] = vec
    if dim is None or not vectors:
        raise EmbeddingFormatError(f"{p}: no parseable embedding rows")
    return EmbeddingTable(dim=dim, vectors=vectors)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write the table in the textual format with a ``count dim`` header.

    Components are rounded to 6 decimal places, so write -> read -> write
    is byte-stable.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for token, vec in table.vectors.items():
            comps = " ".join(f"{v:.{EXPORT_DECIMALS}f}" for v in vec)
            fh.write(f"{token} {comps}\n")


def postprocess_alpha(table: EmbeddingTable, alpha: float) -> EmbeddingTable:
    """Apply the similarity-order transformation with exponent ``alpha``.

    Rows are length-normalized, the gram matrix G = X^T X is
    eigendecomposed as Q diag(w) Q^T with eigenvalues floored at 1e-10
    (negative exponents need a strictly positive spectrum), and the table is
    re-expressed as X' = X Q diag(w^((alpha-1)/2)). The transformed gram
    matrix then has spectrum w^alpha; alpha = 1 is a pure rotation.
    """
    if not table.vectors:
        raise ValueError("cannot post-process an empty embedding table")
    if not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite, got {alpha}")
    tokens = list(table.vectors)
    X = np.stack([table.vectors[t] for t in tokens]).astype(np.float64)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    nonzero = norms[:, 0] > 0.0
    X = np.where(nonzero[:, None], X / np.where(norms > 0.0, norms, 1.0), X)
    gram = X.T @ X
    eigenvalues, Q = np.linalg.eigh(gram)
    eigenvalues = np.clip(eigenvalues, EIGENVALUE_FLOOR, None)
    if not np.all(np.isfinite(eigenvalues)):
        raise NumericError("non-finite eigenvalue in gram matrix")
    scale = eigenvalues ** ((alpha - 1.0) / 2.0)
    if not np.all(np.isfinite(scale)):
        raise NumericError(f"non-finite spectral scale for alpha={alpha}")
    transformed = (X @ Q) * scale
    if not np.all(np.isfinite(transformed)):
        raise NumericError("non-finite components after post-processing")
    vectors = {token: transformed[i].copy() for i, token in enumerate(tokens)}
    return EmbeddingTable(dim=table.dim, vectors=vectors, alpha_applied=alpha)


def cosine(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    """Cosine similarity clamped to [-1, 1]; zero vectors score 0."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"vector length mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    value = float(np.dot(u, v)) / (nu * nv)
    return max(-1.0, min(1.0, value))


def _mean_vector(tokens: Sequence[str], table: EmbeddingTable) -> SentenceVector:
    covered = [table.vectors[t] for t in tokens if t in table.vectors]
    if not covered:
        return SentenceVector(np.zeros(table.dim), 0, len(tokens))
    mean = np.mean(np.stack(covered), axis=0)
    return SentenceVector(mean, len(covered), len(tokens))


def sentence_embedding(sentence: Sentence, table: EmbeddingTable) -> SentenceVector:
    """Average the vectors of the sentence tokens present in the table.

    Uncovered tokens are skipped and counted; a sentence with no covered
    token gets the zero vector (which ranks last under cosine).
    """
    return _mean_vector(sentence.tokens, table)


def term_embedding(term: Sequence[str], table: EmbeddingTable) -> SentenceVector:
    """Same averaging rule for a (possibly multi-token) dictionary term."""
    if not term:
        raise ValueError("term must be non-empty")
    return _mean_vector(term, table)


def top_k_sentences(
    query: SentenceVector,
    corpus_vectors: Sequence[SentenceVector],
    k: int,
    exclude: Optional[Set[int]] = None,
) -> List[SimilarityHit]:
    """The k sentences most cosine-similar to the query.

    Ordering is (score desc, sentence id asc), which makes results
    deterministic; ids in ``exclude`` are skipped. Fewer than k available
    returns all available.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    exclude = exclude or set()
    hits = [
        SimilarityHit(i, cosine(query.vector, sv.vector))
        for i, sv in enumerate(corpus_vectors)
        if i not in exclude
    ]
    hits.sort(key=lambda h: (-h.score, h.sentence_id))
    return hits[:k]


def best_word_in_sentence(
    query_vec: Sequence[float] | np.ndarray,
    sentence: Sentence,
    table: EmbeddingTable,
    eligible: Callable[[int], bool],
) -> Optional[Tuple[int, float]]:
    """The eligible token position most cosine-similar to ``query_vec``.

    Positions whose token has no vector are skipped; ties go to the lowest
    index; returns None when nothing qualifies.
    """
    best: Optional[Tuple[int, float]] = None
    for index, token in enumerate(sentence.tokens):
        if not eligible(index):
            continue
        vec = table.get(token)
        if vec is None:
            continue
        score = cosine(query_vec, vec)
        if best is None or score > best[1]:
            best = (index, score)
    return best
