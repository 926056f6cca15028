"""Smoothed trigram language model and the replacement-context ratio test.

Smoothing is interpolated absolute discounting with a fixed discount D: at
each level the observed count loses D of its mass, and the freed mass is
spread over the next-lower level, ending in a unigram distribution with a
floor count for the unknown token. Every conditional distribution then sums
to one exactly, which the tests exploit.

Sentences are padded with two begin markers and two end markers so that any
token span, however close to a boundary, owns a full set of overlapping
trigram windows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from .corpus_io import Sentence

log = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
RESERVED = (BOS, EOS, UNK)

DEFAULT_DISCOUNT = 0.75
DEFAULT_MIN_COUNT = 1

Span = Tuple[int, int]


class ArpaFormatError(ValueError):
    """Malformed ARPA n-gram file."""


@dataclass
class TrigramModel:
    """Count tables plus derived prediction tables.

    ``unigrams``/``bigrams``/``trigrams`` are positional counts over padded
    sentences, so every n-gram count is bounded by its prefix's count. The
    derived ``_follow*`` tables count continuations per history and back the
    discounted probabilities.
    """

    unigrams: Dict[str, int]
    bigrams: Dict[Tuple[str, str], int]
    trigrams: Dict[Tuple[str, str, str], int]
    vocab: frozenset
    discount: float = DEFAULT_DISCOUNT
    min_count: int = DEFAULT_MIN_COUNT

    _follow3: Dict[Tuple[str, str], int] = field(init=False, repr=False)
    _n1plus3: Dict[Tuple[str, str], int] = field(init=False, repr=False)
    _follow2: Dict[str, int] = field(init=False, repr=False)
    _n1plus2: Dict[str, int] = field(init=False, repr=False)
    _uni_pred: Dict[str, int] = field(init=False, repr=False)
    _uni_total: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must be in (0, 1), got {self.discount}")
        # Begin markers are contexts only: n-grams whose final token is BOS
        # carry no prediction mass, so they are excluded from the derived
        # continuation statistics (the raw count tables keep them).
        follow3: Dict[Tuple[str, str], int] = {}
        n1plus3: Dict[Tuple[str, str], int] = {}
        for (w1, w2, w3), count in self.trigrams.items():
            if w3 == BOS:
                continue
            follow3[(w1, w2)] = follow3.get((w1, w2), 0) + count
            n1plus3[(w1, w2)] = n1plus3.get((w1, w2), 0) + 1
        follow2: Dict[str, int] = {}
        n1plus2: Dict[str, int] = {}
        for (w1, w2), count in self.bigrams.items():
            if w2 == BOS:
                continue
            follow2[w1] = follow2.get(w1, 0) + count
            n1plus2[w1] = n1plus2.get(w1, 0) + 1
        # Unigram backoff distribution over the predictable alphabet
        # (vocab + EOS + UNK; BOS is never predicted). UNK gets a floor
        # count of 1 so unknown words keep positive probability.
        uni_pred: Dict[str, int] = {}
        for w in sorted(self.vocab) + [EOS, UNK]:
            uni_pred[w] = self.unigrams.get(w, 0)
        uni_pred[UNK] = max(uni_pred[UNK], 1)
        self._follow3 = follow3
        self._n1plus3 = n1plus3
        self._follow2 = follow2
        self._n1plus2 = n1plus2
        self._uni_pred = uni_pred
        self._uni_total = sum(uni_pred.values())

    # -- token normalization ------------------------------------------------

    def alphabet(self) -> List[str]:
        """Predictable tokens: vocabulary plus EOS and UNK."""
        return list(self._uni_pred)

    def map_history(self, token: str) -> str:
        if token in self.vocab or token in RESERVED:
            return token
        return UNK

    def map_predicted(self, token: str) -> str:
        if token in self.vocab or token == EOS or token == UNK:
            return token
        return UNK

    # -- probabilities ------------------------------------------------------

    def _p1(self, w: str) -> float:
        return self._uni_pred[w] / self._uni_total

    def _p2(self, h: str, w: str) -> float:
        follow = self._follow2.get(h, 0)
        if follow == 0:
            return self._p1(w)
        count = self.bigrams.get((h, w), 0)
        discounted = max(count - self.discount, 0.0) / follow
        interp = self.discount * self._n1plus2[h] / follow
        return discounted + interp * self._p1(w)

    def _p3(self, h1: str, h2: str, w: str) -> float:
        follow = self._follow3.get((h1, h2), 0)
        if follow == 0:
            return self._p2(h2, w)
        count = self.trigrams.get((h1, h2, w), 0)
        discounted = max(count - self.discount, 0.0) / follow
        interp = self.discount * self._n1plus3[(h1, h2)] / follow
        return discounted + interp * self._p2(h2, w)

    def trigram_prob(self, w1: str, w2: str, w3: str) -> float:
        """P(w3 | w1, w2) after mapping out-of-vocabulary tokens to UNK.

        Always in (0, 1]; for any history the values sum to one over the
        predictable alphabet.
        """
        return self._p3(self.map_history(w1), self.map_history(w2), self.map_predicted(w3))

    def backoff_weights(self) -> Tuple[Dict[str, float], Dict[Tuple[str, str], float]]:
        """Leftover-mass weights per history, as used by the ARPA export."""
        uni_bow = {}
        for w in list(self._uni_pred) + [BOS]:
            follow = self._follow2.get(w, 0)
            uni_bow[w] = self.discount * self._n1plus2[w] / follow if follow else 1.0
        bi_bow = {}
        for pair in self.bigrams:
            follow = self._follow3.get(pair, 0)
            bi_bow[pair] = self.discount * self._n1plus3[pair] / follow if follow else 1.0
        return uni_bow, bi_bow


def train_lm(
    mono: Sequence[Sentence],
    min_count: int = DEFAULT_MIN_COUNT,
    discount: float = DEFAULT_DISCOUNT,
) -> TrigramModel:
    """Count padded n-grams over a monolingual corpus.

    Tokens rarer than ``min_count`` are replaced by UNK before counting.
    """
    if not mono:
        raise ValueError("monolingual corpus must be non-empty")
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    raw: Dict[str, int] = {}
    for sent in mono:
        for token in sent.tokens:
            raw[token] = raw.get(token, 0) + 1

    def mapped(token: str) -> str:
        if token in RESERVED:
            return UNK  # reserved markers may not appear as corpus tokens
        return token if raw[token] >= min_count else UNK

    unigrams: Dict[str, int] = {}
    bigrams: Dict[Tuple[str, str], int] = {}
    trigrams: Dict[Tuple[str, str, str], int] = {}
    vocab = set()
    for sent in mono:
        tokens = [mapped(t) for t in sent.tokens]
        vocab.update(t for t in tokens if t != UNK)
        padded = [BOS, BOS] + tokens + [EOS, EOS]
        for i, w in enumerate(padded):
            unigrams[w] = unigrams.get(w, 0) + 1
            if i + 1 < len(padded):
                pair = (w, padded[i + 1])
                bigrams[pair] = bigrams.get(pair, 0) + 1
            if i + 2 < len(padded):
                triple = (w, padded[i + 1], padded[i + 2])
                trigrams[triple] = trigrams.get(triple, 0) + 1
    return TrigramModel(
        unigrams=unigrams,
        bigrams=bigrams,
        trigrams=trigrams,
        vocab=frozenset(vocab),
        discount=discount,
        min_count=min_count,
    )


@dataclass(frozen=True)
class ContextWindow:
    """A padded sentence plus the padded coordinates of a replaced span."""

    padded: Tuple[str, ...]
    span_start: int
    span_end: int

    @classmethod
    def build(cls, tokens: Sequence[str], span: Span) -> "ContextWindow":
        start, end = span
        if not (0 <= start <= end < len(tokens)):
            raise ValueError(f"span {span} out of range for {len(tokens)} tokens")
        padded = (BOS, BOS) + tuple(tokens) + (EOS, EOS)
        return cls(padded, start + 2, end + 2)

    def trigram_positions(self) -> List[int]:
        """Indices of every padded trigram whose 3-token window overlaps the span."""
        return [
            i
            for i in range(len(self.padded) - 2)
            if i <= self.span_end and i + 2 >= self.span_start
        ]

    def trigrams(self) -> List[Tuple[str, str, str]]:
        return [
            (self.padded[i], self.padded[i + 1], self.padded[i + 2])
            for i in self.trigram_positions()
        ]


def window_score(model, tokens: Sequence[str], span: Span) -> float:
    """Product of trigram probabilities over the windows overlapping ``span``.

    ``model`` is anything with a ``trigram_prob(w1, w2, w3)`` method (the
    internal model or an imported ARPA scorer). Span indices are inclusive
    and refer to the unpadded tokens.
    """
    window = ContextWindow.build(tokens, span)
    score = 1.0
    for w1, w2, w3 in window.trigrams():
        score *= model.trigram_prob(w1, w2, w3)
    return score


def lm_ratio_accept(
    model,
    original: Tuple[Sequence[str], Span],
    synthetic: Tuple[Sequence[str], Span],
    threshold: float,
) -> Tuple[bool, float]:
    """Context-ratio acceptance test for a replacement.

    The ratio is the synthetic window score over the original window score;
    the replacement is accepted when the ratio is at least ``threshold``.
    Both verdict and ratio are returned for provenance.
    """
    if threshold <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    original_score = window_score(model, original[0], original[1])
    # Smoothing keeps every probability positive, so this cannot trip on
    # well-formed models.
    assert original_score > 0.0, "original window score must be positive"
    ratio = window_score(model, synthetic[0], synthetic[1]) / original_score
    return ratio >= threshold, ratio


# -- ARPA interchange -------------------------------------------------------


@dataclass
class ArpaScorer:
    """Backoff n-gram scorer loaded from an ARPA file."""

    order: int
    logprobs: Dict[Tuple[str, ...], float]
    backoffs: Dict[Tuple[str, ...], float]
    unigram_vocab: frozenset

    def _map(self, token: str) -> str:
        if token in self.unigram_vocab:
            return token
        return UNK if UNK in self.unigram_vocab else token

    def _logp(self, ngram: Tuple[str, ...]) -> float:
        if ngram in self.logprobs:
            return self.logprobs[ngram]
        if len(ngram) == 1:
            return -99.0
        bow = self.backoffs.get(ngram[:-1], 0.0)
        return bow + self._logp(ngram[1:])

    def trigram_prob(self, w1: str, w2: str, w3: str) -> float:
        ngram = (self._map(w1), self._map(w2), self._map(w3))
        return 10.0 ** self._logp(ngram)


def export_arpa(model: TrigramModel, path: str | Path) -> None:
    """Write the model in ARPA form (log10 probabilities, backoff weights).

    Observed n-grams carry their full interpolated probability; backoff
    weights carry the discounted leftover mass, so a scorer importing the
    file reproduces the model's probabilities up to print rounding. Tokens
    that are contexts only (the begin marker) get the conventional -99 stand-in.
    """
    uni_bow, bi_bow = model.backoff_weights()
    uni_entries: List[Tuple[str, float, float]] = []
    for w in sorted(set(model.alphabet()) | {BOS}):
        logp = -99.0 if w == BOS else math.log10(model._p1(w))
        uni_entries.append((w, logp, math.log10(uni_bow[w]) if uni_bow[w] > 0 else 0.0))
    bi_entries: List[Tuple[Tuple[str, str], float, float]] = []
    for pair in sorted(model.bigrams):
        w1, w2 = pair
        logp = -99.0 if w2 == BOS else math.log10(model._p2(w1, w2))
        bow = bi_bow[pair]
        bi_entries.append((pair, logp, math.log10(bow) if bow > 0 else 0.0))
    tri_entries: List[Tuple[Tuple[str, str, str], float]] = []
    for triple in sorted(model.trigrams):
        w1, w2, w3 = triple
        tri_entries.append((triple, math.log10(model._p3(w1, w2, w3))))

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\\data\\\n")
        fh.write(f"ngram 1={len(uni_entries)}\n")
        fh.write(f"ngram 2={len(bi_entries)}\n")
        fh.write(f"ngram 3={len(tri_entries)}\n")
        fh.write("\n\\1-grams:\n")
        for w, logp, bow in uni_entries:
            fh.write(f"{logp:.6f}\t{w}\t{bow:.6f}\n")
        fh.write("\n\\2-grams:\n")
        for (w1, w2), logp, bow in bi_entries:
            fh.write(f"{logp:.6f}\t{w1} {w2}\t{bow:.6f}\n")
        fh.write("\n\\3-grams:\n")
        for (w1, w2, w3), logp in tri_entries:
            fh.write(f"{logp:.6f}\t{w1} {w2} {w3}\n")
        fh.write("\n\\end\\\n")


def import_arpa(path: str | Path) -> ArpaScorer:
    """Parse an ARPA n-gram file into a backoff scorer.

    Section headers, declared n-gram counts, and the closing marker are
    validated; violations raise :class:`ArpaFormatError` with the line
    number.
    """
    p = Path(path)
    declared: Dict[int, int] = {}
    logprobs: Dict[Tuple[str, ...], float] = {}
    backoffs: Dict[Tuple[str, ...], float] = {}
    seen: Dict[int, int] = {}
    state = "preamble"
    current_order = 0
    ended = False
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text == "\\data\\":
                state = "data"
                continue
            if text == "\\end\\":
                ended = True
                break
            if text.startswith("\\") and text.endswith("-grams:"):
                try:
                    current_order = int(text[1:-7])
                except ValueError:
                    raise ArpaFormatError(f"{p}:{lineno}: bad section header {text!r}")
                if current_order not in declared:
                    raise ArpaFormatError(
                        f"{p}:{lineno}: section for undeclared order {current_order}"
                    )
                state = "ngrams"
                continue
            if state == "data":
                if not text.startswith("ngram "):
                    raise ArpaFormatError(f"{p}:{lineno}: expected ngram count line")
                spec = text[len("ngram "):]
                if "=" not in spec:
                    raise ArpaFormatError(f"{p}:{lineno}: bad count line {text!r}")
                order_s, count_s = spec.split("=", 1)
                try:
                    declared[int(order_s)] = int(count_s)
                except ValueError:
                    raise ArpaFormatError(f"{p}:{lineno}: bad count line {text!r}")
                continue
            if state == "ngrams":
                parts = text.split()
                if len(parts) < current_order + 1:
                    raise ArpaFormatError(
                        f"{p}:{lineno}: entry too short for order {current_order}"
                    )
                try:
                    logp = float(parts[0])
                except ValueError:
                    raise ArpaFormatError(f"{p}:{lineno}: bad log-probability {parts[0]!r}")
                ngram = tuple(parts[1 : 1 + current_order])
                logprobs[ngram] = logp
                if len(parts) > current_order + 1:
                    try:
                        backoffs[ngram] = float(parts[1 + current_order])
                    except ValueError:
                        raise ArpaFormatError(
                            f"{p}:{lineno}: bad backoff weight {parts[-1]!r}"
                        )
                seen[current_order] = seen.get(current_order, 0) + 1
                continue
            raise ArpaFormatError(f"{p}:{lineno}: unexpected line before \\data\\")
    if not declared:
        raise ArpaFormatError(f"{p}: missing \\data\\ section")
    if not ended:
        raise ArpaFormatError(f"{p}: missing \\end\\ marker")
    for order, count in declared.items():
        if seen.get(order, 0) != count:
            raise ArpaFormatError(
                f"{p}: declared {count} {order}-grams, found {seen.get(order, 0)}"
            )
    unigram_vocab = frozenset(ng[0] for ng in logprobs if len(ng) == 1)
    return ArpaScorer(
        order=max(declared),
        logprobs=logprobs,
        backoffs=backoffs,
        unigram_vocab=unigram_vocab,
    )


# -- internal persistence ---------------------------------------------------


def save_lm(model: TrigramModel, path: str | Path) -> None:
    """Persist the count tables as sorted TSV with a parameter header."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#discount\t{model.discount!r}\n")
        fh.write(f"#min_count\t{model.min_count}\n")
        for order, table in ((1, model.unigrams), (2, model.bigrams), (3, model.trigrams)):
            if order == 1:
                rows = sorted((w, c) for w, c in table.items())
                for w, c in rows:
                    fh.write(f"1\t{w}\t{c}\n")
            else:
                rows = sorted((" ".join(ng), c) for ng, c in table.items())
                for ng, c in rows:
                    fh.write(f"{order}\t{ng}\t{c}\n")


def load_lm(path: str | Path) -> TrigramModel:
    unigrams: Dict[str, int] = {}
    bigrams: Dict[Tuple[str, str], int] = {}
    trigrams: Dict[Tuple[str, str, str], int] = {}
    discount = DEFAULT_DISCOUNT
    min_count = DEFAULT_MIN_COUNT
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#discount\t"):
                discount = float(line.split("\t", 1)[1])
                continue
            if line.startswith("#min_count\t"):
                min_count = int(line.split("\t", 1)[1])
                continue
            order_s, ngram_s, count_s = line.split("\t")
            tokens = tuple(ngram_s.split(" "))
            count = int(count_s)
            if order_s == "1":
                unigrams[tokens[0]] = count
            elif order_s == "2":
                bigrams[(tokens[0], tokens[1])] = count
            else:
                trigrams[(tokens[0], tokens[1], tokens[2])] = count
    vocab = frozenset(w for w in unigrams if w not in RESERVED)
    return TrigramModel(
        unigrams=unigrams,
        bigrams=bigrams,
        trigrams=trigrams,
        vocab=vocab,
        discount=discount,
        min_count=min_count,
    )
