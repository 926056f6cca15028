"""Independent re-verification of accepted augmentation records.

This walks the provenance file with fresh resource lookups, recomputing
each enabled gate from scratch: the similarity score from the embedding
table, the agreement verdict from the annotation lexicon, and both
language-model ratios from rebuilt synthetic sentences. Recorded values
must match the recomputation and satisfy their thresholds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

from . import agreement
from .agreement import AnnotatedLexicon
from .corpus_io import ParallelCorpus
from .embeddings import EmbeddingTable, cosine, term_embedding
from .lm import TrigramModel, window_score
from .pipeline import (
    ITEM_DICTIONARY,
    ITEM_RARE_WORD,
    AugmentationConfig,
    ReplacementRecord,
)

log = logging.getLogger(__name__)

SCORE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Violation:
    record_index: int
    field: str
    detail: str

    def __str__(self) -> str:
        return f"record {self.record_index}: {self.field}: {self.detail}"


def _splice(tokens, span, insert):
    return tokens[: span[0]] + tuple(insert) + tokens[span[1] + 1 :]


def verify_records(
    records: Sequence[ReplacementRecord],
    corpus: ParallelCorpus,
    embeddings: EmbeddingTable,
    lexicon: Optional[AnnotatedLexicon],
    lm_src: TrigramModel,
    lm_tgt: TrigramModel,
    config: AugmentationConfig,
) -> List[Violation]:
    """Check every accepted record against each enabled constraint.

    Returns an empty list when the provenance is sound. Rejected records
    are ignored (they assert nothing).
    """
    violations: List[Violation] = []

    def bad(index: int, field: str, detail: str) -> None:
        violations.append(Violation(index, field, detail))

    for index, record in enumerate(records):
        if not record.accepted:
            continue
        if record.item_kind not in (ITEM_RARE_WORD, ITEM_DICTIONARY):
            bad(index, "item_kind", f"unknown kind {record.item_kind!r}")
            continue
        if (
            record.base_sentence_id is None
            or not 0 <= record.base_sentence_id < len(corpus)
        ):
            bad(index, "base_sentence_id", f"out of range: {record.base_sentence_id}")
            continue
        if None in (
            record.source_span,
            record.source_inserted,
            record.target_span,
            record.target_inserted,
            record.word_sim,
            record.lm_ratio_src,
            record.lm_ratio_tgt,
        ):
            bad(index, "fields", "accepted record with missing gate evidence")
            continue

        source = corpus.source[record.base_sentence_id]
        target = corpus.target[record.base_sentence_id]
        s_start, s_end = record.source_span
        t_start, t_end = record.target_span
        if not (0 <= s_start <= s_end < len(source.tokens)):
            bad(index, "source_span", f"out of range: {record.source_span}")
            continue
        if not (0 <= t_start <= t_end < len(target.tokens)):
            bad(index, "target_span", f"out of range: {record.target_span}")
            continue

        # Word-similarity gate: recompute the cosine from the raw resources.
        if record.item_kind == ITEM_RARE_WORD:
            query_vec = embeddings.get(record.item_surface[0])
        else:
            query_vec = term_embedding(record.item_surface, embeddings).vector
        candidate_token = source.tokens[s_start]
        candidate_vec = embeddings.get(candidate_token)
        if query_vec is None or candidate_vec is None:
            bad(index, "word_sim", "embedding missing for recomputation")
            continue
        recomputed_sim = cosine(query_vec, candidate_vec)
        if abs(recomputed_sim - record.word_sim) > SCORE_TOLERANCE:
            bad(
                index,
                "word_sim",
                f"recorded {record.word_sim!r} != recomputed {recomputed_sim!r}",
            )
        if config.use_word_sim and recomputed_sim < config.word_sim_min:
            bad(
                index,
                "word_sim",
                f"{recomputed_sim!r} below threshold {config.word_sim_min!r}",
            )

        # Syntactic gate.
        mode = config.syntactic_mode()
        if mode != agreement.MODE_OFF:
            item_token = (
                record.item_surface[0]
                if record.item_kind == ITEM_RARE_WORD
                else record.item_surface[-1]
            )
            item_annotation = lexicon.get(item_token) if lexicon else None
            candidate_annotation = lexicon.get(candidate_token) if lexicon else None
            if item_annotation is None or candidate_annotation is None:
                bad(index, "syntactic", "annotation missing for recomputation")
            elif not agreement.syntactic_ok(
                config.src_lang_role, item_annotation, candidate_annotation, mode
            ):
                bad(index, "syntactic", "agreement check fails on recomputation")

        # Language-model gates: rebuild the synthetic sides and re-score.
        synthetic_src = _splice(source.tokens, record.source_span, record.source_inserted)
        synthetic_tgt = _splice(target.tokens, record.target_span, record.target_inserted)
        src_original = window_score(lm_src, source.tokens, record.source_span)
        src_synthetic = window_score(
            lm_src,
            synthetic_src,
            (s_start, s_start + len(record.source_inserted) - 1),
        )
        ratio_src = src_synthetic / src_original
        if abs(ratio_src - record.lm_ratio_src) > SCORE_TOLERANCE:
            bad(
                index,
                "lm_ratio_src",
                f"recorded {record.lm_ratio_src!r} != recomputed {ratio_src!r}",
            )
        if ratio_src < config.lm_threshold:
            bad(index, "lm_ratio_src", f"{ratio_src!r} below threshold {config.lm_threshold!r}")

        tgt_original = window_score(lm_tgt, target.tokens, record.target_span)
        tgt_synthetic = window_score(
            lm_tgt,
            synthetic_tgt,
            (t_start, t_start + len(record.target_inserted) - 1),
        )
        ratio_tgt = tgt_synthetic / tgt_original
        if abs(ratio_tgt - record.lm_ratio_tgt) > SCORE_TOLERANCE:
            bad(
                index,
                "lm_ratio_tgt",
                f"recorded {record.lm_ratio_tgt!r} != recomputed {ratio_tgt!r}",
            )
        if ratio_tgt < config.lm_threshold:
            bad(index, "lm_ratio_tgt", f"{ratio_tgt!r} below threshold {config.lm_threshold!r}")

    return violations
