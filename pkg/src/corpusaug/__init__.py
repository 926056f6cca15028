"""Pseudo-parallel corpus generation by constrained word and phrase replacement.

The toolkit builds synthetic sentence pairs from an existing parallel corpus
by replacing selected words with rare words or bilingual-dictionary terms,
gated by embedding similarity, POS/morphology agreement, and a trigram
language-model context check.
"""

__version__ = "0.1.0"
