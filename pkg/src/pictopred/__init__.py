"""Pictogram prediction toolkit for AAC boards.

Builds a pictogram-sentence corpus from practitioner sentences plus
text-generation augmentation, adapts a masked-language encoder to a
controlled pictogram vocabulary, evaluates it, and serves ranked
next-pictogram predictions over HTTP.
"""

__version__ = "0.1.0"

from .corpus import Corpus, CorpusStats, NaturalSentence, clean, corpus_stats, ingest_collected, split
from .coverage import coverage
from .embeddings import EmbeddingMatrix, build_embedding_matrix
from .evaluation import EvalReport, evaluate, pseudo_perplexity, topn_accuracy
from .textpicto import PictoSentence, PictoToken, sentence_to_picto, tokenize_mwe
from .training import AdaptedModel, TrainingConfig, finetune, swap_vocabulary
from .vocabulary import Keyword, PictogramEntry, Vocabulary, load_vocabulary

__all__ = [
    "AdaptedModel",
    "Corpus",
    "CorpusStats",
    "EmbeddingMatrix",
    "EvalReport",
    "Keyword",
    "NaturalSentence",
    "PictoSentence",
    "PictoToken",
    "PictogramEntry",
    "TrainingConfig",
    "Vocabulary",
    "build_embedding_matrix",
    "clean",
    "corpus_stats",
    "coverage",
    "evaluate",
    "finetune",
    "ingest_collected",
    "load_vocabulary",
    "pseudo_perplexity",
    "sentence_to_picto",
    "split",
    "swap_vocabulary",
    "tokenize_mwe",
    "topn_accuracy",
]
