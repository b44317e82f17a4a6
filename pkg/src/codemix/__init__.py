"""Code-mixed treebank translation and a biaffine parser for cross-lingual transfer."""

from .alignment import (
    AlignmentMatrix,
    LexicalTable,
    SentencePair,
    best_alignments,
    derive_matrix,
    load_lexical_table,
    load_matrix_file,
    load_pairs,
)
from .conllu import DependencyTree, Token, Treebank, read_conllu, validate_tree, write_conllu
from .evaluation import MetricsReport, ablation, score, sweep_lambda
from .parser import BiaffineParser, decode_mst
from .resources import ClusterMap, EmbeddingTable, featurize, load_clusters, load_embeddings
from .translate import (
    AlignedCorpus,
    CodeMixConfig,
    CodeMixer,
    mix_corpora,
    translate_tree,
    translate_treebank,
)

__version__ = "0.1.0"

__all__ = [
    "AlignedCorpus",
    "AlignmentMatrix",
    "BiaffineParser",
    "ClusterMap",
    "CodeMixConfig",
    "CodeMixer",
    "DependencyTree",
    "EmbeddingTable",
    "LexicalTable",
    "MetricsReport",
    "SentencePair",
    "Token",
    "Treebank",
    "ablation",
    "best_alignments",
    "decode_mst",
    "derive_matrix",
    "featurize",
    "load_clusters",
    "load_embeddings",
    "load_lexical_table",
    "load_matrix_file",
    "load_pairs",
    "mix_corpora",
    "read_conllu",
    "score",
    "sweep_lambda",
    "translate_tree",
    "translate_treebank",
    "validate_tree",
    "write_conllu",
]
