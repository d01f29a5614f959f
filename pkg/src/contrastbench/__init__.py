"""contrastbench: build contrast benchmarks from captioned image corpora and
quantify how dataset structure and model rankings transfer between them."""

__version__ = "0.1.0"

from .corpus import CaptionRecord, normalize_caption, open_corpus
from .embeddings import (
    EmbeddingStore,
    MockProvider,
    read_sidecar,
    similarity,
    top_n_mean,
    write_sidecar,
)
from .lexicon import (
    ReferenceClass,
    SubtreeStats,
    Synset,
    SynsetGraph,
    dataset_pair_stats,
    density,
    density_from_counts,
    find_communities,
    load_lexicon,
    load_reference,
    modularity,
    parent_overlap,
    subtree_stats,
)
from .matcher import LemmaIndex, MatchResult, extract_synsets
from .pipeline import (
    DatasetManifest,
    PipelineConfig,
    PipelineStores,
    read_manifest,
    run_pipeline,
    verify_manifest,
    write_manifest,
)
from .ranks import (
    AccuracyTable,
    RankReport,
    compare_protocols,
    kendall_tau,
    linear_fit,
    ranking,
    relative_improvement,
)

__all__ = [
    "__version__",
    "CaptionRecord",
    "normalize_caption",
    "open_corpus",
    "EmbeddingStore",
    "MockProvider",
    "read_sidecar",
    "similarity",
    "top_n_mean",
    "write_sidecar",
    "ReferenceClass",
    "SubtreeStats",
    "Synset",
    "SynsetGraph",
    "dataset_pair_stats",
    "density",
    "density_from_counts",
    "find_communities",
    "load_lexicon",
    "load_reference",
    "modularity",
    "parent_overlap",
    "subtree_stats",
    "LemmaIndex",
    "MatchResult",
    "extract_synsets",
    "DatasetManifest",
    "PipelineConfig",
    "PipelineStores",
    "read_manifest",
    "run_pipeline",
    "verify_manifest",
    "write_manifest",
    "AccuracyTable",
    "RankReport",
    "compare_protocols",
    "kendall_tau",
    "linear_fit",
    "ranking",
    "relative_improvement",
]
