"""Joint multilingual RST discourse segmentation and parsing."""

__version__ = "0.1.0"

from .augment import (  # noqa: E402
    DictionaryTranslator,
    ExternalTranslator,
    TranslationError,
    cross_translate,
    single_direction_translate,
)
from .estimator import DiscourseParser  # noqa: E402
from .metrics import ScoreReport, parseval, segmentation_f1  # noqa: E402
from .model import JointParser, ParserConfig, TokenVocab  # noqa: E402
from .synthetic import SynthConfig, generate_synthetic  # noqa: E402
from .training import TaskLossTrace, TrainConfig, dynamic_weights, train  # noqa: E402
from .tree import (  # noqa: E402
    Document,
    EduSpan,
    Internal,
    Leaf,
    Nuclearity,
    RelationLabel,
    build_from_splits,
    constituents,
    split_sequence,
    validate_tree,
)
from .treebank import Corpus, LabelVocab, read_corpus, write_corpus  # noqa: E402

__all__ = [
    "Corpus", "DictionaryTranslator", "DiscourseParser", "Document", "EduSpan", "ExternalTranslator",
    "Internal", "JointParser", "LabelVocab", "Leaf", "Nuclearity", "ParserConfig", "RelationLabel",
    "ScoreReport", "SynthConfig", "TaskLossTrace", "TokenVocab", "TrainConfig", "TranslationError",
    "build_from_splits", "constituents", "cross_translate", "dynamic_weights", "generate_synthetic",
    "parseval", "read_corpus", "segmentation_f1", "single_direction_translate", "split_sequence",
    "train", "validate_tree", "write_corpus", "__version__",
]
