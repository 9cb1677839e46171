"""Input checks shared by the estimator and the CLI."""
from __future__ import annotations

from typing import Iterable

from .tree import Document
from .treebank import Corpus, CorpusValidationError, validate_document


def check_documents(X, require_segmentation: bool = False, require_tree: bool = False) -> list[Document]:
    """Coerce ``X`` (a Corpus, a Document or an iterable of Documents) to a validated list."""
    if isinstance(X, Document):
        docs = [X]
    elif isinstance(X, Corpus):
        docs = list(X.documents)
    elif isinstance(X, (str, bytes)) or not isinstance(X, Iterable):
        raise TypeError(f"expected a Corpus or an iterable of Documents, got {type(X).__name__}")
    else:
        docs = list(X)
    if not docs:
        raise ValueError("no documents given")
    for doc in docs:
        if not isinstance(doc, Document):
            raise TypeError(f"expected Document instances, got {type(doc).__name__}")
        validate_document(doc)
        if require_segmentation and doc.gold_edu_spans is None:
            raise CorpusValidationError(doc.doc_id, "gold EDU segmentation required")
        if require_tree and doc.gold_tree is None:
            raise CorpusValidationError(doc.doc_id, "gold tree required")
    return docs


def as_corpus(X, require_tree: bool = False) -> Corpus:
    if isinstance(X, Corpus):
        check_documents(X, require_tree=require_tree)
        return X
    return Corpus.from_documents(check_documents(X, require_tree=require_tree))
