import numpy as np
import pytest

from rstparse.tree import Document, EduSpan, Internal, Leaf, RelationLabel, spans_from_breaks


def lab(text):
    return RelationLabel.parse(text)


def fig1_tree():
    """((e1 e2) e3) (e4 e5), the five-EDU example tree used across tests."""
    return Internal(
        Internal(Internal(Leaf(1), Leaf(2), lab("NS-Elaboration")), Leaf(3), lab("NS-Attribution")),
        Internal(Leaf(4), Leaf(5), lab("NN-Joint")),
        lab("SN-Background"),
    )


def fig1_document(doc_id="fig1", lang="en"):
    tokens = tuple(f"{lang}_w{i}" for i in range(12))
    return Document(doc_id, lang, tokens, spans_from_breaks([1, 3, 6, 8, 11]), fig1_tree())


def unit_spans(m):
    return tuple(EduSpan(i, i) for i in range(m))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fig1():
    return fig1_tree()


@pytest.fixture
def fig1_doc():
    return fig1_document()
