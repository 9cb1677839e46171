import pytest

from rstparse.synthetic import SynthConfig, default_composite_labels, generate_synthetic
from rstparse.tree import Leaf, validate_tree
from rstparse.treebank import write_corpus


def test_single_edu_document():
    corpus = generate_synthetic(SynthConfig(n_docs=1, m_range=(1, 1)))
    (doc,) = corpus.documents
    assert doc.n_edus == 1 and doc.gold_tree == Leaf(1)


def test_fifty_docs_validate():
    corpus = generate_synthetic(SynthConfig(n_docs=50, m_range=(4, 10), seed=13))
    assert len(corpus) == 50
    for doc in corpus:
        assert 4 <= doc.n_edus <= 10
        assert validate_tree(doc.gold_tree, doc.n_edus).ok
        assert all(tok.startswith("en_") for tok in doc.tokens)


def test_byte_identical(tmp_path):
    cfg = SynthConfig(n_docs=12, languages=("en", "es"), seed=4)
    write_corpus(generate_synthetic(cfg), tmp_path / "a.jsonl")
    write_corpus(generate_synthetic(cfg), tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_round_robin_languages():
    corpus = generate_synthetic(SynthConfig(n_docs=6, languages=("en", "es", "pt")))
    assert [d.lang for d in corpus] == ["en", "es", "pt"] * 2
    assert corpus.languages == {"en", "es", "pt"}


def test_vocab_too_small():
    with pytest.raises(ValueError, match="vocab_size"):
        SynthConfig(vocab_size=50).validate()


def test_default_labels_cover_inventory():
    labels = default_composite_labels()
    assert len(labels) == len(set(labels)) == 41
    assert len({lab.relation for lab in labels}) == 18
