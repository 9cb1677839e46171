import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rstparse.estimator import DiscourseParser
from rstparse.synthetic import SynthConfig, generate_synthetic
from rstparse.tree import Document, validate_tree
from rstparse.treebank import CorpusValidationError
from rstparse.validation import as_corpus, check_documents

SMALL = dict(d_tok=8, enc_hidden=8, cls_hidden=8, dropout=0.0, embed_dropout=0.0, epochs=2, batch_size=3)


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic(SynthConfig(n_docs=6, m_range=(2, 5), seed=17))


@pytest.fixture(scope="module")
def fitted(corpus):
    return DiscourseParser(**SMALL).fit(corpus)


def test_params_round_trip():
    est = DiscourseParser(lr=0.01, loss_weights=(1.0, 2.0, 3.0))
    assert est.get_params()["lr"] == 0.01
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    est.set_params(epochs=3)
    assert est.epochs == 3


def test_not_fitted(corpus):
    with pytest.raises(NotFittedError):
        DiscourseParser().predict(corpus)


def test_invalid_params(corpus):
    with pytest.raises(ValueError):
        DiscourseParser(dropout=1.5).fit(corpus)


def test_fit_predict(fitted, corpus):
    assert fitted.n_epochs_ == 2
    preds = fitted.predict(corpus)
    assert len(preds) == len(corpus)
    for spans, tree in preds:
        assert validate_tree(tree, len(spans)).ok
    gold_mode = fitted.predict(corpus, seg_mode="gold")
    assert [tuple(s) for s, _ in gold_mode] == [d.gold_edu_spans for d in corpus]


def test_predict_documents(fitted):
    raw = [Document("r", "en", ("en_1", "en_2", "en_3"))]
    (doc,) = fitted.predict_documents(raw)
    assert doc.doc_id == "r" and doc.gold_tree is not None


def test_score(fitted, corpus):
    assert 0.0 <= fitted.score(corpus) <= 1.0
    report = fitted.evaluate(corpus, convention="both")
    assert report.score("full", "original") == pytest.approx(fitted.score(corpus))


def test_save_load(fitted, corpus, tmp_path):
    fitted.save(tmp_path / "est.json")
    loaded = DiscourseParser.load(tmp_path / "est.json")
    assert loaded.get_params() == fitted.get_params()
    assert loaded.predict(corpus) == fitted.predict(corpus)


def test_same_seed_same_model(corpus):
    a = DiscourseParser(**SMALL, seed=5).fit(corpus).parser_.params.state_dict()
    b = DiscourseParser(**SMALL, seed=5).fit(corpus).parser_.params.state_dict()
    assert all(np.array_equal(a[k], b[k]) for k in a)


class TestValidation:
    def test_coercion(self, corpus):
        assert len(check_documents(corpus)) == len(corpus)
        assert len(check_documents(corpus.documents[0])) == 1
        assert as_corpus(list(corpus)) == corpus

    @pytest.mark.parametrize("bad", ["text", 3, [1, 2]])
    def test_type_errors(self, bad):
        with pytest.raises(TypeError):
            check_documents(bad)

    def test_empty(self):
        with pytest.raises(ValueError):
            check_documents([])

    def test_requirements(self):
        raw = Document("r", "en", ("a",))
        with pytest.raises(CorpusValidationError, match="segmentation"):
            check_documents([raw], require_segmentation=True)
        with pytest.raises(CorpusValidationError, match="tree"):
            check_documents([raw], require_tree=True)
