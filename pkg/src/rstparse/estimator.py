"""scikit-learn style wrapper around training and parsing."""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .metrics import ScoreReport, parseval
from .model import JointParser, ParserConfig
from .training import TrainConfig, train
from .tree import ORIGINAL, Document
from .validation import as_corpus, check_documents


class DiscourseParser(BaseEstimator):
    """Joint segmenter and tree parser.

    ``X`` is a :class:`~rstparse.treebank.Corpus` or a list of
    :class:`~rstparse.tree.Document`; gold annotation travels inside the
    documents, so ``y`` is ignored.

    >>> est = DiscourseParser(epochs=1).fit(train_docs)        # doctest: +SKIP
    >>> spans, tree = est.predict(raw_docs)[0]                 # doctest: +SKIP
    """

    def __init__(self, d_tok=64, enc_hidden=64, cls_hidden=64, dropout=0.5, embed_dropout=0.2,
                 classifier_uses_state=False, epochs=15, batch_size=12, lr=1e-3, lr_decay=0.9,
                 weight_decay=0.01, grad_clip=5.0, temp=2.0, loss_weights="dynamic",
                 ratio_mode="epoch", eval_every=1, seed=0):
        self.d_tok = d_tok
        self.enc_hidden = enc_hidden
        self.cls_hidden = cls_hidden
        self.dropout = dropout
        self.embed_dropout = embed_dropout
        self.classifier_uses_state = classifier_uses_state
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.lr_decay = lr_decay
        self.weight_decay = weight_decay
        self.grad_clip = grad_clip
        self.temp = temp
        self.loss_weights = loss_weights
        self.ratio_mode = ratio_mode
        self.eval_every = eval_every
        self.seed = seed

    def _configs(self):
        pc = ParserConfig(
            d_tok=self.d_tok, enc_hidden=self.enc_hidden, cls_hidden=self.cls_hidden,
            dropout=self.dropout, embed_dropout=self.embed_dropout,
            classifier_uses_state=self.classifier_uses_state,
        )
        tc = TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, lr=self.lr, lr_decay=self.lr_decay,
            weight_decay=self.weight_decay, grad_clip=self.grad_clip, seed=self.seed, temp=self.temp,
            loss_weights=self.loss_weights, ratio_mode=self.ratio_mode, eval_every=self.eval_every,
        )
        pc.validate()
        tc.validate()
        return pc, tc

    def fit(self, X, y=None, dev=None, stop_when=None):
        """Train on ``X``; the best epoch on ``dev`` (default: ``X``) is kept."""
        pc, tc = self._configs()
        train_corpus = as_corpus(X, require_tree=True)
        dev_corpus = train_corpus if dev is None else as_corpus(dev, require_tree=True)
        result = train(train_corpus, dev_corpus, tc, pc, stop_when=stop_when)
        self.parser_ = result.parser
        self.trace_ = result.trace
        self.best_epoch_ = result.best_epoch
        self.n_epochs_ = result.epochs_run
        self.label_vocab_ = train_corpus.label_vocab
        return self

    def predict(self, X, seg_mode: str = "predicted") -> list:
        """``[(edu_spans, tree), ...]`` in input order."""
        check_is_fitted(self, "parser_")
        docs = check_documents(X, require_segmentation=seg_mode == "gold")
        return [self.parser_.parse_document(d, seg_mode) for d in docs]

    def predict_documents(self, X, seg_mode: str = "predicted") -> list[Document]:
        docs = check_documents(X, require_segmentation=seg_mode == "gold")
        return [
            Document(d.doc_id, d.lang, d.tokens, tuple(spans), tree)
            for d, (spans, tree) in zip(docs, self.predict(docs, seg_mode))
        ]

    def evaluate(self, X, seg_mode: str = "gold", convention="both") -> ScoreReport:
        docs = check_documents(X, require_tree=True)
        preds = self.predict(docs, seg_mode)
        return parseval(
            [(tree, spans) for spans, tree in preds],
            [(d.gold_tree, d.gold_edu_spans) for d in docs],
            convention,
        )

    def score(self, X, y=None) -> float:
        """Full F1 under the original convention with gold segmentation."""
        return self.evaluate(X, "gold", ORIGINAL).score("full", ORIGINAL)

    def save(self, path):
        check_is_fitted(self, "parser_")
        self.parser_.save(path, {"estimator_params": self.get_params(), "best_epoch": self.best_epoch_})

    @classmethod
    def load(cls, path) -> "DiscourseParser":
        parser = JointParser.load(path)
        extra = getattr(parser, "extra", {})
        est = cls(**extra.get("estimator_params", {}))
        est.parser_ = parser
        est.label_vocab_ = parser.label_vocab
        est.best_epoch_ = extra.get("best_epoch", -1)
        est.trace_ = None
        est.n_epochs_ = None
        return est
