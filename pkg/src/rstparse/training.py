"""Task losses, dynamic loss weighting and the epoch loop."""
from __future__ import annotations

import copy
import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .autodiff import tensor as T
from .autodiff.optim import Adam, AdamHyper
from .autodiff.tensor import Tensor
from .metrics import FIELDS, SUFFIX, ScoreReport, parseval, segmentation_counts
from .model import JointParser, ParserConfig, PointerSegmenter, TokenVocab
from .tree import CONVENTIONS, ORIGINAL
from .treebank import Corpus, document_labels

log = logging.getLogger(__name__)

K_TASKS = 3


# -- losses -----------------------------------------------------------------------


def loss_segmentation(tag_logits: Tensor, gold_tags) -> Tensor:
    """Summed token NLL; ``tag_logits`` are unnormalized (log-probabilities also work)."""
    if tag_logits.shape[0] != len(gold_tags):
        raise ValueError(f"{tag_logits.shape[0]} tag rows for {len(gold_tags)} gold tags")
    return T.cross_entropy(tag_logits, gold_tags)


def loss_structure(split_logits: Optional[Tensor], gold_splits, mask=None) -> Tensor:
    """Summed NLL of the gold split point at each teacher-forced step.

    ``gold_splits`` are ``(i, j, k)`` records; the target column is ``k - 1``.
    """
    if split_logits is None or len(gold_splits) == 0:
        if gold_splits:
            raise ValueError(f"{len(gold_splits)} gold splits but no decoder steps")
        return Tensor(0.0)
    if split_logits.shape[0] != len(gold_splits):
        raise ValueError(f"{split_logits.shape[0]} decoder steps for {len(gold_splits)} gold splits")
    return T.cross_entropy(split_logits, [k - 1 for _, _, k in gold_splits], mask)


def loss_label(label_logits: Optional[Tensor], gold_label_ids) -> Tensor:
    """Summed NLL over the internal spans' composite labels."""
    if label_logits is None or len(gold_label_ids) == 0:
        if len(gold_label_ids):
            raise ValueError(f"{len(gold_label_ids)} gold labels but no label scores")
        return Tensor(0.0)
    if label_logits.shape[0] != len(gold_label_ids):
        raise ValueError(f"{label_logits.shape[0]} label rows for {len(gold_label_ids)} gold labels")
    return T.cross_entropy(label_logits, gold_label_ids)


def total_loss(loss_e, loss_s, loss_l, weights) -> Tensor:
    w1, w2, w3 = weights
    return T.add(T.add(T.mul(loss_e, w1), T.mul(loss_s, w2)), T.mul(loss_l, w3))


# -- dynamic weighting ----------------------------------------------------------------


@dataclass
class TaskLossTrace:
    """Per-epoch mean task losses and the weights used in each epoch."""

    temp: float = 2.0
    k: int = K_TASKS
    losses: list = field(default_factory=list)  # [(L_e, L_s, L_l)] per epoch (or iteration)
    weights: list = field(default_factory=list)  # [(lam_1, lam_2, lam_3)] per epoch
    dev_scores: list = field(default_factory=list)  # flat ScoreReport dicts per epoch

    def to_csv(self) -> str:
        buf = io.StringIO()
        score_keys = list(self.dev_scores[0]) if self.dev_scores else []
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "L_e", "L_s", "L_l", "lambda_1", "lambda_2", "lambda_3", *score_keys])
        for epoch, (losses, lam) in enumerate(zip(self.losses, self.weights)):
            scores = self.dev_scores[epoch] if epoch < len(self.dev_scores) else {}
            writer.writerow(
                [epoch, *(f"{x:.6g}" for x in losses), *(f"{x:.6g}" for x in lam),
                 *(f"{scores[k]:.6g}" if k in scores else "" for k in score_keys)]
            )
        return buf.getvalue()


def dynamic_weights_from_losses(prev, prev2, temp: float, k: int = K_TASKS) -> tuple:
    """Weights from the ratios of the two previous loss levels, softmax-tempered to sum to k."""
    ratios = []
    for task, (a, b) in enumerate(zip(prev, prev2)):
        if b == 0:
            log.warning("task %d had zero loss two steps back; using ratio 1", task)
            ratios.append(1.0)
        else:
            ratios.append(a / b)
    scaled = np.array(ratios) / temp
    e = np.exp(scaled - scaled.max())
    return tuple(float(x) for x in k * e / e.sum())


def dynamic_weights(trace: TaskLossTrace, epoch: int) -> tuple:
    """Weights for ``epoch``; uniform until two previous epochs are recorded."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    if epoch < 2 or len(trace.losses) < epoch:
        return (1.0,) * trace.k
    return dynamic_weights_from_losses(trace.losses[epoch - 1], trace.losses[epoch - 2], trace.temp, trace.k)


# -- configuration -------------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 15
    batch_size: int = 12
    lr: float = 1e-3
    lr_decay: float = 0.9  # multiplier applied once per epoch
    weight_decay: float = 0.01
    grad_clip: Optional[float] = 5.0
    seed: int = 0
    temp: float = 2.0
    loss_weights: Union[str, tuple] = "dynamic"
    ratio_mode: str = "epoch"  # or "iteration"
    eval_every: int = 1

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("epochs, batch_size and eval_every must be positive")
        if self.lr <= 0 or self.lr_decay <= 0 or self.temp <= 0:
            raise ValueError("lr, lr_decay and temp must be positive")
        if self.ratio_mode not in ("epoch", "iteration"):
            raise ValueError(f"ratio_mode must be 'epoch' or 'iteration', got {self.ratio_mode!r}")
        if self.loss_weights != "dynamic":
            w = tuple(self.loss_weights)
            if len(w) != 3 or any(x < 0 for x in w):
                raise ValueError(f"fixed loss weights must be three non-negative numbers, got {w}")


def parse_loss_weights(text: str):
    """``"dynamic"`` or ``"fixed=a,b,c"``."""
    if text == "dynamic":
        return "dynamic"
    if text.startswith("fixed="):
        parts = text[len("fixed="):].split(",")
        if len(parts) == 3:
            return tuple(float(p) for p in parts)
    raise ValueError(f"loss weights must be 'dynamic' or 'fixed=a,b,c', got {text!r}")


# -- evaluation ----------------------------------------------------------------------


def evaluate(parser: JointParser, corpus, convention="both") -> ScoreReport:
    """Trees scored with gold segmentation; ``seg_f1`` from the segmenter's own predictions."""
    docs = [d for d in corpus if d.gold_tree is not None]
    preds = [parser.parse_document(d, "gold") for d in docs]
    report = parseval(
        [(tree, spans) for spans, tree in preds],
        [(d.gold_tree, d.gold_edu_spans) for d in docs],
        convention,
    )
    report.seg = segmentation_counts(
        [parser.predict_segments(d.tokens) for d in docs], [d.gold_edu_spans for d in docs]
    )
    return report


# -- training loop -----------------------------------------------------------------------


@dataclass
class TrainResult:
    parser: JointParser
    trace: TaskLossTrace
    dev_reports: list
    best_epoch: int
    epochs_run: int
    seconds: float


def _check_vocab(train: Corpus, dev: Corpus):
    unknown = sorted(
        {str(lab) for d in dev for lab in document_labels(d)} - {str(x) for x in train.label_vocab.composite_labels}
    )
    if unknown:
        raise ValueError(f"vocabulary mismatch: dev labels missing from training vocabulary: {unknown}")


def _clip(grads: dict, limit: Optional[float]) -> dict:
    if limit is None:
        return grads
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm <= limit:
        return grads
    return {n: g * (limit / norm) for n, g in grads.items()}


def train(
    train_corpus: Corpus,
    dev_corpus: Corpus,
    config: TrainConfig = TrainConfig(),
    parser_config: ParserConfig = ParserConfig(),
    rng: Optional[np.random.Generator] = None,
    parser: Optional[JointParser] = None,
    stop_when: Optional[Callable[[int, ScoreReport], bool]] = None,
    selection=("full", ORIGINAL),
) -> TrainResult:
    """Train the joint parser and return the best checkpoint on ``dev_corpus``.

    One generator (seeded from ``config.seed`` unless ``rng`` is given) drives
    initialization, shuffling and dropout. ``stop_when(epoch, report)`` may end
    training early after an evaluation.
    """
    config.validate()
    docs = [d for d in train_corpus if d.gold_tree is not None]
    if not docs or not any(True for d in dev_corpus if d.gold_tree is not None):
        raise ValueError("training and dev corpora must both contain annotated documents")
    _check_vocab(train_corpus, dev_corpus)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    if parser is None:
        parser = JointParser(parser_config, TokenVocab.from_documents(docs), train_corpus.label_vocab, rng)
    optim = Adam(parser.params, AdamHyper(lr=config.lr, weight_decay=config.weight_decay))
    trace = TaskLossTrace(temp=config.temp)
    iteration_losses: list = []
    reports, best_score, best_state, best_epoch = [], -1.0, None, -1
    started = time.perf_counter()
    epoch = -1
    for epoch in range(config.epochs):
        lr = config.lr * config.lr_decay**epoch
        if config.loss_weights == "dynamic" and config.ratio_mode == "epoch":
            epoch_weights = dynamic_weights(trace, epoch)
        elif config.loss_weights != "dynamic":
            epoch_weights = tuple(float(x) for x in config.loss_weights)
        else:
            epoch_weights = None
        order = rng.permutation(len(docs))
        sums = np.zeros(3)
        used_weights = []
        for start in range(0, len(docs), config.batch_size):
            batch = [docs[i] for i in order[start : start + config.batch_size]]
            if epoch_weights is None:
                if len(iteration_losses) >= 2:
                    weights = dynamic_weights_from_losses(iteration_losses[-1], iteration_losses[-2], config.temp)
                else:
                    weights = (1.0,) * K_TASKS
            else:
                weights = epoch_weights
            parser.params.zero_grad()
            batch_losses = np.zeros(3)
            for doc in batch:
                le, ls, ll = parser.losses(doc, training=True, rng=rng)
                loss = total_loss(le, ls, ll, [w / len(batch) for w in weights])
                if loss.requires_grad:
                    loss.backward()
                batch_losses += [le.item(), ls.item(), ll.item()]
            sums += batch_losses
            iteration_losses.append(tuple(batch_losses / len(batch)))
            used_weights.append(weights)
            optim.step(lr=lr, grads=_clip(parser.params.grads(), config.grad_clip))
        trace.losses.append(tuple(float(x) for x in sums / len(docs)))
        trace.weights.append(tuple(float(x) for x in np.mean(used_weights, axis=0)))
        if (epoch + 1) % config.eval_every == 0 or epoch == config.epochs - 1:
            report = evaluate(parser, dev_corpus)
            reports.append((epoch, report))
            trace.dev_scores.append(report.flat())
            score = report.score(*selection)
            log.info("epoch %d losses %s weights %s dev %s", epoch, trace.losses[-1], trace.weights[-1],
                     {k: round(v, 4) for k, v in report.flat().items()})
            if score > best_score:
                best_score, best_state, best_epoch = score, parser.params.state_dict(), epoch
            if stop_when is not None and stop_when(epoch, report):
                break
        else:
            trace.dev_scores.append({})
    if best_state is not None:
        parser.params.load_state_dict(best_state)
    return TrainResult(parser, trace, reports, best_epoch, epoch + 1, time.perf_counter() - started)


def train_pointer_segmenter(corpus: Corpus, epochs: int = 30, lr: float = 1e-2, seed: int = 0,
                            d_tok: int = 32, hidden: int = 32) -> PointerSegmenter:
    """Fit the pointer baseline with teacher forcing over gold EDU ends."""
    rng = np.random.default_rng(seed)
    docs = [d for d in corpus if d.gold_edu_spans is not None]
    model = PointerSegmenter(TokenVocab.from_documents(docs), rng, d_tok, hidden)
    optim = Adam(model.params, AdamHyper(lr=lr))
    for _ in range(epochs):
        for i in rng.permutation(len(docs)):
            model.params.zero_grad()
            model.loss(docs[i]).backward()
            optim.step(grads=_clip(model.params.grads(), 5.0))
    return model
