"""The joint segmenter / top-down parser network.

Pipeline for one document:

1. token vectors from a pluggable backbone (trainable embedding table here);
2. per-token B/I/E tagging with a linear head;
3. EDU vectors: mean-pooled tokens -> BiGRU, concatenated with the raw
   vectors of each EDU's first and last token, projected linearly;
4. stack-driven depth-first splitting with a pointer (dot-product attention
   between the decoder state and EDU vectors);
5. a bi-affine classifier over (nuclearity, relation) composite labels for
   every split.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from .autodiff import tensor as T
from .autodiff.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .autodiff.layers import BiGRU, Biaffine, Dense, Embedding, GRU, GRUCell, ModelParams
from .autodiff.tensor import Tensor, no_grad
from .tree import (
    Document,
    DiscourseTree,
    EduSpan,
    RelationLabel,
    build_from_splits,
    split_sequence,
    tree_labels,
)
from .treebank import LabelVocab

TAG_B, TAG_I, TAG_E = 0, 1, 2
TAG_NAMES = ("B", "I", "E")
UNK = "<unk>"


@dataclass
class ParserConfig:
    d_tok: int = 64
    enc_hidden: int = 64  # also the EDU vector and decoder state size
    cls_hidden: int = 64
    dropout: float = 0.5
    embed_dropout: float = 0.2
    positional: bool = False
    max_positions: int = 1024
    classifier_uses_state: bool = False

    def validate(self):
        for name in ("d_tok", "enc_hidden", "cls_hidden", "max_positions"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("dropout", "embed_dropout"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")


class TokenVocab:
    """Token -> row index; row 0 is the unknown symbol."""

    def __init__(self, tokens: Sequence[str]):
        self.tokens = [UNK] + sorted(set(tokens) - {UNK})
        self._index = {t: i for i, t in enumerate(self.tokens)}

    @classmethod
    def from_documents(cls, docs) -> "TokenVocab":
        return cls([tok for d in docs for tok in d.tokens])

    def __len__(self) -> int:
        return len(self.tokens)

    def ids(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self._index.get(t, 0) for t in tokens], dtype=np.int64)


class TokenBackbone(Protocol):
    """Anything mapping a token sequence to an ``(n, d_tok)`` tensor."""

    dim: int

    def __call__(self, tokens: Sequence[str]) -> Tensor: ...


class EmbeddingBackbone:
    def __init__(self, params: ModelParams, vocab: TokenVocab, dim: int, rng,
                 positional: bool = False, max_positions: int = 1024):
        self.vocab = vocab
        self.dim = dim
        self.table = Embedding(params, "embed.tokens", len(vocab), dim, "e", rng)
        self.positions = (
            Embedding(params, "embed.positions", max_positions, dim, "e", rng) if positional else None
        )
        self.max_positions = max_positions

    def __call__(self, tokens: Sequence[str]) -> Tensor:
        reps = self.table(self.vocab.ids(tokens))
        if self.positions is not None:
            pos = np.minimum(np.arange(len(tokens)), self.max_positions - 1)
            reps = reps + self.positions(pos)
        return reps


def gold_tags(spans: Sequence[EduSpan]) -> np.ndarray:
    """B/I/E ids; a one-token EDU is tagged B."""
    n = spans[-1].end + 1
    tags = np.full(n, TAG_I, dtype=np.int64)
    for s in spans:
        tags[s.start] = TAG_B
        if s.end > s.start:
            tags[s.end] = TAG_E
    return tags


def decode_segments(tags) -> list[EduSpan]:
    """Turn a tag sequence into EDU spans, repairing inconsistent tags.

    An EDU opens at the first token, at every B, and at any I/E right after
    an E; the last token always closes the final EDU.
    """
    tags = [TAG_NAMES.index(t) if isinstance(t, str) else int(t) for t in tags]
    if not tags:
        raise ValueError("empty tag sequence")
    starts = [0] + [
        p for p in range(1, len(tags))
        if tags[p] == TAG_B or tags[p - 1] == TAG_E
    ]
    ends = [s - 1 for s in starts[1:]] + [len(tags) - 1]
    return [EduSpan(s, e) for s, e in zip(starts, ends)]


def pool_matrix(ranges, n: int) -> np.ndarray:
    """Row r averages columns ``lo..hi`` (inclusive, 0-based) of ``ranges[r]``."""
    P = np.zeros((len(ranges), n))
    for r, (lo, hi) in enumerate(ranges):
        P[r, lo : hi + 1] = 1.0 / (hi - lo + 1)
    return P


@dataclass
class DecodeOutput:
    splits: list = field(default_factory=list)  # (i, j, k), 1-based EDU indices
    logits: Optional[Tensor] = None  # (steps, m), masked entries are meaningless
    mask: Optional[np.ndarray] = None  # (steps, m) bool, True on i..j-1
    states: Optional[Tensor] = None  # (steps, hidden)

    def distributions(self) -> np.ndarray:
        """Split distributions per step; zero outside the allowed positions."""
        if self.logits is None:
            return np.zeros((0, 0))
        return T.softmax(self.logits, self.mask).data


class JointParser:
    """Network parameters and the forward computations of the joint model."""

    def __init__(self, config: ParserConfig, token_vocab: TokenVocab, label_vocab: LabelVocab,
                 rng: np.random.Generator):
        config.validate()
        if len(label_vocab) == 0:
            raise ValueError("label vocabulary is empty; at least one multi-EDU training tree is needed")
        self.config = config
        self.token_vocab = token_vocab
        self.label_vocab = label_vocab
        H, D, C = config.enc_hidden, config.d_tok, config.cls_hidden
        p = self.params = ModelParams()
        self.backbone: TokenBackbone = EmbeddingBackbone(
            p, token_vocab, D, rng, config.positional, config.max_positions
        )
        self.seg_head = Dense(p, "segmenter.head", D, 3, "e", rng)
        self.encoder = BiGRU(p, "encoder.bigru", D, H, "s", rng)
        self.edu_proj = Dense(p, "encoder.proj", 2 * H + 2 * D, H, "s", rng)
        self.decoder = GRUCell(p, "decoder.cell", 3 * H, H, "s", rng)
        cls_in = 2 * H if config.classifier_uses_state else H
        self.cls_left = Dense(p, "classifier.left", cls_in, C, "l", rng)
        self.cls_right = Dense(p, "classifier.right", cls_in, C, "l", rng)
        self.biaffine = Biaffine(p, "classifier.biaffine", C, C, len(label_vocab), "l", rng)

    # -- building blocks ------------------------------------------------------

    def embed_tokens(self, tokens: Sequence[str], training=False, rng=None) -> Tensor:
        if len(tokens) == 0:
            raise ValueError("cannot embed an empty document")
        return T.dropout(self.backbone(tokens), self.config.embed_dropout, rng, training)

    def segment_logits(self, reps: Tensor) -> Tensor:
        return self.seg_head(reps)

    def segment_tag_scores(self, reps: Tensor) -> np.ndarray:
        """Per-token distribution over (B, I, E)."""
        with no_grad():
            return T.softmax(self.segment_logits(reps)).data

    def encode_edus(self, reps: Tensor, spans: Sequence[EduSpan], training=False, rng=None):
        """Return ``(E (m, hidden), final forward encoder state)``."""
        n = reps.shape[0]
        pooled = T.matmul(Tensor(pool_matrix([(s.start, s.end) for s in spans], n)), reps)
        context, fwd_last = self.encoder(pooled)
        starts = T.take_rows(reps, [s.start for s in spans])
        ends = T.take_rows(reps, [s.end for s in spans])
        edus = self.edu_proj(T.concat([context, starts, ends], axis=1))
        return T.dropout(edus, self.config.dropout, rng, training), fwd_last

    def decode_tree(self, edus: Tensor, h0: Tensor, teacher_splits=None) -> DecodeOutput:
        """Top-down depth-first splitting driven by an explicit stack.

        With ``teacher_splits`` the stack follows the gold records (which must
        be in depth-first order) and only the score rows are produced.
        """
        m = edus.shape[0]
        if m == 1:
            if teacher_splits:
                raise ValueError("a single-EDU document has no splits")
            return DecodeOutput()
        stack = [(1, m)]
        h = h0
        splits, states, scores = [], [], []
        while stack:
            i, j = stack.pop()
            step = len(splits)
            x = T.concat([T.mean(edus[i - 1 : j], axis=0), edus[i - 1], edus[j - 1]])
            h = self.decoder(x, h)
            s = T.matmul(edus, h)
            if teacher_splits is not None:
                if step >= len(teacher_splits) or tuple(teacher_splits[step][:2]) != (i, j):
                    raise ValueError(f"teacher split #{step} does not cover span ({i}, {j})")
                k = int(teacher_splits[step][2])
                if not i <= k < j:
                    raise ValueError(f"teacher split #{step} has k={k} outside [{i}, {j})")
            else:
                k = i + int(np.argmax(s.data[i - 1 : j - 1]))
            splits.append((i, j, k))
            states.append(h)
            scores.append(s)
            if k + 1 < j:
                stack.append((k + 1, j))
            if k > i:
                stack.append((i, k))
        if teacher_splits is not None and len(splits) != len(teacher_splits):
            raise ValueError(f"{len(teacher_splits)} teacher splits but decoding took {len(splits)} steps")
        mask = np.zeros((len(splits), m), dtype=bool)
        for r, (i, j, _) in enumerate(splits):
            mask[r, i - 1 : j - 1] = True
        return DecodeOutput(splits, T.stack(scores), mask, T.stack(states))

    def label_logits(self, edus: Tensor, splits, states: Optional[Tensor] = None,
                     training=False, rng=None) -> Tensor:
        """Composite-label scores ``(steps, R)`` for each split record."""
        m = edus.shape[0]
        left = T.matmul(Tensor(pool_matrix([(i - 1, k - 1) for i, _, k in splits], m)), edus)
        right = T.matmul(Tensor(pool_matrix([(k, j - 1) for _, j, k in splits], m)), edus)
        if self.config.classifier_uses_state:
            left = T.concat([left, states], axis=1)
            right = T.concat([right, states], axis=1)
        d_left = T.dropout(T.elu(self.cls_left(left)), self.config.dropout, rng, training)
        d_right = T.dropout(T.elu(self.cls_right(right)), self.config.dropout, rng, training)
        return self.biaffine(d_left, d_right)

    def classify_label(self, edus: Tensor, left: tuple[int, int], right: tuple[int, int],
                       state: Optional[Tensor] = None) -> np.ndarray:
        """Distribution over composite labels for sub-spans ``left``/``right`` (1-based)."""
        (i, k), (k1, j) = left, right
        if k1 != k + 1 or not i <= k < j:
            raise ValueError(f"sub-spans {left} and {right} are not adjacent")
        states = None if state is None else T.reshape(state, (1, -1))
        with no_grad():
            return T.softmax(self.label_logits(edus, [(i, j, k)], states)).data[0]

    # -- training -------------------------------------------------------------

    def losses(self, doc: Document, training=False, rng=None):
        """Teacher-forced ``(segmentation, structure, label)`` losses, each summed."""
        spans = doc.gold_edu_spans
        reps = self.embed_tokens(doc.tokens, training, rng)
        loss_e = T.cross_entropy(self.segment_logits(reps), gold_tags(spans))
        if len(spans) == 1:
            zero = Tensor(0.0)
            return loss_e, zero, zero
        edus, h0 = self.encode_edus(reps, spans, training, rng)
        gold = split_sequence(doc.gold_tree)
        out = self.decode_tree(edus, h0, teacher_splits=gold)
        loss_s = T.cross_entropy(out.logits, [k - 1 for _, _, k in gold], out.mask)
        label_ids = [self.label_vocab.index(lab) for lab in tree_labels(doc.gold_tree)]
        logits = self.label_logits(edus, out.splits, out.states, training, rng)
        loss_l = T.cross_entropy(logits, label_ids)
        return loss_e, loss_s, loss_l

    # -- inference ------------------------------------------------------------

    def predict_segments(self, tokens: Sequence[str]) -> list[EduSpan]:
        with no_grad():
            reps = self.embed_tokens(tokens)
            return decode_segments(np.argmax(self.segment_logits(reps).data, axis=1))

    def parse_document(self, doc: Document, seg_mode: str = "gold"):
        """Return ``(EDU spans, tree)`` for one document."""
        if seg_mode not in ("gold", "predicted"):
            raise ValueError(f"seg_mode must be 'gold' or 'predicted', got {seg_mode!r}")
        with no_grad():
            reps = self.embed_tokens(doc.tokens)
            if seg_mode == "gold":
                if doc.gold_edu_spans is None:
                    raise ValueError(f"document {doc.doc_id!r} has no gold segmentation")
                spans = list(doc.gold_edu_spans)
            else:
                spans = decode_segments(np.argmax(self.segment_logits(reps).data, axis=1))
            edus, h0 = self.encode_edus(reps, spans)
            out = self.decode_tree(edus, h0)
            if not out.splits:
                return spans, build_from_splits([], [], 1)
            logits = self.label_logits(edus, out.splits, out.states).data
            labels = [self.label_vocab.label(int(r)) for r in np.argmax(logits, axis=1)]
            return spans, build_from_splits(out.splits, labels, len(spans))

    # -- persistence ----------------------------------------------------------

    def meta(self) -> dict:
        return {
            "kind": "joint-parser",
            "config": asdict(self.config),
            "token_vocab": self.token_vocab.tokens,
            "label_vocab": self.label_vocab.to_dict(),
        }

    def save(self, path, extra: Optional[dict] = None):
        meta = self.meta()
        if extra:
            meta["extra"] = extra
        save_checkpoint(path, self.params, meta)

    @classmethod
    def load(cls, path) -> "JointParser":
        arrays, _, meta = load_checkpoint(path)
        if meta.get("kind") != "joint-parser":
            raise CheckpointError(f"{path}: checkpoint does not hold a joint parser")
        try:
            parser = cls(
                ParserConfig(**meta["config"]),
                TokenVocab(meta["token_vocab"][1:]),
                LabelVocab.from_dict(meta["label_vocab"]),
                np.random.default_rng(0),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"{path}: incomplete parser metadata ({exc!r})") from None
        try:
            parser.params.load_state_dict(arrays)
        except (KeyError, T.ShapeError) as exc:
            raise CheckpointError(f"{path}: parameters do not match the stored config ({exc})") from None
        parser.extra = meta.get("extra", {})
        return parser


class PointerSegmenter:
    """Baseline segmenter that points at the end token of each successive EDU.

    A forward GRU reads the tokens; a decoder cell, fed the encoder state at the
    current EDU start, scores every not-yet-covered position by dot product.
    """

    def __init__(self, token_vocab: TokenVocab, rng: np.random.Generator, d_tok: int = 64, hidden: int = 64):
        p = self.params = ModelParams()
        self.token_vocab = token_vocab
        self.backbone = EmbeddingBackbone(p, token_vocab, d_tok, rng)
        self.encoder = GRU(p, "pointer.encoder", d_tok, hidden, "e", rng)
        self.decoder = GRUCell(p, "pointer.decoder", hidden, hidden, "e", rng)

    def _encode(self, tokens):
        return self.encoder(self.backbone(tokens))

    def loss(self, doc: Document) -> Tensor:
        states, h = self._encode(doc.tokens)
        n = len(doc.tokens)
        total = Tensor(0.0)
        for span in doc.gold_edu_spans:
            h = self.decoder(states[span.start], h)
            mask = np.arange(n) >= span.start
            total = total + T.cross_entropy(T.matmul(states, h), [span.end], mask)
        return total

    def segment_reps(self, states: Tensor, h: Tensor) -> list[EduSpan]:
        n = states.shape[0]
        spans, start = [], 0
        while start < n:
            h = self.decoder(states[start], h)
            scores = T.matmul(states, h).data
            end = start + int(np.argmax(scores[start:]))
            spans.append(EduSpan(start, end))
            start = end + 1
        return spans

    def segment(self, tokens: Sequence[str]) -> list[EduSpan]:
        with no_grad():
            states, h = self._encode(tokens)
            return self.segment_reps(states, h)
