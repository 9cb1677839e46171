"""Synthetic treebanks whose segmentation, structure and labels are learnable.

Every language gets its own token vocabulary ``<lang>_<index>``; index ranges
are reserved for cue tokens:

* ``[0, C)``      left-boundary label cues (one per composite label)
* ``[C, 2C)``     right-boundary label cues
* ``[2C, 2C+D)``  depth cues, ``D = m_max - 1``
* the rest        filler words split evenly into begin / inner / end pools

For the internal node splitting after EDU ``k`` (depth ``d``), EDU ``k`` ends
with ``[left cue of its label, depth cue d]`` and EDU ``k+1`` carries the
right cue of the same label as its second token. A span's split point is
therefore the boundary with the smallest depth cue inside it, and the label
co-occurs on both sides of that boundary. Cue tokens only ever occupy inner
or final EDU positions, so B/I/E tags stay a function of the token alone.
Short EDUs drop cues (right cue first, then the left cue).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .tree import Document, Internal, Nuclearity, RelationLabel, random_tree, spans_from_breaks
from .treebank import DEFAULT_RELATIONS, Corpus

# Relations annotated only as multinuclear, and those seen in all three directions.
_NN_ONLY = {"Joint", "Same-Unit", "Textual-Organization"}
_ANY_DIRECTION = {
    "Cause", "Comparison", "Contrast", "Evaluation", "Explanation",
    "Temporal", "Topic-Comment", "Topic-Change",
}


def default_composite_labels(relations: Sequence[str] = DEFAULT_RELATIONS) -> list[RelationLabel]:
    out = []
    for rel in relations:
        if rel in _NN_ONLY:
            nucs = [Nuclearity.NN]
        elif rel in _ANY_DIRECTION:
            nucs = [Nuclearity.NS, Nuclearity.SN, Nuclearity.NN]
        else:
            nucs = [Nuclearity.NS, Nuclearity.SN]
        out.extend(RelationLabel(n, rel) for n in nucs)
    return out


@dataclass
class SynthConfig:
    n_docs: int = 50
    m_range: tuple[int, int] = (4, 10)
    tokens_per_edu_range: tuple[int, int] = (4, 7)
    vocab_size: int = 200
    languages: tuple[str, ...] = ("en",)
    seed: int = 0
    labels: Optional[Sequence[RelationLabel]] = field(default=None, repr=False)

    def validate(self):
        lo, hi = self.m_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad m_range {self.m_range}")
        tlo, thi = self.tokens_per_edu_range
        if not 1 <= tlo <= thi:
            raise ValueError(f"bad tokens_per_edu_range {self.tokens_per_edu_range}")
        if self.n_docs < 0:
            raise ValueError("n_docs must be non-negative")
        if not self.languages:
            raise ValueError("at least one language is required")
        n_labels = len(self.labels) if self.labels is not None else len(default_composite_labels())
        needed = 2 * n_labels + max(hi - 1, 0) + 3
        if self.vocab_size < needed:
            raise ValueError(
                f"vocab_size {self.vocab_size} too small: {needed} needed for cues and fillers"
            )


class _Lexicon:
    def __init__(self, lang: str, vocab_size: int, n_labels: int, max_depth: int):
        self.lang = lang
        self.n_labels = n_labels
        base = 2 * n_labels + max_depth
        pool = vocab_size - base
        third = pool // 3
        self.begin = range(base, base + third)
        self.inner = range(base + third, base + 2 * third)
        self.end = range(base + 2 * third, vocab_size)

    def word(self, idx: int) -> str:
        return f"{self.lang}_{idx}"

    def left_cue(self, label_idx):
        return self.word(label_idx)

    def right_cue(self, label_idx):
        return self.word(self.n_labels + label_idx)

    def depth_cue(self, depth):
        return self.word(2 * self.n_labels + depth)


def _node_info(tree, labels_index):
    """Map split point k -> (label index, depth) for every internal node."""
    info = {}
    stack = [(tree, 0)]
    while stack:
        node, depth = stack.pop()
        if isinstance(node, Internal):
            info[node.left.span[1]] = (labels_index[node.label], depth)
            stack.append((node.left, depth + 1))
            stack.append((node.right, depth + 1))
    return info


def generate_synthetic(config: SynthConfig) -> Corpus:
    """Deterministic synthetic corpus; languages are assigned round-robin."""
    config.validate()
    labels = list(config.labels) if config.labels is not None else default_composite_labels()
    labels_index = {lab: i for i, lab in enumerate(labels)}
    rng = np.random.default_rng(config.seed)
    lo, hi = config.m_range
    tlo, thi = config.tokens_per_edu_range
    lexicons = {
        lang: _Lexicon(lang, config.vocab_size, len(labels), max(hi - 1, 0))
        for lang in config.languages
    }
    width = max(4, len(str(config.n_docs)))
    docs = []
    for d in range(config.n_docs):
        lang = config.languages[d % len(config.languages)]
        lex = lexicons[lang]
        m = int(rng.integers(lo, hi + 1))
        tree = random_tree(m, rng, labels)
        info = _node_info(tree, labels_index)
        tokens, breaks = [], []
        for u in range(1, m + 1):
            length = int(rng.integers(tlo, thi + 1))
            body = [lex.word(int(rng.choice(lex.begin)))]
            right_cue = lex.right_cue(info[u - 1][0]) if u > 1 else None
            if u < m:
                label_idx, depth = info[u]
                tail = [lex.left_cue(label_idx), lex.depth_cue(depth)]
            else:
                tail = [lex.word(int(rng.choice(lex.end)))]
            if length == 1:
                edu = body
            else:
                slots = length - 1  # positions after the begin word
                tail = tail[-slots:]
                slots -= len(tail)
                middle = []
                if right_cue is not None and slots > 0:
                    middle.append(right_cue)
                    slots -= 1
                middle.extend(lex.word(int(rng.choice(lex.inner))) for _ in range(slots))
                edu = body + middle + tail
            tokens.extend(edu)
            breaks.append(len(tokens) - 1)
        docs.append(
            Document(f"{lang}-{d:0{width}d}", lang, tuple(tokens), spans_from_breaks(breaks), tree)
        )
    return Corpus.from_documents(docs)
