"""Binary RST trees over EDU indices, plus the document container.

EDU indices inside trees are 1-based; token offsets are 0-based and inclusive.
Internal nodes carry a composite label (nuclearity direction, relation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple, Optional, Sequence, Union

import numpy as np


class Nuclearity(str, Enum):
    NS = "NS"
    SN = "SN"
    NN = "NN"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, order=True)
class RelationLabel:
    nuclearity: Nuclearity
    relation: str

    def __post_init__(self):
        if not isinstance(self.nuclearity, Nuclearity):
            object.__setattr__(self, "nuclearity", Nuclearity(self.nuclearity))

    def __str__(self) -> str:
        return f"{self.nuclearity.value}-{self.relation}"

    @classmethod
    def parse(cls, text: str) -> "RelationLabel":
        """Parse ``"NS-Elaboration"``; relation names may themselves contain hyphens."""
        nuc, sep, rel = text.partition("-")
        if not sep or not rel:
            raise ValueError(f"malformed label {text!r}, expected '<NUC>-<Relation>'")
        try:
            nuclearity = Nuclearity(nuc)
        except ValueError:
            raise ValueError(f"unknown nuclearity {nuc!r} in label {text!r}") from None
        return cls(nuclearity, rel)


@dataclass(frozen=True, order=True)
class EduSpan:
    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"EDU span start {self.start} > end {self.end}")

    def __len__(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class Leaf:
    index: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.index, self.index)


@dataclass(frozen=True)
class Internal:
    left: "DiscourseTree"
    right: "DiscourseTree"
    label: RelationLabel
    span: tuple[int, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "span", (self.left.span[0], self.right.span[1]))


DiscourseTree = Union[Leaf, Internal]
SplitRecord = tuple[int, int, int]


@dataclass(frozen=True)
class Document:
    doc_id: str
    lang: str
    tokens: tuple[str, ...]
    gold_edu_spans: Optional[tuple[EduSpan, ...]] = None
    gold_tree: Optional[DiscourseTree] = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.gold_edu_spans is not None:
            object.__setattr__(self, "gold_edu_spans", tuple(self.gold_edu_spans))
        if self.gold_tree is not None and self.gold_edu_spans is None:
            raise ValueError(f"document {self.doc_id!r}: gold tree without gold EDU spans")

    @property
    def n_edus(self) -> Optional[int]:
        return None if self.gold_edu_spans is None else len(self.gold_edu_spans)


@dataclass
class TreeVerdict:
    ok: bool
    violations: list[str]
    n_internal: int = 0

    def __bool__(self) -> bool:
        return self.ok


def iter_nodes(tree: DiscourseTree) -> Iterator[DiscourseTree]:
    """Pre-order traversal, left child before right."""
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Internal):
            stack.append(node.right)
            stack.append(node.left)


def leaves(tree: DiscourseTree) -> list[int]:
    return [n.index for n in iter_nodes(tree) if isinstance(n, Leaf)]


def validate_tree(tree: DiscourseTree, m: int) -> TreeVerdict:
    """Check every tree invariant for an ``m``-EDU document and report all violations."""
    violations = []
    n_internal = 0
    for node in iter_nodes(tree):
        if isinstance(node, Internal):
            n_internal += 1
            for side in (node.left, node.right):
                if not isinstance(side, (Leaf, Internal)):
                    violations.append(f"non-binary node at span {node.span}: child {side!r}")
            if not isinstance(node.label, RelationLabel):
                violations.append(f"node at span {node.span} has no RelationLabel")
            if isinstance(node.left, (Leaf, Internal)) and isinstance(node.right, (Leaf, Internal)):
                expected = (node.left.span[0], node.right.span[1])
                if node.span != expected:
                    violations.append(f"cached span {node.span} != {expected}")
                if node.left.span[1] + 1 != node.right.span[0]:
                    violations.append(
                        f"children of {node.span} not adjacent: {node.left.span} / {node.right.span}"
                    )
        elif not isinstance(node, Leaf):
            violations.append(f"unknown node type {type(node).__name__}")

    order = leaves(tree)
    seen = set()
    for idx in order:
        if idx in seen:
            violations.append(f"duplicate leaf index {idx}")
        seen.add(idx)
        if not 1 <= idx <= m:
            violations.append(f"leaf index {idx} out of range 1..{m}")
    missing = sorted(set(range(1, m + 1)) - seen)
    if missing:
        violations.append(f"missing leaf indices {missing}")
    if order != sorted(order) and len(seen) == len(order):
        violations.append("leaves not in left-to-right order")
    if n_internal != len(order) - 1:
        violations.append(f"{n_internal} internal nodes for {len(order)} leaves")
    if n_internal != m - 1 and len(order) == m:
        violations.append(f"{n_internal} internal nodes, expected {m - 1}")
    return TreeVerdict(not violations, violations, n_internal)


def split_sequence(tree: DiscourseTree) -> list[SplitRecord]:
    """Depth-first pre-order split records ``(i, j, k)``: span i..j split after EDU k."""
    return [
        (node.span[0], node.span[1], node.left.span[1])
        for node in iter_nodes(tree)
        if isinstance(node, Internal)
    ]


def tree_labels(tree: DiscourseTree) -> list[RelationLabel]:
    """Labels of internal nodes in the same order as :func:`split_sequence`."""
    return [node.label for node in iter_nodes(tree) if isinstance(node, Internal)]


class SplitSequenceError(ValueError):
    def __init__(self, index: int, record, reason: str):
        self.index = index
        self.record = record
        super().__init__(f"split record #{index} {record}: {reason}")


def build_from_splits(
    splits: Sequence[SplitRecord], labels: Sequence[RelationLabel], m: Optional[int] = None
) -> DiscourseTree:
    """Rebuild a tree from its depth-first split records (inverse of :func:`split_sequence`).

    ``m`` is only needed to disambiguate an empty split list (defaults to 1).
    """
    if len(splits) != len(labels):
        raise ValueError(f"{len(splits)} split records but {len(labels)} labels")
    if not splits:
        if m not in (None, 1):
            raise SplitSequenceError(0, None, f"no splits for a {m}-EDU tree")
        return Leaf(1)
    first = tuple(splits[0])
    if first[0] != 1 or (m is not None and first[1] != m):
        raise SplitSequenceError(0, first, f"first record must cover 1..{m or first[1]}")

    pos = 0

    def build(i: int, j: int) -> DiscourseTree:
        nonlocal pos
        if i == j:
            return Leaf(i)
        if pos >= len(splits):
            raise SplitSequenceError(pos, None, f"sequence ended before span ({i}, {j}) was split")
        rec = tuple(splits[pos])
        if len(rec) != 3 or (rec[0], rec[1]) != (i, j):
            raise SplitSequenceError(pos, rec, f"expected a split of span ({i}, {j})")
        k = rec[2]
        if not i <= k < j:
            raise SplitSequenceError(pos, rec, "k must satisfy i <= k < j")
        label = labels[pos]
        pos += 1
        left = build(i, k)
        right = build(k + 1, j)
        return Internal(left, right, label)

    tree = build(first[0], first[1])
    if pos != len(splits):
        raise SplitSequenceError(pos, tuple(splits[pos]), "trailing record after the tree was complete")
    return tree


class Constituent(NamedTuple):
    start: int
    end: int
    nuclearity: str
    relation: str


ORIGINAL = "original"
RST_PARSEVAL = "rst_parseval"
CONVENTIONS = (ORIGINAL, RST_PARSEVAL)


def constituents(
    tree: DiscourseTree, convention: str, edu_spans: Sequence[EduSpan]
) -> set[Constituent]:
    """Labeled constituents in token offsets.

    ``original``: one per internal node, labeled (NS|SN|NN, relation).
    ``rst_parseval``: one per non-root node, labeled with its own N/S letter;
    a nucleus in a mononuclear pair takes the relation name ``span``.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")

    def offsets(node: DiscourseTree) -> tuple[int, int]:
        i, j = node.span
        return edu_spans[i - 1].start, edu_spans[j - 1].end

    out = set()
    for node in iter_nodes(tree):
        if not isinstance(node, Internal):
            continue
        nuc, rel = node.label.nuclearity.value, node.label.relation
        if convention == ORIGINAL:
            out.add(Constituent(*offsets(node), nuc, rel))
            continue
        for child, letter in ((node.left, nuc[0]), (node.right, nuc[1])):
            child_rel = rel if (letter == "S" or nuc == "NN") else "span"
            out.add(Constituent(*offsets(child), letter, child_rel))
    return out


def relabel(tree: DiscourseTree, fn) -> DiscourseTree:
    """Copy ``tree`` with every internal label replaced by ``fn(label)``."""
    if isinstance(tree, Leaf):
        return tree
    return Internal(relabel(tree.left, fn), relabel(tree.right, fn), fn(tree.label))


def same_shape(a: DiscourseTree, b: DiscourseTree) -> bool:
    return split_sequence(a) == split_sequence(b)


def _catalan(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


def random_tree_shape(m: int, rng: np.random.Generator) -> list[SplitRecord]:
    """Split records of a binary tree drawn uniformly over all shapes with ``m`` leaves."""
    if m < 1:
        raise ValueError("m must be >= 1")
    out = []

    def grow(i: int, j: int):
        if i == j:
            return
        n = j - i  # internal nodes in this subtree
        # number of shapes with left subtree of size a internal nodes is C(a)*C(n-1-a)
        weights = np.array([_catalan(a) * _catalan(n - 1 - a) for a in range(n)], dtype=float)
        a = int(rng.choice(n, p=weights / weights.sum()))
        k = i + a
        out.append((i, j, k))
        grow(i, k)
        grow(k + 1, j)

    grow(1, m)
    return out


def random_tree(
    m: int, rng: np.random.Generator, labels: Sequence[RelationLabel]
) -> DiscourseTree:
    splits = random_tree_shape(m, rng)
    picked = [labels[int(rng.integers(len(labels)))] for _ in splits]
    return build_from_splits(splits, picked, m)


def spans_from_breaks(breaks: Sequence[int]) -> tuple[EduSpan, ...]:
    """EDU spans from inclusive end-token indices."""
    spans, start = [], 0
    for end in breaks:
        spans.append(EduSpan(start, end))
        start = end + 1
    return tuple(spans)


def breaks_from_spans(spans: Sequence[EduSpan]) -> list[int]:
    return [s.end for s in spans]


def check_spans(spans: Sequence[EduSpan], n_tokens: int) -> Optional[str]:
    """Return a reason string if ``spans`` do not tile tokens 0..n-1, else None."""
    if not spans:
        return "no EDU spans"
    expected = 0
    for idx, span in enumerate(spans):
        if span.start != expected:
            return f"EDU {idx + 1} starts at {span.start}, expected {expected}"
        if span.end < span.start:
            return f"EDU {idx + 1} is empty"
        expected = span.end + 1
    if expected != n_tokens:
        return f"EDU spans cover tokens 0..{expected - 1} but document has {n_tokens} tokens"
    return None
