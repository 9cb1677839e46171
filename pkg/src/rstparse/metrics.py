"""Micro-averaged segmentation and Parseval scores.

Tree constituents are compared in token offsets so that predicted and gold
segmentations stay comparable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .tree import CONVENTIONS, ORIGINAL, RST_PARSEVAL, EduSpan, constituents

FIELDS = ("span", "nuc", "rel", "full")
SUFFIX = {ORIGINAL: "orig", RST_PARSEVAL: "rst"}


@dataclass
class Counts:
    matched: int = 0
    predicted: int = 0
    gold: int = 0

    def __iadd__(self, other: "Counts") -> "Counts":
        self.matched += other.matched
        self.predicted += other.predicted
        self.gold += other.gold
        return self

    @property
    def precision(self) -> float:
        return self.matched / self.predicted if self.predicted else 1.0

    @property
    def recall(self) -> float:
        return self.matched / self.gold if self.gold else 1.0

    @property
    def f1(self) -> float:
        # 2PR/(P+R) == 2M/(pred+gold); nothing to predict and nothing predicted scores 1
        total = self.predicted + self.gold
        return 2 * self.matched / total if total else 1.0


def _boundaries(spans: Sequence[EduSpan]) -> set[int]:
    return {s.end for s in spans[:-1]}


def _n_tokens(spans: Sequence[EduSpan]) -> int:
    return spans[-1].end + 1 if spans else 0


def segmentation_counts(pred_spans, gold_spans) -> Counts:
    if len(pred_spans) != len(gold_spans):
        raise ValueError(f"{len(pred_spans)} predicted documents vs {len(gold_spans)} gold documents")
    total = Counts()
    for idx, (pred, gold) in enumerate(zip(pred_spans, gold_spans)):
        if _n_tokens(pred) != _n_tokens(gold):
            raise ValueError(
                f"document #{idx}: predicted spans cover {_n_tokens(pred)} tokens, gold {_n_tokens(gold)}"
            )
        p, g = _boundaries(pred), _boundaries(gold)
        total += Counts(len(p & g), len(p), len(g))
    return total


def segmentation_f1(pred_spans, gold_spans) -> float:
    """Micro F1 over EDU end positions, excluding each document's final token."""
    return segmentation_counts(pred_spans, gold_spans).f1


def _project(cons, fld: str) -> set:
    if fld == "span":
        return {(c.start, c.end) for c in cons}
    if fld == "nuc":
        return {(c.start, c.end, c.nuclearity) for c in cons}
    if fld == "rel":
        return {(c.start, c.end, c.relation) for c in cons}
    return set(cons)


def tree_counts(pred, gold, convention: str) -> dict[str, Counts]:
    """Per-field counts for one document; ``pred``/``gold`` are ``(tree, edu_spans)``."""
    (p_tree, p_spans), (g_tree, g_spans) = pred, gold
    if _n_tokens(p_spans) != _n_tokens(g_spans):
        raise ValueError(f"token count mismatch: {_n_tokens(p_spans)} vs {_n_tokens(g_spans)}")
    pc = constituents(p_tree, convention, p_spans)
    gc = constituents(g_tree, convention, g_spans)
    out = {}
    for fld in FIELDS:
        p, g = _project(pc, fld), _project(gc, fld)
        out[fld] = Counts(len(p & g), len(p), len(g))
    return out


@dataclass
class ScoreReport:
    seg: Counts = field(default_factory=Counts)
    trees: dict = field(default_factory=dict)  # (field, convention) -> Counts

    @property
    def seg_f1(self) -> float:
        return self.seg.f1

    def score(self, fld: str, convention: str) -> float:
        return self.trees[(fld, convention)].f1

    @property
    def conventions(self) -> list[str]:
        return [c for c in CONVENTIONS if ("span", c) in self.trees]

    def flat(self) -> dict[str, float]:
        out = {"seg_f1": self.seg_f1}
        for conv in self.conventions:
            for fld in FIELDS:
                out[f"{fld}_{SUFFIX[conv]}"] = self.score(fld, conv)
        return out

    def counts(self) -> dict[str, dict[str, int]]:
        out = {"seg_f1": vars(self.seg).copy()}
        for conv in self.conventions:
            for fld in FIELDS:
                out[f"{fld}_{SUFFIX[conv]}"] = vars(self.trees[(fld, conv)]).copy()
        return out

    def to_json(self) -> str:
        return json.dumps({"scores": self.flat(), "counts": self.counts()}, indent=2, sort_keys=True)

    def to_table(self) -> str:
        return "\n".join(f"{k}={v:.4f}" for k, v in self.flat().items())


def _resolve(convention) -> tuple[str, ...]:
    if convention in (None, "both"):
        return CONVENTIONS
    if convention == "rst":
        return (RST_PARSEVAL,)
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    return (convention,)


def parseval(pred, gold, convention="both") -> ScoreReport:
    """Micro-averaged Span/Nuc/Rel/Full for per-document ``(tree, edu_spans)`` pairs.

    The segmentation counts of the report are filled as well, so a report
    built from predicted segmentation carries its boundary F1.
    """
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted documents vs {len(gold)} gold documents")
    report = ScoreReport()
    for conv in _resolve(convention):
        for fld in FIELDS:
            report.trees[(fld, conv)] = Counts()
    for idx, (p, g) in enumerate(zip(pred, gold)):
        try:
            report.seg += segmentation_counts([p[1]], [g[1]])
            for conv in _resolve(convention):
                for fld, c in tree_counts(p, g, conv).items():
                    report.trees[(fld, conv)] += c
        except ValueError as exc:
            raise ValueError(f"document #{idx}: {exc}") from None
    return report
