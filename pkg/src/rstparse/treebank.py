"""Corpus container, label inventory, on-disk formats, harmonization and splits.

Two formats are supported:

``jsonl``
    One document per line::

        {"doc_id": "d1", "lang": "en", "tokens": ["a", "b", "c"],
         "edu_breaks": [1, 2], "tree": ["NS-Elaboration", 1, 2]}

    ``edu_breaks`` holds the inclusive end-token index of each EDU; ``tree`` is
    ``[label, left, right]`` with integer leaves. Both keys are optional
    (``tree`` requires ``edu_breaks``).

``bracket``
    Blank-line separated blocks of ``#`` header lines followed by an
    optional tree::

        # doc_id = d1
        # lang = en
        # edu = a
        # edu = b c
        (NS-Elaboration e1 e2)

    Documents without gold segmentation use a single ``# text = ...`` line.
    Tokens are whitespace separated, so tokens may not contain whitespace.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .tree import (
    Document,
    EduSpan,
    Internal,
    Leaf,
    Nuclearity,
    RelationLabel,
    breaks_from_spans,
    check_spans,
    iter_nodes,
    relabel,
    spans_from_breaks,
    validate_tree,
)

DEFAULT_RELATIONS = (
    "Attribution",
    "Background",
    "Cause",
    "Comparison",
    "Condition",
    "Contrast",
    "Elaboration",
    "Enablement",
    "Evaluation",
    "Explanation",
    "Joint",
    "Manner-Means",
    "Topic-Comment",
    "Summary",
    "Temporal",
    "Topic-Change",
    "Textual-Organization",
    "Same-Unit",
)

SEG_TAGS = ("B", "I", "E")
FORMATS = ("jsonl", "bracket")
_NUC_ORDER = {Nuclearity.NS: 0, Nuclearity.SN: 1, Nuclearity.NN: 2}


class CorpusFormatError(ValueError):
    """Malformed corpus file; carries the location of the problem."""

    def __init__(self, path, line: int, column: int, message: str):
        self.path, self.line, self.column = str(path), line, column
        super().__init__(f"{path}:{line}:{column}: {message}")


class CorpusValidationError(ValueError):
    def __init__(self, doc_id: str, message: str):
        self.doc_id = doc_id
        super().__init__(f"document {doc_id!r}: {message}")


@dataclass(frozen=True)
class LabelVocab:
    relations: tuple[str, ...] = DEFAULT_RELATIONS
    composite_labels: tuple[RelationLabel, ...] = ()
    seg_tags: tuple[str, ...] = SEG_TAGS

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple(self.relations))
        object.__setattr__(self, "composite_labels", tuple(self.composite_labels))
        if len(set(self.composite_labels)) != len(self.composite_labels):
            raise ValueError("duplicate composite labels")
        unknown = sorted({lab.relation for lab in self.composite_labels} - set(self.relations))
        if unknown:
            raise ValueError(f"composite labels use relations outside the inventory: {unknown}")
        object.__setattr__(
            self, "_index", {lab: i for i, lab in enumerate(self.composite_labels)}
        )

    def __len__(self) -> int:
        return len(self.composite_labels)

    def __contains__(self, label) -> bool:
        return label in self._index

    def index(self, label: RelationLabel) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"label {label} not in vocabulary") from None

    def label(self, idx: int) -> RelationLabel:
        return self.composite_labels[idx]

    def sort_key(self, label: RelationLabel):
        rel_pos = self.relations.index(label.relation)
        return rel_pos, _NUC_ORDER[label.nuclearity]

    @classmethod
    def from_labels(
        cls, labels: Iterable[RelationLabel], relations: Sequence[str] = DEFAULT_RELATIONS
    ) -> "LabelVocab":
        """Vocabulary of the observed pairs; unseen relation names are appended sorted."""
        labels = set(labels)
        extra = sorted({lab.relation for lab in labels} - set(relations))
        rels = tuple(relations) + tuple(extra)
        order = {r: i for i, r in enumerate(rels)}
        composite = sorted(labels, key=lambda lab: (order[lab.relation], _NUC_ORDER[lab.nuclearity]))
        return cls(rels, tuple(composite))

    def to_dict(self) -> dict:
        return {
            "relations": list(self.relations),
            "composite_labels": [str(lab) for lab in self.composite_labels],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LabelVocab":
        return cls(
            tuple(data["relations"]),
            tuple(RelationLabel.parse(s) for s in data["composite_labels"]),
        )


def document_labels(doc: Document) -> list[RelationLabel]:
    if doc.gold_tree is None:
        return []
    return [n.label for n in iter_nodes(doc.gold_tree) if isinstance(n, Internal)]


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    label_vocab: LabelVocab = field(default_factory=LabelVocab)
    languages: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        object.__setattr__(self, "languages", frozenset(self.languages))
        for doc in self.documents:
            if doc.lang not in self.languages:
                raise CorpusValidationError(doc.doc_id, f"language {doc.lang!r} not in corpus languages")
            for lab in document_labels(doc):
                if lab not in self.label_vocab:
                    raise CorpusValidationError(doc.doc_id, f"label {lab} not in label vocabulary")

    @classmethod
    def from_documents(
        cls, documents: Iterable[Document], relations: Sequence[str] = DEFAULT_RELATIONS
    ) -> "Corpus":
        """Build a corpus whose label vocabulary is derived from the observed pairs."""
        documents = tuple(documents)
        labels = [lab for doc in documents for lab in document_labels(doc)]
        return cls(
            documents,
            LabelVocab.from_labels(labels, relations),
            frozenset(doc.lang for doc in documents),
        )

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def filter(self, keep) -> "Corpus":
        return Corpus.from_documents([d for d in self.documents if keep(d)], self.label_vocab.relations)


def validate_document(doc: Document) -> None:
    """Raise :class:`CorpusValidationError` if ``doc`` breaks a document invariant."""
    if not doc.tokens:
        raise CorpusValidationError(doc.doc_id, "document has no tokens")
    if doc.gold_edu_spans is not None:
        reason = check_spans(doc.gold_edu_spans, len(doc.tokens))
        if reason:
            raise CorpusValidationError(doc.doc_id, reason)
    if doc.gold_tree is not None:
        verdict = validate_tree(doc.gold_tree, len(doc.gold_edu_spans))
        if not verdict.ok:
            raise CorpusValidationError(doc.doc_id, "invalid tree: " + "; ".join(verdict.violations))


# -- tree (de)serialization -------------------------------------------------


def tree_to_nested(tree):
    if isinstance(tree, Leaf):
        return tree.index
    return [str(tree.label), tree_to_nested(tree.left), tree_to_nested(tree.right)]


def tree_from_nested(obj):
    if isinstance(obj, bool):
        raise ValueError("boolean is not a leaf index")
    if isinstance(obj, int):
        return Leaf(obj)
    if isinstance(obj, list) and len(obj) == 3 and isinstance(obj[0], str):
        return Internal(tree_from_nested(obj[1]), tree_from_nested(obj[2]), RelationLabel.parse(obj[0]))
    raise ValueError(f"malformed tree node {json.dumps(obj)[:60]}")


def tree_to_bracket(tree) -> str:
    if isinstance(tree, Leaf):
        return f"e{tree.index}"
    return f"({tree.label} {tree_to_bracket(tree.left)} {tree_to_bracket(tree.right)})"


_TOKEN_RE = re.compile(r"\s*(\(|\)|[^\s()]+)")


def parse_bracket(text: str, line_offset: int = 1, path="<string>"):
    """Parse ``(NS-Elaboration e1 (NN-Joint e2 e3))``; whitespace-insensitive."""
    tokens = []  # (token, line, column)
    for lineno, line in enumerate(text.split("\n")):
        pos = 0
        while pos < len(line):
            m = _TOKEN_RE.match(line, pos)
            if not m:
                break
            tokens.append((m.group(1), lineno + line_offset, m.start(1) + 1))
            pos = m.end()
    if not tokens:
        raise CorpusFormatError(path, line_offset, 1, "empty tree")
    pos = 0

    def node():
        nonlocal pos
        if pos >= len(tokens):
            last = tokens[-1]
            raise CorpusFormatError(path, last[1], last[2], "unexpected end of tree")
        tok, ln, col = tokens[pos]
        if tok == "(":
            if pos + 1 >= len(tokens):
                raise CorpusFormatError(path, ln, col, "unexpected end of tree")
            label_tok, lln, lcol = tokens[pos + 1]
            try:
                label = RelationLabel.parse(label_tok)
            except ValueError as exc:
                raise CorpusFormatError(path, lln, lcol, str(exc)) from None
            pos += 2
            left = node()
            right = node()
            if pos >= len(tokens) or tokens[pos][0] != ")":
                where = tokens[pos] if pos < len(tokens) else tokens[-1]
                raise CorpusFormatError(path, where[1], where[2], "expected ')' (trees are strictly binary)")
            pos += 1
            return Internal(left, right, label)
        if tok.startswith("e") and tok[1:].isdigit():
            pos += 1
            return Leaf(int(tok[1:]))
        raise CorpusFormatError(path, ln, col, f"unexpected token {tok!r}")

    tree = node()
    if pos != len(tokens):
        tok, ln, col = tokens[pos]
        raise CorpusFormatError(path, ln, col, f"trailing token {tok!r}")
    return tree


# -- document (de)serialization ---------------------------------------------


def document_to_json(doc: Document) -> dict:
    out = {"doc_id": doc.doc_id, "lang": doc.lang, "tokens": list(doc.tokens)}
    if doc.gold_edu_spans is not None:
        out["edu_breaks"] = breaks_from_spans(doc.gold_edu_spans)
    if doc.gold_tree is not None:
        out["tree"] = tree_to_nested(doc.gold_tree)
    return out


def document_from_json(obj: Mapping) -> Document:
    for key in ("doc_id", "lang", "tokens"):
        if key not in obj:
            raise ValueError(f"missing key {key!r}")
    doc_id = obj["doc_id"]
    if not isinstance(obj["tokens"], list) or not all(isinstance(t, str) for t in obj["tokens"]):
        raise CorpusValidationError(doc_id, "tokens must be a list of strings")
    spans = None
    if obj.get("edu_breaks") is not None:
        breaks = obj["edu_breaks"]
        if not isinstance(breaks, list) or not all(isinstance(b, int) for b in breaks):
            raise CorpusValidationError(doc_id, "edu_breaks must be a list of integers")
        try:
            spans = spans_from_breaks(breaks)
        except ValueError as exc:
            raise CorpusValidationError(doc_id, f"bad edu_breaks: {exc}") from None
    tree = None
    if obj.get("tree") is not None:
        if spans is None:
            raise CorpusValidationError(doc_id, "tree given without edu_breaks")
        try:
            tree = tree_from_nested(obj["tree"])
        except ValueError as exc:
            raise CorpusValidationError(doc_id, str(exc)) from None
    return Document(doc_id, obj["lang"], tuple(obj["tokens"]), spans, tree)


def _check_token_text(doc: Document):
    for tok in doc.tokens:
        if not tok or any(c.isspace() for c in tok) or tok.startswith("#"):
            raise CorpusValidationError(doc.doc_id, f"token {tok!r} cannot be written in bracket format")


def document_to_bracket(doc: Document) -> str:
    _check_token_text(doc)
    lines = [f"# doc_id = {doc.doc_id}", f"# lang = {doc.lang}"]
    if doc.gold_edu_spans is None:
        lines.append("# text = " + " ".join(doc.tokens))
    else:
        for span in doc.gold_edu_spans:
            lines.append("# edu = " + " ".join(doc.tokens[span.start : span.end + 1]))
    if doc.gold_tree is not None:
        lines.append(tree_to_bracket(doc.gold_tree))
    return "\n".join(lines)


def _read_bracket_blocks(text: str, path):
    block, start = [], None
    for lineno, line in enumerate(text.split("\n"), start=1):
        if line.strip():
            if start is None:
                start = lineno
            block.append(line)
        elif block:
            yield start, block
            block, start = [], None
    if block:
        yield start, block


def _document_from_bracket(start: int, lines: list[str], path) -> Document:
    header, tree_lines, tree_start = {}, [], None
    edus = []
    for offset, line in enumerate(lines):
        lineno = start + offset
        stripped = line.strip()
        if stripped.startswith("#") and tree_start is None:
            key, sep, value = stripped[1:].partition("=")
            if not sep:
                raise CorpusFormatError(path, lineno, 1, "header line must be '# key = value'")
            key, value = key.strip(), value.strip()
            if key == "edu":
                if not value:
                    raise CorpusFormatError(path, lineno, 1, "empty EDU")
                edus.append(value.split())
            elif key in ("doc_id", "lang", "text"):
                if key in header:
                    raise CorpusFormatError(path, lineno, 1, f"duplicate header {key!r}")
                header[key] = value
            else:
                raise CorpusFormatError(path, lineno, 2, f"unknown header {key!r}")
        else:
            if tree_start is None:
                tree_start = lineno
            tree_lines.append(line)
    for key in ("doc_id", "lang"):
        if key not in header:
            raise CorpusFormatError(path, start, 1, f"missing '# {key} = ...' header")
    doc_id = header["doc_id"]
    if edus and "text" in header:
        raise CorpusValidationError(doc_id, "both '# text' and '# edu' headers given")
    if edus:
        tokens = [t for edu in edus for t in edu]
        spans = spans_from_breaks([int(b) - 1 for b in np.cumsum([len(e) for e in edus])])
    else:
        tokens = header.get("text", "").split()
        spans = None
    tree = None
    if tree_lines:
        if spans is None:
            raise CorpusValidationError(doc_id, "tree given without '# edu' lines")
        tree = parse_bracket("\n".join(tree_lines), tree_start, path)
    return Document(doc_id, header["lang"], tuple(tokens), spans, tree)


# -- corpus files -------------------------------------------------------------


def read_corpus(path, format: str = "jsonl", relations: Sequence[str] = DEFAULT_RELATIONS) -> Corpus:
    """Read and validate a corpus file.

    The label vocabulary is rebuilt from the pairs observed in the file.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown corpus format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    docs = []
    if format == "jsonl":
        for lineno, line in enumerate(text.split("\n"), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(path, lineno, exc.colno, exc.msg) from None
            if not isinstance(obj, dict):
                raise CorpusFormatError(path, lineno, 1, "expected a JSON object")
            try:
                docs.append(document_from_json(obj))
            except CorpusValidationError:
                raise
            except ValueError as exc:
                raise CorpusFormatError(path, lineno, 1, str(exc)) from None
    else:
        for start, block in _read_bracket_blocks(text, path):
            docs.append(_document_from_bracket(start, block, path))
    seen = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise CorpusValidationError(doc.doc_id, "duplicate doc_id")
        seen.add(doc.doc_id)
        validate_document(doc)
    return Corpus.from_documents(docs, relations)


def write_corpus(corpus, path, format: str = "jsonl") -> None:
    if format not in FORMATS:
        raise ValueError(f"unknown corpus format {format!r}; expected one of {FORMATS}")
    documents = corpus.documents if isinstance(corpus, Corpus) else tuple(corpus)
    if format == "jsonl":
        body = "".join(
            json.dumps(document_to_json(d), ensure_ascii=False) + "\n" for d in documents
        )
    else:
        body = "\n\n".join(document_to_bracket(d) for d in documents) + ("\n" if documents else "")
    Path(path).write_text(body, encoding="utf-8")


def guess_format(path) -> str:
    suffix = Path(path).suffix.lower()
    return "bracket" if suffix in (".brackets", ".bracket", ".rst", ".txt") else "jsonl"


# -- harmonization ------------------------------------------------------------


@dataclass(frozen=True)
class HarmonizationMap:
    """Per-treebank mapping from source relation names to canonical names."""

    mapping: Mapping[str, str]
    name: str = ""

    @classmethod
    def identity(cls, relations: Sequence[str] = DEFAULT_RELATIONS) -> "HarmonizationMap":
        return cls({r: r for r in relations}, "identity")

    @classmethod
    def load(cls, path) -> "HarmonizationMap":
        """Load ``{"source": "Canonical", ...}`` from a JSON file."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(dict(data), Path(path).stem)


class UnmappedRelationError(ValueError):
    def __init__(self, names):
        self.names = sorted(names)
        super().__init__(f"relations missing from harmonization map: {self.names}")


def harmonize(
    corpus: Corpus, hmap: HarmonizationMap, relations: Sequence[str] = DEFAULT_RELATIONS
) -> Corpus:
    """Rename relations through ``hmap``; structure and nuclearity are untouched."""
    bad_targets = sorted(set(hmap.mapping.values()) - set(relations))
    if bad_targets:
        raise ValueError(f"harmonization targets outside the relation inventory: {bad_targets}")
    used = {lab.relation for doc in corpus for lab in document_labels(doc)}
    missing = used - set(hmap.mapping)
    if missing:
        raise UnmappedRelationError(missing)

    def rename(label: RelationLabel) -> RelationLabel:
        return RelationLabel(label.nuclearity, hmap.mapping[label.relation])

    docs = [
        doc if doc.gold_tree is None else Document(
            doc.doc_id, doc.lang, doc.tokens, doc.gold_edu_spans, relabel(doc.gold_tree, rename)
        )
        for doc in corpus
    ]
    return Corpus.from_documents(docs, relations)


# -- splitting ----------------------------------------------------------------


def largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    """Apportion ``n`` items to ``ratios``; ties go to the earlier part."""
    quotas = [n * r for r in ratios]
    sizes = [int(np.floor(q)) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split_corpus(corpus: Corpus, ratios=(0.8, 0.1, 0.1), seed: int = 0):
    """Deterministic per-language stratified (train, dev, test) partition."""
    if len(corpus) == 0:
        raise ValueError("cannot split an empty corpus")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for lang in sorted(corpus.languages):
        docs = sorted((d for d in corpus if d.lang == lang), key=lambda d: d.doc_id)
        perm = rng.permutation(len(docs))
        sizes = largest_remainder(len(docs), ratios)
        offset = 0
        for part, size in zip(parts, sizes):
            part.extend(docs[i] for i in perm[offset : offset + size])
            offset += size
    return tuple(
        Corpus(sorted(p, key=lambda d: d.doc_id), corpus.label_vocab, frozenset(d.lang for d in p))
        if p else Corpus((), corpus.label_vocab, frozenset())
        for p in parts
    )
