"""EDU-level translation augmentation that keeps tree annotation intact."""
from __future__ import annotations

import json
import shlex
import subprocess
from pathlib import Path
from typing import Iterable, Mapping, Optional, Protocol, Sequence

from .tree import Document, spans_from_breaks
from .treebank import Corpus


class TranslationError(ValueError):
    pass


class Translator(Protocol):
    def supports(self, source: str, target: str) -> bool: ...

    def translate(self, segment: Sequence[str], source: str, target: str) -> list[str]: ...


class DictionaryTranslator:
    """Token-by-token translation through per-pair dictionaries.

    Unknown tokens are copied with the target language prefix: a leading
    ``"<source>_"`` is stripped and ``"<target>_"`` prepended. Output length
    always equals input length.
    """

    def __init__(self, maps: Optional[Mapping[tuple[str, str], Mapping[str, str]]] = None,
                 languages: Optional[Iterable[str]] = None):
        self.maps = {tuple(k): dict(v) for k, v in (maps or {}).items()}
        self.languages = None if languages is None else frozenset(languages)

    @classmethod
    def load(cls, path) -> "DictionaryTranslator":
        """Read ``{"languages": [...], "pairs": {"en:es": {"tok": "tok", ...}}}``."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        maps = {}
        for key, table in data.get("pairs", {}).items():
            src, sep, tgt = key.partition(":")
            if not sep:
                raise ValueError(f"{path}: pair key {key!r} must look like 'src:tgt'")
            maps[(src, tgt)] = table
        return cls(maps, data.get("languages"))

    def supports(self, source: str, target: str) -> bool:
        if (source, target) in self.maps:
            return True
        return self.languages is None or (source in self.languages and target in self.languages)

    def translate(self, segment, source, target):
        table = self.maps.get((source, target), {})
        prefix = f"{source}_"
        out = []
        for tok in segment:
            if tok in table:
                out.append(table[tok])
            else:
                stem = tok[len(prefix):] if tok.startswith(prefix) else tok
                out.append(f"{target}_{stem}")
        return out


class ExternalTranslator:
    """Shell out to ``command {source} {target}``: one segment per stdin line,
    one translated line per stdout line."""

    def __init__(self, command: str, timeout: float = 600.0):
        self.command = command
        self.timeout = timeout

    def supports(self, source, target):
        return True

    def translate_many(self, segments: Sequence[Sequence[str]], source, target) -> list[list[str]]:
        args = shlex.split(self.command) + [source, target]
        text = "".join(" ".join(seg) + "\n" for seg in segments)
        try:
            proc = subprocess.run(args, input=text, capture_output=True, text=True,
                                  timeout=self.timeout, check=False)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise TranslationError(f"external translator {self.command!r} failed: {exc}") from None
        if proc.returncode != 0:
            raise TranslationError(
                f"external translator {self.command!r} exited {proc.returncode}: {proc.stderr.strip()[:200]}"
            )
        lines = proc.stdout.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if len(lines) != len(segments):
            raise TranslationError(
                f"external translator returned {len(lines)} lines for {len(segments)} segments"
            )
        return [line.split() for line in lines]

    def translate(self, segment, source, target):
        return self.translate_many([segment], source, target)[0]


def make_translator(spec: Optional[str]):
    """``dictionary``, ``dictionary:<path>`` or ``external:<command>``."""
    if spec in (None, "", "dictionary"):
        return DictionaryTranslator()
    kind, sep, arg = spec.partition(":")
    if kind == "dictionary" and sep:
        return DictionaryTranslator.load(arg)
    if kind == "external" and arg:
        return ExternalTranslator(arg)
    raise ValueError(f"unknown translator {spec!r}; use dictionary[:<path>] or external:<command>")


def _check_pairs(corpus: Corpus, translator, targets_of):
    missing = sorted({
        (doc.lang, tgt) for doc in corpus for tgt in targets_of(doc)
        if not translator.supports(doc.lang, tgt)
    })
    if missing:
        raise TranslationError(
            "translator does not support: " + ", ".join(f"{s}->{t}" for s, t in missing)
        )


def translate_document(doc: Document, translator, target: str) -> Document:
    """Translate EDU by EDU; breaks are recomputed, the tree is copied."""
    if doc.gold_edu_spans is None:
        raise TranslationError(f"document {doc.doc_id!r} has no EDU segmentation to translate")
    segments = [list(doc.tokens[s.start : s.end + 1]) for s in doc.gold_edu_spans]
    if hasattr(translator, "translate_many"):
        translated = translator.translate_many(segments, doc.lang, target)
    else:
        translated = [translator.translate(seg, doc.lang, target) for seg in segments]
    tokens, breaks = [], []
    for idx, seg in enumerate(translated, start=1):
        if not seg:
            raise TranslationError(f"document {doc.doc_id!r}: EDU {idx} translated to an empty segment")
        tokens.extend(seg)
        breaks.append(len(tokens) - 1)
    return Document(f"{doc.doc_id}@{target}", target, tuple(tokens), spans_from_breaks(breaks), doc.gold_tree)


def cross_translate(corpus: Corpus, translator, target_langs: Iterable[str]) -> Corpus:
    """Original documents plus a translation of each into every other target language.

    Output is sorted by ``doc_id``.
    """
    targets = sorted(set(target_langs))

    def targets_of(doc):
        return [t for t in targets if t != doc.lang]

    _check_pairs(corpus, translator, targets_of)
    docs = list(corpus)
    for doc in corpus:
        docs.extend(translate_document(doc, translator, tgt) for tgt in targets_of(doc))
    return Corpus.from_documents(sorted(docs, key=lambda d: d.doc_id), corpus.label_vocab.relations)


def single_direction_translate(corpus: Corpus, translator, pivot_lang: str) -> Corpus:
    """Map every document into ``pivot_lang``; pivot documents pass through."""

    def targets_of(doc):
        return [] if doc.lang == pivot_lang else [pivot_lang]

    _check_pairs(corpus, translator, targets_of)
    docs = [doc if doc.lang == pivot_lang else translate_document(doc, translator, pivot_lang) for doc in corpus]
    return Corpus.from_documents(sorted(docs, key=lambda d: d.doc_id), corpus.label_vocab.relations)
