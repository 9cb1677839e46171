"""Command line interface: ``rstparse {synth,augment,train,parse,eval}``.

Exit status is 0 on success, 2 when inputs or flags fail validation and 1
on any other error. Every command that writes output first writes a run
manifest (``<output>.manifest.json`` unless ``--manifest`` is given).
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .augment import TranslationError, cross_translate, make_translator, single_direction_translate
from .autodiff.checkpoint import CheckpointError
from .metrics import parseval
from .model import JointParser, ParserConfig
from .synthetic import SynthConfig, generate_synthetic
from .training import TrainConfig, parse_loss_weights, train
from .tree import Document
from .treebank import (
    Corpus,
    CorpusFormatError,
    CorpusValidationError,
    UnmappedRelationError,
    guess_format,
    read_corpus,
    write_corpus,
)

log = logging.getLogger("rstparse")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


class ValidationError(Exception):
    """Bad flag, file or document; maps to exit status 2."""


_VALIDATION = (ValidationError, CorpusFormatError, CorpusValidationError, UnmappedRelationError,
               TranslationError, CheckpointError)


# -- helpers -------------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _require_file(path, flag):
    if not Path(path).is_file():
        raise ValidationError(f"{flag}: file not found: {path}")


def _langs(text, flag="--langs") -> tuple[str, ...]:
    langs = tuple(x.strip() for x in text.split(",") if x.strip())
    if not langs:
        raise ValidationError(f"{flag}: at least one language is required")
    return langs


def _read(path, flag, fmt=None) -> Corpus:
    _require_file(path, flag)
    return read_corpus(path, fmt or guess_format(path))


def _write(corpus, path, fmt=None):
    write_corpus(corpus, path, fmt or guess_format(path))


def _write_manifest(args, outputs, config, inputs):
    """Record everything needed to rerun the command; written before any work."""
    target = args.manifest or (f"{outputs[0]}.manifest.json" if outputs else None)
    if target is None:
        return None
    manifest = {
        "tool": "rstparse",
        "version": __version__,
        "command": args.command,
        "argv": list(args.argv),
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "started": datetime.now(timezone.utc).isoformat(),
    }
    Path(target).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target, manifest


def _finish_manifest(written):
    if written is None:
        return
    target, manifest = written
    manifest["finished"] = datetime.now(timezone.utc).isoformat()
    Path(target).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- config files --------------------------------------------------------------

_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}
_PARSER_FIELDS = {f.name: f for f in dataclasses.fields(ParserConfig)}


def _coerce(name, raw, default):
    if name == "loss_weights":
        return parse_loss_weights(raw)
    if name == "grad_clip" and raw.lower() in ("none", "off", ""):
        return None
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float) or default is None:
        return float(raw)
    return raw


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    _require_file(path, "--config")
    out = {}
    defaults = {**dataclasses.asdict(ParserConfig()), **dataclasses.asdict(TrainConfig())}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or not key:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        if key not in defaults:
            raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, value, defaults[key])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {key}: {exc}") from None
    return out


# -- commands ------------------------------------------------------------------


def cmd_synth(args):
    cfg = SynthConfig(
        n_docs=args.n_docs,
        m_range=(args.m_min, args.m_max),
        tokens_per_edu_range=(args.tokens_min, args.tokens_max),
        vocab_size=args.vocab,
        languages=_langs(args.langs),
        seed=args.seed,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    written = _write_manifest(args, [args.out], dataclasses.asdict(cfg), [])
    _write(generate_synthetic(cfg), args.out, args.format)
    _finish_manifest(written)


def cmd_augment(args):
    corpus = _read(args.input, "--in", args.format)
    try:
        translator = make_translator(args.translator)
    except (ValueError, OSError) as exc:
        raise ValidationError(f"--translator: {exc}") from None
    langs = _langs(args.langs) if args.langs else tuple(sorted(corpus.languages))
    config = {"strategy": args.strategy, "translator": args.translator, "langs": list(langs),
              "pivot": args.pivot}
    written = _write_manifest(args, [args.out], config, [args.input])
    if args.strategy == "cross":
        out = cross_translate(corpus, translator, langs)
    else:
        out = single_direction_translate(corpus, translator, args.pivot or langs[0])
    _write(out, args.out, args.format)
    _finish_manifest(written)
    log.info("augmented %d -> %d documents", len(corpus), len(out))


_FLAG_KEYS = ("epochs", "batch_size", "lr", "lr_decay", "weight_decay", "grad_clip", "temp",
              "loss_weights", "ratio_mode", "eval_every", "d_tok", "enc_hidden", "cls_hidden",
              "dropout", "embed_dropout", "seed")


def resolve_train_config(args) -> tuple[TrainConfig, ParserConfig]:
    """Defaults, then the ``--config`` file, then explicit flags."""
    values = read_config(args.config) if args.config else {}
    for key in _FLAG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = parse_loss_weights(flag) if key == "loss_weights" else flag
    tc = TrainConfig(**{k: v for k, v in values.items() if k in _TRAIN_FIELDS})
    pc = ParserConfig(**{k: v for k, v in values.items() if k in _PARSER_FIELDS})
    try:
        tc.validate()
        pc.validate()
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return tc, pc


def _holdout(corpus: Corpus, lang, flag) -> Corpus:
    if lang is None:
        return corpus
    kept = corpus.filter(lambda d: d.lang != lang)
    if not len(kept):
        raise ValidationError(f"{flag}: no documents left after holding out {lang!r}")
    return kept


def cmd_train(args):
    try:
        tc, pc = resolve_train_config(args)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    args.seed = tc.seed
    train_corpus = _holdout(_read(args.train, "--train", args.format), args.holdout_lang, "--train")
    inputs = [args.train]
    if args.dev:
        dev_corpus = _holdout(_read(args.dev, "--dev", args.format), args.holdout_lang, "--dev")
        inputs.append(args.dev)
    else:
        dev_corpus = train_corpus
    config = {"train": dataclasses.asdict(tc), "parser": dataclasses.asdict(pc),
              "holdout_lang": args.holdout_lang}
    if args.config:
        inputs.append(args.config)
    written = _write_manifest(args, [args.out_ckpt], config, inputs)
    try:
        result = train(train_corpus, dev_corpus, tc, pc)
    except ValueError as exc:
        if "vocabulary mismatch" in str(exc) or "must both contain" in str(exc):
            raise ValidationError(str(exc)) from None
        raise
    result.parser.save(args.out_ckpt, {"best_epoch": result.best_epoch, "holdout_lang": args.holdout_lang})
    if args.trace:
        Path(args.trace).write_text(result.trace.to_csv(), encoding="utf-8")
    _finish_manifest(written)
    log.info("trained %d epochs, best epoch %d", result.epochs_run, result.best_epoch)


def cmd_parse(args):
    _require_file(args.ckpt, "--ckpt")
    parser = JointParser.load(args.ckpt)
    corpus = _read(args.input, "--in", args.format)
    if args.seg == "gold":
        missing = [d.doc_id for d in corpus if d.gold_edu_spans is None]
        if missing:
            raise ValidationError(f"--seg gold: documents without gold segmentation: {missing[:5]}")
    written = _write_manifest(args, [args.out], {"seg": args.seg}, [args.ckpt, args.input])
    docs = []
    for doc in corpus:
        spans, tree = parser.parse_document(doc, args.seg)
        docs.append(Document(doc.doc_id, doc.lang, doc.tokens, tuple(spans), tree))
    _write(Corpus.from_documents(docs, parser.label_vocab.relations), args.out, args.format)
    _finish_manifest(written)


def cmd_eval(args):
    pred = _read(args.pred, "--pred", args.format)
    gold = _read(args.gold, "--gold", args.format)
    pred_by_id = {d.doc_id: d for d in pred}
    gold_docs = [d for d in gold if d.gold_tree is not None]
    missing = [d.doc_id for d in gold_docs if d.doc_id not in pred_by_id]
    if missing:
        raise ValidationError(f"--pred: no prediction for doc_id(s) {missing[:5]}")
    pairs = []
    for g in gold_docs:
        p = pred_by_id[g.doc_id]
        if p.tokens != g.tokens:
            raise ValidationError(f"--pred: doc_id {g.doc_id!r} has different tokens than gold")
        if p.gold_tree is None:
            raise ValidationError(f"--pred: doc_id {g.doc_id!r} has no predicted tree")
        if args.seg_mode == "gold" and p.gold_edu_spans != g.gold_edu_spans:
            raise ValidationError(
                f"--seg-mode gold: doc_id {g.doc_id!r} segmentation differs from gold"
            )
        pairs.append(((p.gold_tree, p.gold_edu_spans), (g.gold_tree, g.gold_edu_spans)))
    written = _write_manifest(
        args, [args.out] if args.out else [],
        {"convention": args.convention, "seg_mode": args.seg_mode}, [args.pred, args.gold],
    )
    report = parseval([p for p, _ in pairs], [g for _, g in pairs], args.convention)
    print(report.to_table())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    _finish_manifest(written)


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rstparse", description="Joint RST segmentation and parsing.")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"rstparse {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=False, seed_default=0):
        p.add_argument("--format", choices=("jsonl", "bracket"),
                       help="corpus format (default: from file extension)")
        p.add_argument("--manifest", help="run manifest path (default: <output>.manifest.json)")
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        if seed:
            p.add_argument("--seed", type=int, default=seed_default)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--n-docs", type=int, default=50)
    p.add_argument("--m-min", type=int, default=4)
    p.add_argument("--m-max", type=int, default=10)
    p.add_argument("--tokens-min", type=int, default=4)
    p.add_argument("--tokens-max", type=int, default=7)
    p.add_argument("--langs", default="en")
    p.add_argument("--vocab", type=int, default=200)
    p.add_argument("--out", required=True)
    common(p, seed=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment", help="cross or single-direction translation")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strategy", choices=("cross", "single"), default="cross")
    p.add_argument("--translator", default="dictionary",
                   help="dictionary, dictionary:<path> or external:<command>")
    p.add_argument("--langs", help="target languages (default: languages of the input)")
    p.add_argument("--pivot", help="target of --strategy single (default: first of --langs)")
    common(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", help="dev corpus (default: the training corpus)")
    p.add_argument("--config", help="key = value file; explicit flags take precedence")
    p.add_argument("--out-ckpt", required=True)
    p.add_argument("--trace", help="write the per-epoch loss/weight trace as CSV")
    p.add_argument("--holdout-lang", help="drop this language from train and dev")
    p.add_argument("--loss-weights", help="dynamic or fixed=a,b,c")
    p.add_argument("--temp", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-decay", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--grad-clip", type=float)
    p.add_argument("--ratio-mode", choices=("epoch", "iteration"))
    p.add_argument("--eval-every", type=int)
    p.add_argument("--d-tok", type=int)
    p.add_argument("--enc-hidden", type=int)
    p.add_argument("--cls-hidden", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--embed-dropout", type=float)
    common(p, seed=True, seed_default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="parse documents with a trained model")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--seg", choices=("gold", "predicted"), default="predicted")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--convention", choices=("original", "rst", "both"), default="both")
    p.add_argument("--seg-mode", choices=("gold", "predicted"), default="predicted",
                   help="gold: require predicted segmentation to equal gold")
    p.add_argument("--out", help="write the ScoreReport as JSON")
    common(p)
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except _VALIDATION as exc:
        print(f"rstparse {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - top-level reporter
        log.debug("unhandled error", exc_info=True)
        print(f"rstparse {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
