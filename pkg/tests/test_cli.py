import json

import pytest

from rstparse.cli import main, read_config
from rstparse.treebank import read_corpus


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def synth(tmp_path):
    path = tmp_path / "synth.jsonl"
    assert run("synth", "--n-docs", 6, "--m-min", 2, "--m-max", 4, "--langs", "en,es,pt", "--out", path) == 0
    return path


def test_single_edu_gold_vs_gold(tmp_path, capsys):
    path = tmp_path / "one.jsonl"
    assert run("synth", "--n-docs", 1, "--m-min", 1, "--m-max", 1, "--out", path) == 0
    assert run("eval", "--pred", path, "--gold", path, "--out", tmp_path / "r.json") == 0
    scores = json.loads((tmp_path / "r.json").read_text())["scores"]
    assert scores and all(v == 1.0 for v in scores.values())
    assert "full_orig=1.0000" in capsys.readouterr().out


def test_manifest_written(synth):
    manifest = json.loads(synth.with_name("synth.jsonl.manifest.json").read_text())
    assert manifest["command"] == "synth" and manifest["seed"] == 0
    assert manifest["config"]["n_docs"] == 6
    assert "started" in manifest and "finished" in manifest


def test_synth_deterministic(tmp_path, synth):
    again = tmp_path / "again.jsonl"
    run("synth", "--n-docs", 6, "--m-min", 2, "--m-max", 4, "--langs", "en,es,pt", "--out", again)
    assert again.read_bytes() == synth.read_bytes()


def test_holdout_language(tmp_path, synth):
    ckpt = tmp_path / "m.json"
    code = run("train", "--train", synth, "--out-ckpt", ckpt, "--epochs", 1, "--holdout-lang", "pt",
               "--d-tok", 8, "--enc-hidden", 8, "--cls-hidden", 8)
    assert code == 0
    manifest = json.loads(ckpt.with_name("m.json.manifest.json").read_text())
    assert manifest["config"]["holdout_lang"] == "pt"
    assert manifest["inputs"][str(synth)]
    # every pt token is unknown to the trained model
    tokens = json.loads(ckpt.read_text())["meta"]["token_vocab"]
    assert not any(t.startswith("pt_") for t in tokens)
    assert any(t.startswith("es_") for t in tokens)


def test_config_file_and_precedence(tmp_path, synth):
    cfg = tmp_path / "train.cfg"
    cfg.write_text("# tiny model\nd_tok = 4\nenc-hidden = 4\ncls_hidden = 4\nepochs = 1\nlr = 0.5\nloss_weights = fixed=1,1,1\n")
    values = read_config(cfg)
    assert values["loss_weights"] == (1.0, 1.0, 1.0) and values["d_tok"] == 4
    ckpt = tmp_path / "m.json"
    assert run("train", "--train", synth, "--config", cfg, "--lr", "0.01", "--out-ckpt", ckpt) == 0
    manifest = json.loads(ckpt.with_name("m.json.manifest.json").read_text())
    assert manifest["config"]["train"]["lr"] == 0.01
    assert manifest["config"]["parser"]["d_tok"] == 4


def test_bad_config_key(tmp_path, synth, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("learning_rate = 3\n")
    assert run("train", "--train", synth, "--config", cfg, "--out-ckpt", tmp_path / "m.json") == 2
    assert "bad.cfg:1" in capsys.readouterr().err


def test_parse_gold_keeps_segmentation(tmp_path, synth):
    ckpt = tmp_path / "m.json"
    run("train", "--train", synth, "--out-ckpt", ckpt, "--epochs", 1, "--d-tok", 8, "--enc-hidden", 8, "--cls-hidden", 8)
    out = tmp_path / "parsed.jsonl"
    assert run("parse", "--ckpt", ckpt, "--seg", "gold", "--in", synth, "--out", out) == 0
    gold = {d.doc_id: d.gold_edu_spans for d in read_corpus(synth)}
    for doc in read_corpus(out):
        assert doc.gold_edu_spans == gold[doc.doc_id]
    assert run("eval", "--pred", out, "--gold", synth, "--seg-mode", "gold", "--convention", "original") == 0


def test_outputs_byte_identical(tmp_path, synth):
    outs = []
    for tag in ("a", "b"):
        ckpt = tmp_path / f"{tag}.json"
        run("train", "--train", synth, "--out-ckpt", ckpt, "--epochs", 1, "--seed", 3,
            "--d-tok", 8, "--enc-hidden", 8, "--cls-hidden", 8)
        parsed = tmp_path / f"{tag}.jsonl"
        run("parse", "--ckpt", ckpt, "--in", synth, "--out", parsed)
        outs.append((ckpt.read_bytes(), parsed.read_bytes()))
    assert outs[0] == outs[1]


@pytest.mark.parametrize("argv,flag", [
    (["eval", "--pred", "missing.jsonl", "--gold", "missing.jsonl"], "--pred"),
    (["parse", "--ckpt", "missing.json", "--in", "x", "--out", "y"], "--ckpt"),
    (["synth", "--n-docs", "2", "--vocab", "10", "--out", "z.jsonl"], "vocab_size"),
    (["augment", "--in", "missing.jsonl", "--out", "x.jsonl"], "--in"),
])
def test_validation_exit_code(tmp_path, monkeypatch, capsys, argv, flag):
    monkeypatch.chdir(tmp_path)
    assert run(*argv) == 2
    assert flag in capsys.readouterr().err


def test_argparse_errors_exit_2():
    assert run("train") == 2
    assert run("frobnicate") == 2


def test_malformed_corpus_names_location(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"doc_id": "a"\n')
    assert run("augment", "--in", bad, "--out", tmp_path / "o.jsonl") == 2
    assert "bad.jsonl:1" in capsys.readouterr().err


def test_eval_missing_prediction(tmp_path, synth, capsys):
    one = tmp_path / "one.jsonl"
    one.write_text(synth.read_text().splitlines()[0] + "\n")
    assert run("eval", "--pred", one, "--gold", synth) == 2
    assert "no prediction for doc_id" in capsys.readouterr().err


def test_translator_failure_exit_2(tmp_path, synth, capsys):
    code = run("augment", "--in", synth, "--out", tmp_path / "o.jsonl", "--translator", "external:/nonexistent/mt")
    assert code == 2
    assert "external translator" in capsys.readouterr().err


def test_mismatched_checkpoint_exit_2(tmp_path, synth):
    ckpt = tmp_path / "broken.json"
    ckpt.write_text(json.dumps({"format": "rstparse-checkpoint", "version": 1, "meta": {"kind": "joint-parser"},
                                "params": {}}))
    assert run("parse", "--ckpt", ckpt, "--in", synth, "--out", tmp_path / "p.jsonl") == 2


def test_runtime_error_exit_1(tmp_path, synth, capsys):
    out = tmp_path / "missing-dir" / "o.jsonl"
    assert run("augment", "--in", synth, "--out", out, "--manifest", tmp_path / "m.json") == 1
    assert "FileNotFoundError" in capsys.readouterr().err


def test_full_pipeline(tmp_path, capsys):
    s, a, m, p, r = (tmp_path / n for n in ("s.jsonl", "a.jsonl", "m.json", "p.jsonl", "r.json"))
    assert run("synth", "--n-docs", 4, "--langs", "en,de", "--m-min", 2, "--m-max", 5, "--out", s) == 0
    assert run("augment", "--in", s, "--out", a, "--strategy", "cross") == 0
    assert len(read_corpus(a)) == 8
    assert run("train", "--train", a, "--out-ckpt", m, "--epochs", 1, "--trace", tmp_path / "t.csv",
               "--d-tok", 8, "--enc-hidden", 8, "--cls-hidden", 8) == 0
    assert (tmp_path / "t.csv").read_text().startswith("epoch,L_e,L_s,L_l,lambda_1")
    assert run("parse", "--ckpt", m, "--seg", "predicted", "--in", s, "--out", p) == 0
    assert run("eval", "--pred", p, "--gold", s, "--out", r) == 0
    report = json.loads(r.read_text())
    assert set(report["scores"]) >= {"seg_f1", "span_orig", "full_rst"}
