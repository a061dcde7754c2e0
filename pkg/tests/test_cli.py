import csv
import json
import re
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from diagcap.cli import main
from diagcap.config import load_config
from diagcap.corpus import load_corpus
from diagcap.imageio import read_image, write_image
from diagcap.pipeline import build_model
from diagcap.seq2seq import Vocabulary, load_checkpoint
from toydata import captions, write_run_dir

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = write_run_dir(root)
    assert main(["train", "--config", str(cfg)]) == 0
    return root


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def gold_csv(root):
    path = root / "gold.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ID", "caption"])
        for s in load_corpus(root / "train.jsonl"):
            w.writerow([s.id, s.caption])
    return path


def error_lines(err):
    return [json.loads(line) for line in err.splitlines() if line.startswith("{")]


# preprocess


def test_preprocess_empty_dir(tmp_path, capsys):
    (tmp_path / "in").mkdir()
    assert main(["preprocess", "--input", str(tmp_path / "in"), "--output", str(tmp_path / "out")]) == 0
    assert list((tmp_path / "out").iterdir()) == []
    assert error_lines(capsys.readouterr().err)[0]["level"] == "warning"


def test_preprocess_denoise_preserves_dimensions(tmp_path, rng):
    (tmp_path / "in").mkdir()
    write_image(tmp_path / "in" / "x.pgm", rng.random((12, 20)))
    assert main(["preprocess", "--input", str(tmp_path / "in"), "--output", str(tmp_path / "out"),
                 "--denoise", "1.0"]) == 0
    files = list((tmp_path / "out").iterdir())
    assert [f.name for f in files] == ["x.pgm"]
    assert read_image(files[0]).shape == (12, 20)


def test_preprocess_enhance_golden(tmp_path):
    (tmp_path / "in").mkdir()
    (tmp_path / "in" / "board.pgm").write_bytes((DATA / "checkerboard16.pgm").read_bytes())
    for out in ("a", "b"):
        assert main(["preprocess", "--input", str(tmp_path / "in"), "--output", str(tmp_path / out),
                     "--enhance"]) == 0
    golden = (DATA / "checkerboard16_enhanced.pgm").read_bytes()
    assert (tmp_path / "a" / "board.pgm").read_bytes() == golden
    assert (tmp_path / "b" / "board.pgm").read_bytes() == golden


def test_preprocess_reports_bad_file(tmp_path, rng, capsys):
    (tmp_path / "in").mkdir()
    write_image(tmp_path / "in" / "good.pgm", rng.random((8, 8)))
    (tmp_path / "in" / "bad.pgm").write_bytes(b"garbage")
    assert main(["preprocess", "--input", str(tmp_path / "in"), "--output", str(tmp_path / "out"),
                 "--enhance"]) == 1
    assert (tmp_path / "out" / "good.pgm").exists()
    errs = error_lines(capsys.readouterr().err)
    assert errs[0]["command"] == "preprocess" and errs[0]["item"].endswith("bad.pgm")


# train


def test_train_overfit_summary(trained):
    summary = json.loads((trained / "run" / "summary.json").read_text())
    assert summary["train_reconstruction"] >= 0.9
    assert summary["n_train"] == 16


def test_train_zero_epochs_checkpoint_is_initialisation(tmp_path):
    cfg_path = write_run_dir(tmp_path, n=4)
    assert main(["train", "--config", str(cfg_path), "--max-epochs", "0"]) == 0
    model, vocab, _ = load_checkpoint(tmp_path / "run" / "model.ckpt")
    cfg = load_config(cfg_path)
    init_seed, _ = np.random.SeedSequence(cfg.seed).generate_state(2)
    fresh = build_model(cfg, Vocabulary.build(captions(4)), model.cfg.max_len, np.random.default_rng(init_seed))
    assert vocab.itos == Vocabulary.build(captions(4)).itos
    assert set(fresh.params) == set(model.params)
    for k, v in fresh.params.items():
        assert model.params[k].tobytes() == v.tobytes()


def test_train_same_seed_identical_outputs(tmp_path):
    cfg_path = write_run_dir(tmp_path, n=4, max_epochs=3)
    outputs = []
    for out in ("r1", "r2"):
        assert main(["train", "--config", str(cfg_path), "--output-dir", str(tmp_path / out)]) == 0
        outputs.append([(tmp_path / out / f).read_bytes() for f in ("loss_history.csv", "model.ckpt", "summary.json")])
    assert outputs[0] == outputs[1]
    assert main(["train", "--config", str(cfg_path), "--output-dir", str(tmp_path / "r3"), "--seed", "7"]) == 0
    assert (tmp_path / "r3" / "loss_history.csv").read_bytes() != outputs[0][0]


def test_train_invalid_config(tmp_path, capsys):
    cfg_path = write_run_dir(tmp_path, n=2)
    cfg = json.loads(cfg_path.read_text())
    cfg["train"]["learning_rate"] = -1
    cfg_path.write_text(json.dumps(cfg))
    assert main(["train", "--config", str(cfg_path)]) == 2
    assert "train:" in error_lines(capsys.readouterr().err)[0]["message"]
    cfg["train"]["learning_rate"] = 1e-3
    cfg["paths"]["corpus"] = "missing.jsonl"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["train", "--config", str(cfg_path)]) == 2
    assert "paths.corpus" in error_lines(capsys.readouterr().err)[0]["message"]
    cfg_path.write_text(json.dumps({"bogus": 1}))
    assert main(["train", "--config", str(cfg_path)]) == 2


def test_train_qformer_kind(tmp_path):
    cfg_path = write_run_dir(tmp_path, n=4, max_epochs=2)
    assert main(["train", "--config", str(cfg_path), "--model-kind", "qformer", "--preprocessing"]) == 0
    model, _, meta = load_checkpoint(tmp_path / "run" / "model.ckpt", expect_kind="qformer")
    assert meta["features"]["enhance"] is True and meta["features"]["denoise_sigma"] == 1.0
    assert model.qcfg.n_queries == 8


# caption


def test_caption_reproduces_training_captions(trained):
    out = trained / "pred.csv"
    assert main(["caption", "--checkpoint", str(trained / "run" / "model.ckpt"), "--images",
                 str(trained / "images"), "--regions", str(trained / "regions.jsonl"),
                 "--output", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0] == ["ID", "caption"]
    gold = {s.id: s.caption for s in load_corpus(trained / "train.jsonl")}
    hits = sum(gold[i] == c for i, c in rows[1:])
    assert hits / len(gold) >= 0.9
    again = trained / "pred2.csv"
    main(["caption", "--checkpoint", str(trained / "run" / "model.ckpt"), "--images",
          str(trained / "images"), "--regions", str(trained / "regions.jsonl"), "--output", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_caption_zero_images(trained, tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["caption", "--checkpoint", str(trained / "run" / "model.ckpt"), "--images",
                 str(tmp_path / "empty"), "--output", str(tmp_path / "p.csv")]) == 0
    assert (tmp_path / "p.csv").read_bytes() == b"ID,caption\r\n"


def test_caption_without_object_features(trained, tmp_path):
    assert main(["caption", "--checkpoint", str(trained / "run" / "model.ckpt"), "--images",
                 str(trained / "images"), "--no-object-features", "--output", str(tmp_path / "p.csv")]) == 0
    assert len(read_rows(tmp_path / "p.csv")) == 17


def test_caption_model_kind_mismatch(trained, tmp_path, capsys):
    assert main(["caption", "--checkpoint", str(trained / "run" / "model.ckpt"), "--images",
                 str(trained / "images"), "--model-kind", "qformer"]) == 2
    assert "expected 'qformer'" in error_lines(capsys.readouterr().err)[0]["message"]


# evaluate


def test_evaluate_identical(trained, tmp_path):
    gold = gold_csv(trained)
    out = tmp_path / "r.json"
    assert main(["evaluate", "--pred", str(gold), "--gold", str(gold), "--output", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["means"]["bleu1"] == rep["means"]["rouge1"] == rep["means"]["bertscore"] == 1.0
    assert "groups" not in rep


def test_evaluate_by_length_and_determinism(trained, tmp_path):
    gold = gold_csv(trained)
    paths = []
    for name in ("a.json", "b.json"):
        paths.append(tmp_path / name)
        assert main(["evaluate", "--pred", str(gold), "--gold", str(gold), "--by-length",
                     "--output", str(paths[-1]), "--per-sample", str(tmp_path / ("rows_" + name + ".csv"))]) == 0
    rep = json.loads(paths[0].read_text())
    assert list(rep["groups"]) == ["Short", "Medium", "Long", "VeryLong"]
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_evaluate_missing_id(tmp_path, capsys):
    (tmp_path / "g.csv").write_text("ID,caption\na,x\n")
    (tmp_path / "p.csv").write_text("ID,caption\nb,x\n")
    assert main(["evaluate", "--pred", str(tmp_path / "p.csv"), "--gold", str(tmp_path / "g.csv")]) == 1
    assert "b" in error_lines(capsys.readouterr().err)[0]["message"]


# stats

STATS_FIXTURE = [
    "Chest CT showing a mass in the left lung.",
    "Initial panoramic radiograph",
    "Axial CT scan of the chest, showing bilateral effusion",
    "Initial panoramic radiograph",
]


def test_stats_matches_recount(tmp_path):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text("".join(json.dumps({"id": str(i), "caption": c}) + "\n" for i, c in enumerate(STATS_FIXTURE)))
    (tmp_path / "stop.txt").write_text("a\nthe\nin\nof\n")
    out = tmp_path / "s.json"
    assert main(["stats", "--corpus", str(corpus), "--stopwords", str(tmp_path / "stop.txt"), "--top-k", "3",
                 "--output", str(out), "--histogram", str(tmp_path / "h.csv")]) == 0
    rep = json.loads(out.read_text())

    toks = [[w for w in re.split(r"[^a-z0-9]+", c.lower()) if w] for c in STATS_FIXTURE]
    lengths = [len(t) for t in toks]
    counts = Counter(w for t in toks for w in t if w not in {"a", "the", "in", "of"})
    assert rep["length"] == {"min": min(lengths), "max": max(lengths), "mean": sum(lengths) / 4}
    assert rep["top_words"] == [list(kv) for kv in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:3]]
    assert rep["top_captions"][0] == ["Initial panoramic radiograph", 2]
    assert rep["uniqueness"] == {"unique": 3, "total": 4, "percent": 75.0}
    hist = read_rows(tmp_path / "h.csv")
    assert hist[0] == ["length", "count"]
    assert {int(a): int(b) for a, b in hist[1:]} == dict(Counter(lengths))
    out2 = tmp_path / "s2.json"
    main(["stats", "--corpus", str(corpus), "--stopwords", str(tmp_path / "stop.txt"), "--top-k", "3",
          "--output", str(out2)])
    assert out.read_bytes() == out2.read_bytes()


def test_stats_empty_corpus(tmp_path):
    (tmp_path / "c.jsonl").write_text("")
    assert main(["stats", "--corpus", str(tmp_path / "c.jsonl")]) == 1
