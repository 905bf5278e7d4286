import csv
import json

import pytest

from impactlab.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--papers", "800", "--authors", "250", "--topics", "4",
                 "--vocab-size", "200", "--seed", "2", "--out", str(d / "corpus.txt"),
                 "--truth", str(d / "truth.json")]) == 0
    assert main(["ingest", "--input", str(d / "corpus.txt"), "--out", str(d / "snap.ndjson")]) == 0
    return d


def run(*argv):
    return main([str(a) for a in argv])


def test_artifact_chain(workdir, capsys):
    d = workdir
    snap = d / "snap.ndjson"
    assert run("stats", "--snapshot", snap, "--year", 2007, "--out", d / "stats") == 0
    assert (d / "stats" / "h_histogram.csv").exists()
    assert run("lda", "--snapshot", snap, "--year", 2007, "--topics", 4, "--iters", 20,
               "--out", d / "lda.npz") == 0
    assert run("collab", "--snapshot", snap, "--year", 2007, "--out", d / "net.tsv") == 0
    assert run("features", "--snapshot", snap, "--lda", d / "lda.npz", "--collab", d / "net.tsv",
               "--year", 2007, "--out", d / "f.csv") == 0
    assert run("dataset", "--features", d / "f.csv", "--snapshot", snap, "--t", 2007,
               "--dt", 3, "--min-h", 1, "--out", d / "ds.json") == 0
    assert run("train", "--dataset", d / "ds.json", "--out", d / "m.json") == 0
    capsys.readouterr()
    assert run("evaluate", "--model", d / "m.json", "--dataset", d / "ds.json",
               "--baseline-seeds", 20) == 0
    report = json.loads(capsys.readouterr().out)
    assert 0 <= report["f1"] <= 1 and "random_baseline" in report
    assert run("rank-factors", "--dataset", d / "ds.json", "--out", d / "igr.csv") == 0
    with open(d / "igr.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 26

    author = json.loads((d / "ds.json").read_text())["instances"][0]["primary_author"]
    (d / "paper.json").write_text(json.dumps({"title": "w1 w2 w3", "authors": [author]}))
    capsys.readouterr()
    assert run("predict", "--model", d / "m.json", "--snapshot", snap, "--lda", d / "lda.npz",
               "--year", 2007, "--paper", d / "paper.json") == 0
    out = json.loads(capsys.readouterr().out)
    assert 0 <= out["probability"] <= 1 and len(out["features"]) == 26

    (d / "ghost.json").write_text(json.dumps({"authors": ["nobody"]}))
    assert run("predict", "--model", d / "m.json", "--snapshot", snap, "--lda", d / "lda.npz",
               "--year", 2007, "--paper", d / "ghost.json") == 2

    shared = ["--snapshot", snap, "--features", d / "f.csv", "--t", 2007, "--dt", 3, "--min-h", 1]
    assert run("ablation", *shared, "--mask", "all", "--mask=-C", "--out", d / "abl.csv") == 0
    assert run("sweep", *shared, "--axis", "dt", "--values", "1,2,3", "--out", d / "sw.json") == 0
    assert [p["delta_t"] for p in json.loads((d / "sw.json").read_text())["points"]] == [1, 2, 3]
    assert run("correlate", *shared, "--sweep", "min-h", "--values", "1,2",
               "--out", d / "corr.csv") == 0
    assert run("run", *shared, "--model", "rf", "--trees", 5, "--out", d / "run.json") == 0
    assert json.loads((d / "run.json").read_text())["config"]["experiment"]["model"] == "rf"

    # mixing a features file with the wrong slice is a configuration error
    assert run("run", "--snapshot", snap, "--features", d / "f.csv", "--t", 2006, "--dt", 3) == 1


def test_config_file(workdir, tmp_path):
    d = workdir
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(f"snapshot: {d / 'snap.ndjson'}\nt: 2007\ndelta_t: 3\nmin_h: 1\n"
                   f"topics: 4\nlda_iterations: 10\n")
    assert run("--threads", 2, "run", "--config", cfg, "--out", tmp_path / "r.json") == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("snapshot: x\nflavour: mint\n")
    assert run("run", "--config", bad) == 1


@pytest.mark.parametrize("argv,code", [
    (["run", "--model", "svm"], 1),
    (["frobnicate"], 1),
    (["ingest", "--input", "/no/such/file", "--out", "/tmp/x"], 2),
    (["evaluate", "--model", "/no/model.json", "--dataset", "/no/ds.json"], 2),
    (["run", "--config", "/no/such/config.yaml"], 1),
])
def test_exit_codes(argv, code):
    assert main(argv) == code


def test_empty_corpus_ingests(tmp_path):
    (tmp_path / "empty.txt").write_text("")
    assert run("ingest", "--input", tmp_path / "empty.txt", "--out", tmp_path / "s.ndjson") == 0
