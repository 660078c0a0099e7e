import json
from pathlib import Path

import pytest

from traveltime.cli import run

SAMPLE = Path(__file__).parent / "data" / "sample.osm"


def cli(*argv):
    return run([str(a) for a in argv])


def ok(*argv):
    code = cli(*argv)
    assert code == 0, argv
    return code


def test_version(capsys):
    assert run(["--version"]) == 0
    assert "0.1.0" in capsys.readouterr().out


def test_unknown_flag_is_usage_error(capsys):
    assert run(["train", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run([]) == 2


def test_missing_input_names_file(tmp_path, capsys):
    missing = tmp_path / "nope.osm"
    assert run(["build", "--osm", str(missing), "--out", str(tmp_path / "n.json")]) == 1
    assert "nope.osm" in capsys.readouterr().err


def test_bad_csv_names_file_and_line(tmp_path, capsys):
    pred = tmp_path / "p.csv"
    ref = tmp_path / "r.csv"
    pred.write_text("pair_id,predicted_s\n0,110\n1,abc\n")
    ref.write_text("pair_id,actual_s\n0,100\n1,200\n")
    assert cli("evaluate", "--pred", pred, "--ref", ref, "--out", tmp_path / "x.json") == 1
    err = capsys.readouterr().err
    assert "p.csv:3" in err

    pred.write_text("pair_id,predicted_s\n0,110\n7,180\n")
    assert cli("evaluate", "--pred", pred, "--ref", ref, "--out", tmp_path / "x.json") == 1
    assert "pair_id 7" in capsys.readouterr().err


def test_evaluate_hand_example(tmp_path):
    pred = tmp_path / "p.csv"
    ref = tmp_path / "r.csv"
    pred.write_text("pair_id,predicted_s\n0,110\n1,180\n")
    ref.write_text("pair_id,actual_s\n0,100\n1,200\n")
    out = tmp_path / "report.json"
    ok("evaluate", "--pred", pred, "--ref", ref, "--out", out, "--model-id", "m1")
    report = json.loads(out.read_text())
    assert report["mape_pct"] == pytest.approx(10.0)
    assert report["mae_s"] == pytest.approx(15.0)
    assert report["r2"] == pytest.approx(0.9)
    assert report["model_id"] == "m1" and report["dataset_id"] == "r"
    assert "timestamp" in report
    assert (tmp_path / "report_scatter.png").stat().st_size > 0
    assert (tmp_path / "report_metrics.png").stat().st_size > 0


def test_build_rejects_bad_xml(tmp_path, capsys):
    bad = tmp_path / "bad.osm"
    bad.write_text("<osm><node id='1' lat='0' lon='0'></osm>")
    assert cli("build", "--osm", bad, "--out", tmp_path / "n.json") == 1
    assert "bad.osm" in capsys.readouterr().err


def test_whitelist_restricts_pairs(tmp_path):
    net = tmp_path / "net.json"
    ok("synth-net", "--rows", 4, "--cols", 4, "--seed", 1, "--out", net)
    wl = tmp_path / "wl.csv"
    wl.write_text("origin,destination\n1,14\n2,2\n5,999\n")
    od = tmp_path / "od.csv"
    ok("sample-od", "--net", net, "--count", 6, "--seed", 0, "--od-whitelist", wl, "--out", od)
    rows = od.read_text().splitlines()
    assert rows[0] == "pair_id,origin,destination"
    assert rows[1:] == [f"{i},1,14" for i in range(6)]


def pipeline(tmp: Path, seed=3, trees=25):
    files = {k: tmp / v for k, v in {
        "net": "net.json", "od": "od.csv", "routes": "routes.jsonl", "feat": "features.csv",
        "ref": "ref.csv", "train": "train.csv", "test": "test.csv", "model": "model.json",
        "pred": "pred.csv", "naive": "naive.csv", "report": "out/report.json",
    }.items()}
    f = files
    ok("build", "--osm", SAMPLE, "--out", f["net"])
    ok("sample-od", "--net", f["net"], "--count", 80, "--seed", seed, "--out", f["od"])
    ok("route", "--net", f["net"], "--od", f["od"], "--out", f["routes"])
    ok("features", "--net", f["net"], "--routes", f["routes"], "--out", f["feat"])
    ok("synth-ref", "--features", f["feat"], "--seed", seed, "--out", f["ref"])
    ok("split", "--features", f["feat"], "--seed", seed, "--train-out", f["train"], "--test-out", f["test"])
    ok("train", "--features", f["train"], "--ref", f["ref"], "--trees", trees, "--seed", seed, "--out", f["model"])
    ok("predict", "--features", f["test"], "--model", f["model"], "--out", f["pred"])
    ok("predict", "--features", f["test"], "--naive", "--out", f["naive"])
    ok("evaluate", "--pred", f["pred"], "--ref", f["ref"], "--baseline", f["naive"], "--out", f["report"])
    return files


def test_end_to_end_chain(tmp_path):
    f = pipeline(tmp_path)
    header = f["feat"].read_text().splitlines()[0]
    assert header == (
        "pair_id,naive_tt_s,n_signal,n_stop,n_crossing,n_give_way,n_mini_roundabout,"
        "n_left,n_slight_left,n_right,n_slight_right,n_uturn"
    )
    first = json.loads(f["routes"].read_text().splitlines()[0])
    assert {"pair_id", "node_seq", "naive_tt_s", "length_m"} <= set(first)
    assert f["ref"].read_text().startswith("pair_id,actual_s\n")
    assert f["pred"].read_text().startswith("pair_id,predicted_s\n")
    report = json.loads(f["report"].read_text())
    assert report["n"] == 16
    assert report["baseline"]["delta_s"] < 0
    assert report["mae_s"] < report["baseline"]["mae_s"]

    imp = tmp_path / "imp.csv"
    ok("importance", "--model", f["model"], "--out", imp)
    lines = imp.read_text().splitlines()
    assert lines[0] == "feature,weight" and len(lines) == 12
    assert imp.with_suffix(".png").exists()

    cv = tmp_path / "cv.csv"
    ok("cv", "--features", f["feat"], "--ref", f["ref"], "--trees", 5, "--folds", 4, "--out", cv)
    assert len(cv.read_text().splitlines()) == 5

    space = tmp_path / "space.json"
    space.write_text(json.dumps({"max_depth": [2, 6], "n_trees": [5]}))
    best = tmp_path / "best.json"
    ok("tune", "--features", f["feat"], "--ref", f["ref"], "--space", space, "--budget", 2,
       "--folds", 3, "--out", best)
    result = json.loads(best.read_text())
    assert len(result["trials"]) == 2
    assert result["best_cv_mae_s"] == min(t["cv_mae_s"] for t in result["trials"])


def test_subcommands_are_idempotent(tmp_path):
    a = pipeline(tmp_path / "a")
    b = pipeline(tmp_path / "b")
    for key in ("net", "od", "routes", "feat", "ref", "train", "test", "model", "pred", "naive"):
        assert a[key].read_bytes() == b[key].read_bytes(), key
    ra = json.loads(a["report"].read_text())
    rb = json.loads(b["report"].read_text())
    ra.pop("timestamp"), rb.pop("timestamp")
    ra.pop("dataset_id"), rb.pop("dataset_id")
    assert ra == rb
    for png in ("report_scatter.png", "report_metrics.png"):
        assert (a["report"].parent / png).read_bytes() == (b["report"].parent / png).read_bytes()


def test_synth_net_and_delay_model(tmp_path):
    net = tmp_path / "g.json"
    ok("synth-net", "--rows", 3, "--cols", 3, "--seed", 2, "--control-probs", '{"Signal": 1.0}', "--out", net)
    d = json.loads(net.read_text())
    assert len(d["nodes"]) == 9 and len(d["edges"]) == 24
    assert {n["control"] for n in d["nodes"]} == {"Signal"}
    assert cli("synth-net", "--rows", 3, "--cols", 3, "--control-probs", '{"Signal": 2}', "--out", net) == 1
