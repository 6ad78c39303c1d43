import json
import re
import subprocess
import sys

import pytest

from shiftkit.cli import build_parser, main
from shiftkit.data import Region


@pytest.fixture(scope="module")
def small_pair(tmp_path_factory):
    out = tmp_path_factory.mktemp("pair")
    assert main(["synth", "--out", str(out), "--n-source", "1500", "--n-target", "1500", "--d", "2"]) == 0
    return out


def run(args, tmp_path):
    return main(list(args) + ["--out", str(tmp_path)])


def test_synth_writes_pair(small_pair):
    meta = json.loads((small_pair / "synth.json").read_text())
    assert meta["n_source"] == 1500
    assert (small_pair / "source.csv").read_text().splitlines()[0] == "x1,x2,y"


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["train", "--out", str(tmp_path)]) == 2
    assert main(["train", "--source", "s.csv", "--method", "cvar", "--radius", "1.5"]) == 2
    assert main(["train", "--source", "s.csv", "--method", "conditional_gamma", "--radius", "0.5"]) == 2
    assert main(["worstcase", "--source", "s.csv", "--radii", "0,abc"]) == 2
    assert main(["regions", "--b", "-1"]) == 2
    assert main(["grid", "--source", "s.csv"]) == 2
    assert main(["train", "--bogus"]) == 2
    assert main(["nope"]) == 2
    assert main(["regret", "--k", "0"]) == 2
    err = capsys.readouterr().err
    assert "Traceback" not in err


def test_data_errors_exit_1(tmp_path, capsys):
    assert main(["train", "--source", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,y\n1,0\n2,0\n")
    assert main(["train", "--source", str(bad), "--label", "z", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 2 and all(line.startswith("error: ") for line in err)


def test_decompose_outputs(small_pair, tmp_path):
    args = ["decompose", "--source", str(small_pair / "source.csv"), "--target", str(small_pair / "target.csv")]
    assert run(args, tmp_path) == 0
    res = json.loads((tmp_path / "disde.json").read_text())
    total = res["term_I"] + res["term_II"] + res["term_III"]
    assert abs(total - res["total_gap"]) <= 1e-9
    assert res["yx_ratio"] is not None
    assert res["degraded"] == (-res["accuracy"]["gap"] >= 0.0)
    assert run(args + ["--min-degradation", "0.99"], tmp_path) == 0
    assert json.loads((tmp_path / "disde.json").read_text())["degraded"] is False
    assert (tmp_path / "disde.csv").read_text().startswith("total_gap,term_I,term_II,term_III,yx_ratio")


def test_idempotent_outputs(small_pair, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["regions", "--out", str(out), "--source", str(small_pair / "source.csv"), "--target", str(small_pair / "target.csv"), "--b", "0.4"]) == 0
        assert main(["train", "--out", str(out), "--source", str(small_pair / "source.csv"), "--method", "kl", "--radius", "0.1", "--steps", "300"]) == 0
    for name in ("regions.json", "regions.csv", "model.json", "train.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_zero_radius_train_matches_erm(small_pair, tmp_path):
    src = str(small_pair / "source.csv")
    assert main(["train", "--out", str(tmp_path / "kl"), "--source", src, "--method", "kl", "--radius", "0", "--steps", "500"]) == 0
    assert main(["train", "--out", str(tmp_path / "erm"), "--source", src, "--method", "erm", "--steps", "500"]) == 0
    kl = json.loads((tmp_path / "kl" / "model.json").read_text())
    erm = json.loads((tmp_path / "erm" / "model.json").read_text())
    assert kl == erm


def test_synth_then_regions(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--flip", "1.0", "--region", "x1:0.5:1.0", "--n-source", "5000", "--n-target", "5000", "--d", "2"]) == 0
    assert main(["regions", "--out", str(tmp_path), "--b", "0.4", "--depth", "2"]) == 0
    found = json.loads((tmp_path / "regions.json").read_text())
    assert found
    cons = tuple((c["index"], float(c["low"]), float(c["high"])) for c in found[0]["constraints"])
    assert Region(cons).jaccard(Region(((0, 0.5, 1.0),)), 2) >= 0.7


def test_config_file_and_flag_precedence(small_pair, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# region search\nb = 0.9\ndepth = 2\nsource = %s\ntarget = %s\n" % (small_pair / "source.csv", small_pair / "target.csv"))
    assert main(["regions", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 0
    assert json.loads((tmp_path / "c" / "regions.json").read_text()) == []
    assert main(["regions", "--config", str(cfg), "--b", "0.4", "--out", str(tmp_path / "f")]) == 0
    assert json.loads((tmp_path / "f" / "regions.json").read_text())
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["regions", "--config", str(bad)]) == 2
    bad.write_text("depth = two\n")
    assert main(["regions", "--config", str(bad)]) == 2
    assert main(["regions", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_worstcase_and_grid_and_attribute(small_pair, tmp_path):
    src, tgt = str(small_pair / "source.csv"), str(small_pair / "target.csv")
    assert main(["worstcase", "--out", str(tmp_path), "--source", src, "--target", tgt, "--radii", "0,0.1", "--steps", "300", "--learner", "gbt", "--rounds", "10"]) == 0
    studies = json.loads((tmp_path / "worstcase.json").read_text())
    assert [s["radius"] for s in studies] == [0.0, 0.1]
    assert (tmp_path / "transfer.csv").read_text().splitlines()[1].startswith("kl,0.0,target,")
    assert main(["grid", "--out", str(tmp_path), "--source", src, "--target", tgt, tgt, "--probe-size", "100", "--steps", "200"]) == 0
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0].startswith("setting_id,domain_id,method_id")
    assert main(["decompose", "--out", str(tmp_path), "--source", src, "--target", tgt]) == 0
    ratio = json.loads((tmp_path / "disde.json").read_text())["yx_ratio"]
    ids = sorted({line.split(",")[1] for line in lines[1:]})
    (tmp_path / "ratios.csv").write_text("setting_id,domain_id,yx_ratio\n" + "".join(f"s0,{i},{ratio}\n" for i in ids))
    args = ["attribute", "--out", str(tmp_path), "--records", str(tmp_path / "results.csv"), "--ratios", str(tmp_path / "ratios.csv"), "--drop-collinear"]
    assert main(args) == 0
    assert "adj. R2" in (tmp_path / "ols.txt").read_text()


def test_collect_sim(small_pair, tmp_path):
    args = ["collect-sim", "--out", str(tmp_path), "--n-extra", "50", "--rounds", "10"]
    args += ["--source", str(small_pair / "source.csv"), "--target", str(small_pair / "target.csv")]
    assert main(args) == 0
    rows = json.loads((tmp_path / "collect.json").read_text())
    assert [r["arm"] for r in rows] == ["source_only", "random", "region"]
    assert main(args[:-4] + ["--source", str(small_pair / "source.csv"), "--target", str(small_pair / "target.csv"), "--region", "x1:5:6"]) == 1


@pytest.mark.parametrize("command", ["synth", "decompose", "regret", "train", "worstcase", "regions", "collect-sim", "attribute", "grid"])
def test_help_lists_every_flag(command, capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args([command, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[command]
    for act in sub._actions:
        for flag in act.option_strings:
            assert re.search(rf"(?<![\w-]){re.escape(flag)}(?![\w-])", text), flag


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "shiftkit", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "decompose" in proc.stdout
