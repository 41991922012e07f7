import csv
import json
from pathlib import Path

import jsonschema
import pytest

from srtlab import cli
from srtlab.runner import SCHEMA_PATH

SCHEMA = json.loads(SCHEMA_PATH.read_text())

SMALL = """
[renewal]
K = 4096
ratio_points = 50
[grid]
x_list = 2^10..2^14
[criteria]
x_max = 2^14
[probe]
x = 2^10
n_list = 16, 64
z = 256
[mc]
n_walks = 4000
x = 256
"""

CSV_HEADERS = {
    "renewal.csv": ["k", "x", "u"],
    "ratios.csv": ["x", "u", "srt_ratio", "integrated_ratio"],
    "criteria-ns-density.csv": ["criterion", "eta", "x", "Q"],
    "probe-necessity.csv": ["x", "m1", "m2", "m3"],
    "mc.csv": ["target", "estimate", "stderr", "n_walks", "seed", "batches"],
}


def run(args, tmp_path, extra=""):
    cfg = tmp_path / "small.ini"
    cfg.write_text(SMALL + extra)
    return cli.main(args + ["--config", str(cfg)])


def test_dist_build_presets(tmp_path, capsys):
    assert cli.main(["dist-build", "--preset", "pareto a=0.7 h=1", "--out", str(tmp_path / "a")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["p"] == 1 and summary["q"] == 0
    assert cli.main(["dist-build", "--preset", "twosided-counterexample a=0.25", "--out", str(tmp_path / "b")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["p"] == 1 and summary["q"] == 1 and summary["cluster_count"] == 30
    law = json.loads((tmp_path / "b" / "law.json").read_text())
    sizes = law["values"]["cluster_sizes"]
    assert sizes["20"] == 2 ** 10


@pytest.mark.parametrize("text, code", [
    ("[law]\nalpha = 1.2\n", 2),
    ("[law]\ntypo = 1\n", 2),
    ("[law]\nfamily = finite\nmasses = 0.5, 0.4\n", 3),
    ("[renewal]\nK = 2^30\n", 4),
])
def test_exit_codes(tmp_path, text, code, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(text)
    cmd = "renewal" if "K" in text else "dist-build"
    assert cli.main([cmd, "--config", str(cfg), "--out", str(tmp_path / "o")]) == code
    assert "error:" in capsys.readouterr().err


def test_unknown_preset_exit_code(tmp_path):
    assert cli.main(["dist-build", "--preset", "nonsense", "--out", str(tmp_path)]) == 2


def test_renewal_cache_and_determinism(tmp_path, capsys):
    cache = tmp_path / "cache"
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["renewal", "--preset", "pareto-0.7", "--out", str(a), "--cache", str(cache)], tmp_path) == 0
    assert "cache_hit=False" in capsys.readouterr().out
    assert run(["renewal", "--preset", "pareto-0.7", "--out", str(b), "--cache", str(cache)], tmp_path) == 0
    assert "cache_hit=True" in capsys.readouterr().out
    for name in ("renewal.csv", "ratios.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def check_outputs(out: Path):
    for name, header in CSV_HEADERS.items():
        if (out / name).exists():
            with open(out / name) as fh:
                assert next(csv.reader(fh)) == header
    for path in out.glob("*.json"):
        data = json.loads(path.read_text())
        for item in data if isinstance(data, list) else [data]:
            jsonschema.validate(item, SCHEMA)


def test_criteria_probe_mc_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert run(["criteria", "--preset", "pareto-0.4", "--out", str(out)], tmp_path) == 0
    lines = capsys.readouterr().out.splitlines()
    assert all("growing" not in line for line in lines)
    extra = "[probe]\nselect = necessity, small-n, lemma41, lemma42, lemma51, bigjump\nell = 2\nm = 0\n"
    cfg = tmp_path / "probe.ini"
    cfg.write_text(SMALL.replace("[probe]", "[probe_unused]").replace("[probe_unused]\n", "[mc]\n", 0))
    assert run(["probe", "--preset", "pareto-0.4", "--out", str(out)], tmp_path, extra="") == 0
    assert run(["mc", "--preset", "pareto-0.5", "--out", str(out), "--seed", "3", "--threads", "2"], tmp_path) == 0
    check_outputs(out)
    mc = json.loads((out / "mc.json").read_text())
    assert mc["values"]["seed"] == 3 and mc["values"]["batches"] >= 16


def test_all_probes(tmp_path):
    out = tmp_path / "p"
    cfg = tmp_path / "p.ini"
    cfg.write_text(SMALL.replace("[probe]\n", "[probe]\nselect = necessity, small-n, lemma41, lemma42, lemma51, "
                                               "bigjump, llt\nell = 2\nm = 0\n"))
    assert cli.main(["probe", "--preset", "pareto-0.4", "--config", str(cfg), "--out", str(out)]) == 0
    check_outputs(out)
    probes = {v["probe"] for v in json.loads((out / "probes.json").read_text())}
    assert probes == {"necessity", "small-n", "lemma41", "lemma42", "lemma51", "bigjump", "llt"}


def test_twosided_criteria(tmp_path, capsys):
    out = tmp_path / "t"
    assert cli.main(["criteria", "--preset", "twosided", "--out", str(out)]) == 0
    lines = dict(line.split(": ", 1) for line in capsys.readouterr().out.splitlines())
    assert lines["ns-density"] != "growing"
    check_outputs(out)


def test_half_criteria(tmp_path, capsys):
    out = tmp_path / "h"
    assert cli.main(["criteria", "--preset", "half", "--out", str(out)]) == 0
    assert "half: fails on probed range" in capsys.readouterr().out


def test_report_svg_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["report", "--preset", "pareto-0.4", "--out", str(out), "--svg"], tmp_path) == 0
    svgs = sorted(p.name for p in a.glob("*.svg"))
    assert "fig-ratios.svg" in svgs and "fig-criteria-ns-density.svg" in svgs
    for p in a.iterdir():
        assert p.read_bytes() == (b / p.name).read_bytes(), p.name
    check_outputs(a)


def test_report_png(tmp_path):
    out = tmp_path / "png"
    assert run(["report", "--preset", "pareto-0.5", "--out", str(out)], tmp_path) == 0
    assert (out / "fig-ratios.png").read_bytes()[:4] == b"\x89PNG"
