import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from geolab import __version__
from geolab.cli import DEFAULTS, main, read_config
from geolab.errors import ConfigError
from geolab.io import SCHEMA, dumps, read_jsonl, write_csv, write_jsonl, write_svg


def run(tmp_path, *argv):
    return main([*argv, "--output-dir", str(tmp_path)])


# ---------------------------------------------------------------- io


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip(x):
    assert json.loads(dumps(x)) == x


def test_dumps_is_canonical():
    a = dumps({"b": 1, "a": [0.1, np.float64(2.0), np.int64(3)], "c": None})
    assert a == '{"a": [0.10000000000000001, 2.0, 3], "b": 1, "c": null}'
    assert dumps({"x": math.inf, "y": math.nan}) == '{"x": "inf", "y": "nan"}'
    with pytest.raises(TypeError):
        dumps(object())


def test_jsonl_and_csv(tmp_path):
    recs = [{"k": i, "v": i / 3} for i in range(4)]
    assert write_jsonl(tmp_path / "r.jsonl", recs) == 4
    assert read_jsonl(tmp_path / "r.jsonl") == recs
    write_csv(tmp_path / "t.csv", ["x", "y"], [(1, 0.5), (2, 1 / 3)])
    raw = (tmp_path / "t.csv").read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(raw.decode().splitlines()))
    assert rows[0] == ["x", "y"] and float(rows[2][1]) == 1 / 3


def test_svg(tmp_path):
    write_svg(tmp_path / "p.svg", [("a", [(0, 0), (1, 2)]), ("b", [(0, 1), (1, math.inf)])])
    text = (tmp_path / "p.svg").read_text()
    assert text.startswith("<svg") and text.count("<polyline") == 2
    with pytest.raises(ValueError):
        write_svg(tmp_path / "q.svg", [("a", [])])


# ---------------------------------------------------------------- config


def test_config_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\ngroup = hecke:lambda=3\nT = 4.5  # trailing\n\n")
    assert read_config(p) == {"group": "hecke:lambda=3", "T": "4.5"}
    p.write_text("colour = red\n")
    with pytest.raises(ConfigError):
        read_config(p)
    p.write_text("group modular\n")
    with pytest.raises(ConfigError):
        read_config(p)


def test_unknown_config_key_exit_3(tmp_path, capsys):
    p = tmp_path / "c.cfg"
    p.write_text("grup = modular\n")
    assert run(tmp_path, "census", "--config", str(p)) == 3
    assert "unknown key" in capsys.readouterr().err


def test_bad_values_exit_3(tmp_path):
    assert run(tmp_path, "census", "--group", "torus") == 3
    assert run(tmp_path, "census", "--T", "ten") == 3
    assert run(tmp_path, "census", "--threads", "0") == 3
    assert run(tmp_path, "census", "--config", str(tmp_path / "missing.cfg")) == 3
    assert run(tmp_path, "cover", "--group", "schottky:default", "--hom", "z") == 3


def test_flags_override_config(tmp_path, capsys):
    p = tmp_path / "c.cfg"
    p.write_text("group = modular\nT = 0.5\n")
    assert run(tmp_path, "census", "--config", str(p), "--T", "2.0") == 0
    assert "count 1" in capsys.readouterr().out


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("GEOLAB_THREADS", "3")
    assert run(tmp_path, "excursions", "--T", "5", "--Y", "2") == 0
    rep = json.loads((tmp_path / "excursions.json").read_text())
    assert rep["config"]["threads"] == 3
    monkeypatch.setenv("GEOLAB_THREADS", "x")
    assert run(tmp_path, "excursions", "--T", "5") == 3


def test_defaults_cover_all_flags():
    from geolab.cli import COMMANDS

    for _, flags in COMMANDS.values():
        assert set(flags) <= set(DEFAULTS)


# ---------------------------------------------------------------- commands


def test_census_small(tmp_path, capsys):
    assert run(tmp_path, "census", "--group", "modular", "--T", "2.0") == 0
    assert "count 1" in capsys.readouterr().out
    recs = read_jsonl(tmp_path / "census.jsonl")
    assert len(recs) == 1 and abs(recs[0]["trace"]) == 3
    assert run(tmp_path, "census", "--T", "0.5") == 0
    assert "count 0" in capsys.readouterr().out
    assert read_jsonl(tmp_path / "census.jsonl") == []


def test_census_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for path in (a, b):
        assert run(tmp_path, "census", "--T", "7", "--seed", "5", "--out", str(path)) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(read_jsonl(a)) > 100


def test_budget_exit_2(tmp_path):
    assert run(tmp_path, "census", "--T", "9", "--budget", "10") == 2
    assert run(tmp_path, "covering-exponents", "--N", "12") == 2


def test_report_schema(tmp_path, capsys):
    assert run(tmp_path, "excursions", "--T", "6", "--Y", "2") == 0
    assert capsys.readouterr().out.strip().endswith("PASS slack=0.0")
    rep = json.loads((tmp_path / "excursions.json").read_text())
    assert {"experiment", "params", "table", "verdict", "slack", "schema", "version", "config"} <= set(rep)
    assert rep["schema"] == SCHEMA and rep["version"] == __version__
    assert set(rep["config"]) == set(DEFAULTS)
    assert len(read_jsonl(tmp_path / "excursions.jsonl")) == rep["table"][0]["classes"]


def test_reports_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert main(["entropy-check", "--T", "7", "--Y", "4", "--sample-size", "200",
                     "--seed", "11", "--output-dir", str(d)]) in (0, 1)
        outs.append((d / "entropy-check.json").read_bytes())
    # output_dir differs inside the embedded config; compare the rest
    a, b = (json.loads(o) for o in outs)
    a["config"].pop("output_dir"), b["config"].pop("output_dir")
    assert dumps(a) == dumps(b)


def test_delta_command(tmp_path, capsys):
    assert run(tmp_path, "delta", "--group", "modular", "--rmin", "7", "--rmax", "12") == 0
    out = capsys.readouterr().out
    d = float(out.split()[1])
    assert 0.9 <= d <= 1.1
    rows = list(csv.reader((tmp_path / "delta_counts.csv").read_text().splitlines()))
    assert rows[0] == ["radius", "count"]


def test_equidistribute_command(tmp_path, capsys):
    assert run(tmp_path, "equidistribute", "--group", "modular", "--T", "10", "--f", "cusp", "--Y", "2") == 0
    rep = json.loads((tmp_path / "equidistribute.json").read_text())
    assert abs(rep["table"][-1]["value"] - 3 / (2 * math.pi)) <= 0.12
    assert run(tmp_path, "equidistribute", "--group", "schottky:default") == 3


def test_beta_tails_command(tmp_path):
    code = run(tmp_path, "beta-tails", "--T", "9", "--Y", "2", "--betas", "0.2,0.4", "--svg")
    assert code in (0, 1)
    rep = json.loads((tmp_path / "beta-tails.json").read_text())
    assert [r["beta"] for r in rep["table"]] == [0.2, 0.4]
    assert (tmp_path / "beta_tails.svg").exists()
    assert (tmp_path / "beta_tails.csv").read_text().startswith("beta,rate,bound\n")


def test_cover_commands(tmp_path, capsys):
    code = run(tmp_path, "cover", "--group", "schottky:default", "--hom", "a", "--experiment", "delta")
    rep = json.loads((tmp_path / "cover-delta.json").read_text())
    gap = rep["table"][0]["gap"]
    assert code == (0 if abs(gap) <= 0.05 else 1)
    assert run(tmp_path, "cover", "--group", "schottky:default", "--hom", "a", "--experiment", "equi",
               "--T", "12") == 0
    assert run(tmp_path, "cover", "--group", "hecke:lambda=3", "--hom", "T%3", "--experiment", "mass",
               "--T", "9", "--Y", "4") == 0
    assert run(tmp_path, "cover", "--experiment", "spin") == 3


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "geolab.cli", "census", "--T", "2",
                          "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and "count 1" in res.stdout
    res = subprocess.run([sys.executable, "-m", "geolab.cli", "frobnicate"], capture_output=True, text=True)
    assert res.returncode == 2  # argparse usage error
