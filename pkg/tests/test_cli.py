from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from hjmlevy.cli import fmt, main
from hjmlevy.config import parse_config
from hjmlevy.errors import ConfigError

SMALL_SOLVE = """
[measure]
kind = truncated_stable_positive
rho = 0.5

[model]
horizon = 1.0
n = 30
f0 = 1.0
eps = 0.01

[seeds]
master = 42
count = 6

[comparison]
check = true
alpha = 1.0
gamma = 0.5
beta = -1.0
"""


def _write(tmp_path: Path, text: str, name: str = "cfg.ini") -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


def test_unknown_key_is_anchored_to_its_line(tmp_path):
    text = "[measure]\nkind = exponential_jumps\n\n[model]\nhorizon = 1.0\nhorizn = 2.0\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "x.ini")
    assert exc.value.line == 6
    assert str(exc.value).startswith("x.ini:6:")


def test_bad_values_are_anchored():
    with pytest.raises(ConfigError) as exc:
        parse_config("[measure]\nkind = exponential_jumps\n[model]\nn = ten\n")
    assert exc.value.line == 4
    with pytest.raises(ConfigError) as exc:
        parse_config("[measure]\nkind = truncated_stable_negative\nrho = 2.0\n")
    assert exc.value.line == 2
    with pytest.raises(ConfigError) as exc:
        parse_config("[measure]\nkind = exponential_jumps\n[nonsense]\n")
    assert exc.value.line == 3


def test_defaults_are_echoed():
    cfg = parse_config("[measure]\nkind = exponential_jumps\n")
    res = cfg.resolved()
    assert res["model"]["n"] == "200" and res["solver"]["tol"] == "1e-08"
    assert res["comparison"]["beta"] == "certificate"
    again = parse_config("\n".join(f"[{s}]\n" + "\n".join(f"{k} = {v}" for k, v in kv.items())
                                   for s, kv in res.items() if s != "comparison"))
    assert again.resolved()["measure"] == res["measure"]


def test_empty_measure_block_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, "[measure]\n\n[model]\nn = 10\n")
    assert main(["classify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "cfg.ini:1:" in capsys.readouterr().err


def test_indeterminate_classify_exits_0(tmp_path):
    cfg = _write(tmp_path, "[measure]\nkind = truncated_stable_positive\nrho = 1.0\n[model]\nhorizon = 1.0\n")
    out = tmp_path / "o"
    assert main(["classify", "--config", str(cfg), "--out", str(out)]) == 0
    rows = (out / "classify.csv").read_text().splitlines()
    assert rows[1].split(",")[3] == "Indeterminate"


def test_explode_study_in_existence_regime_exits_4(tmp_path):
    cfg = _write(tmp_path, "[measure]\nkind = exponential_jumps\n")
    assert main(["explode-study", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4


def test_fmt():
    assert fmt(0.1) == "0.1" and fmt(float("nan")) == "" and fmt(float("inf")) == "inf"
    assert fmt(1 / 3) == "0.333333333333" and fmt(True) == "1" and fmt(7) == "7"


def _tree(root: Path) -> dict[str, bytes]:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_solve_outputs_are_deterministic_across_workers(tmp_path):
    cfg = _write(tmp_path, SMALL_SOLVE)
    trees = []
    for k, workers in enumerate((1, 1, 3)):
        out = tmp_path / f"run{k}"
        assert main(["solve", "--config", str(cfg), "--out", str(out), "--workers", str(workers)]) == 0
        tree = _tree(out)
        # the manifest echoes the output directory, which differs between runs by design
        manifest = json.loads(tree.pop("manifest.json"))
        assert manifest["config"]["output"].pop("dir") == str(out)
        trees.append((tree, manifest))
    assert trees[0] == trees[1] == trees[2]
    files = _tree(tmp_path / "run0")
    assert "fields/field_0005.csv" in files and "diagnostics/iterations_0000.csv" in files
    field = files["fields/field_0000.csv"].decode()
    assert "\r" not in field
    second_row = field.split("\n")[2].split(",")
    assert second_row[1] == "" and second_row[2] != ""  # below-diagonal cell stays empty
    manifest = json.loads(files["manifest.json"])
    assert manifest["aggregate"]["converged"] == 6
    assert set(manifest["files"]) >= {"summary.csv", "fields/field_0000.csv"}
    text = files["manifest.json"].decode()
    assert text == json.dumps(manifest, sort_keys=True, indent=2) + "\n"


def test_seed_overrides_and_env_workers(tmp_path, monkeypatch):
    cfg = _write(tmp_path, SMALL_SOLVE)
    monkeypatch.setenv("HJM_WORKERS", "2")
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--seeds", "3",
                 "--master-seed", "9"]) == 0
    rows = (out / "simulate.csv").read_text().splitlines()
    assert len(rows) == 4
    monkeypatch.setenv("HJM_WORKERS", "many")
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 2


def test_exponent_table(tmp_path):
    cfg = _write(tmp_path, "[measure]\nkind = truncated_stable_negative\nrho = 1.5\n"
                           "[exponent_table]\nz_min = 0.01\nz_max = 1e4\npoints = 13\n")
    out = tmp_path / "o"
    assert main(["exponent-table", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "exponent_table.csv").read_text().splitlines()
    assert lines[0] == "z,j,j_prime,j_second" and len(lines) == 15
    assert lines[1].startswith("0,0,0,")
    assert lines[-1].endswith("inf,inf,inf")  # past the overflow threshold


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, "[measure]\nkind = exponential_jumps\n")
    proc = subprocess.run([sys.executable, "-m", "hjmlevy", "classify", "--config", str(cfg),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0 and "Existence" in proc.stdout
