import csv
import io
import json

import pytest

from impvqe.cli import SCHEMA_VERSION, ConfigError, main, parse_config

ADAPT = """\
model:
  preset: e_g
ansatz:
  kind: adapt
  pool: mcp
adapt:
  max_parameters: 4
seeds: [0, 1]
"""

HVA = """\
model: {preset: e_g}
ansatz: {kind: hva, layers: 1}
"""

NOISY = """\
model: {preset: e_g}
ansatz: {kind: published}
execution: {mode: noisy, shots: 4096, p1: 1.0e-4, p2: 1.0e-3}
optimizer: {name: smo, sweeps: 1}
mitigation: {zne: true, scales: [1, 2, 3]}
"""


def _run(tmp_path, text, name="run", capsys=None):
    cfg = tmp_path / f"{name}.yaml"
    cfg.write_text(text)
    out = tmp_path / name
    code = main(["run", str(cfg), "--out", str(out), "--quiet"])
    return code, out


def _rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_run_writes_artifacts(tmp_path):
    code, out = _run(tmp_path, ADAPT)
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema_version"] == SCHEMA_VERSION
    h = manifest["config_hash"]
    rows = _rows(out / "summary.csv")
    assert [r["seed"] for r in rows] == ["0", "1"]
    assert all(r["config_hash"] == h for r in rows)
    assert all(r["n_theta"] == "4" for r in rows)
    for line in (out / "iterations.jsonl").read_text().splitlines():
        assert json.loads(line)["config_hash"] == h
    assert (out / "ansatz_seed0.txt").read_text().startswith(f"# config_hash {h}")


def test_run_is_deterministic(tmp_path):
    _, a = _run(tmp_path, ADAPT, "a")
    _, b = _run(tmp_path, ADAPT, "b")
    for f in ("manifest.json", "summary.csv", "iterations.jsonl", "ansatz_seed1.txt"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_output_path_not_in_hash():
    a = parse_config(ADAPT + "output: x\n")
    b = parse_config(ADAPT + "output: y\n")
    assert a.hash == b.hash != parse_config(ADAPT.replace("max_parameters: 4", "max_parameters: 5")).hash


def test_fixed_ansatz_run(tmp_path):
    code, out = _run(tmp_path, HVA)
    assert code == 0
    (row,) = _rows(out / "summary.csv")
    assert row["ansatz"] == "hva" and row["n_theta"] == "5"
    assert not (out / "iterations.jsonl").exists()


def test_noisy_mitigation_run(tmp_path):
    code, out = _run(tmp_path, NOISY)
    assert code == 0
    rows = _rows(out / "mitigation.csv")
    assert [float(r["scale"]) for r in rows] == [1.0, 2.0, 3.0]
    assert "zne_filtered" in _rows(out / "summary.csv")[0]


@pytest.mark.parametrize("text, line", [
    ("model: {preset: e_g}\nansatz:\n  kind: adapt\n  pol: hc\n", 4),
    ("model:\n  preset: e_g\nexecution:\n  mode: shots\n  shots: many\n", 5),
    ("model: {preset: e_g}\nbogus: 1\n", 2),
    ("model: {preset: e_g}\nansatz: kind: adapt\n", 2),
    ("model:\n  preset: e_g\nexecution:\n  mode: statevector\n  p2: 0.1\n", 4),
    ("model:\n  preset: e_g\nseeds: [-1]\n", 3),
])
def test_config_errors_name_the_line(text, line):
    with pytest.raises(ConfigError, match=f"line {line}"):
        parse_config(text)


def test_malformed_config_exits_1(tmp_path, capsys):
    code, _ = _run(tmp_path, "ansatz: [1, 2\n")
    assert code == 1
    assert "config error" in capsys.readouterr().err


def test_missing_file_and_bad_arguments_exit_1(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_runtime_failure_exits_2(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(HVA)
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", str(cfg), "--out", str(blocker / "sub"), "--quiet"]) == 2


def test_report_merges_runs(tmp_path, capsys):
    _, a = _run(tmp_path, ADAPT, "a")
    _, b = _run(tmp_path, HVA, "b")
    capsys.readouterr()
    conv = tmp_path / "conv.csv"
    assert main(["report", str(a), str(b), "--convergence", str(conv)]) == 0
    table = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(table) == 3
    assert {r["ansatz"] for r in table} == {"adapt", "hva"}
    assert len(_rows(conv)) == 2 * 5  # two seeds, iterations 0..4


def test_report_rejects_empty_or_corrupt(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", str(empty)]) == 1
    _, a = _run(tmp_path, HVA, "a")
    m = json.loads((a / "manifest.json").read_text())
    m["schema_version"] = 99
    (a / "manifest.json").write_text(json.dumps(m))
    assert main(["report", str(a)]) == 1


def test_pools_verb(capsys):
    assert main(["pools"]) == 0
    sizes = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert sizes == {"uccsd": "152", "succspd": "12", "hc": "56", "z_stripped": "16", "mcp": "10"}


def test_oracle_verb(capsys):
    assert main(["oracle"]) == 0
    out = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert float(out["E_GS"]) == pytest.approx(-19.269759368820566, abs=1e-9)
    assert float(out["fidelity[product_I]"]) == pytest.approx(0.193, abs=1e-3)


def test_symmetry_filter_switch(tmp_path):
    text = NOISY.replace("scales: [1, 2, 3]}", "scales: [1, 2, 3], symmetry_filter: false}")
    code, out = _run(tmp_path, text)
    assert code == 0
    assert _rows(out / "summary.csv")[0]["zne_filtered"] == ""
    assert all(r["filtered"] == "" and r["raw"] for r in _rows(out / "mitigation.csv"))
