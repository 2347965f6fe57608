import json
import subprocess
import sys

import pytest

from stablefield import fieldio
from stablefield.cli import run
from stablefield.fixtures import BUILTIN, z3_flip

FAST = ["--reps", "200", "--reps-bn", "2000", "--truncation", "300", "--states", "16"]


def invoke(capsys, *argv):
    code = run([str(a) for a in argv])
    return code, json.loads(capsys.readouterr().out)


def test_effdim_z3(tmp_path, capsys):
    code, out = invoke(capsys, "effdim", "--fixture", "z3-flip", "--seed", 1, "--out", tmp_path)
    assert code == 0
    assert (out["effdim"]["p"], out["effdim"]["l"]) == (1, 2)
    assert out["effdim"]["volume"] == "6/1"
    assert json.loads((tmp_path / "results.json").read_text()) == out


def test_bn_single_point(tmp_path, capsys):
    code, out = invoke(capsys, "bn", "-f", "irrational-rot", "--n", 1, "--seed", 1, "--out", tmp_path)
    assert code == 0 and out["bn"]["values"] == [1.0]
    assert (tmp_path / "bn.csv").read_text().splitlines()[1] == "1,1.0,Exact,0.0"


def test_classify(tmp_path, capsys):
    code, out = invoke(capsys, "classify", "-f", "moving-avg", "--seed", 2, "--out", tmp_path, "--states", 8)
    assert code == 0 and out["classify"]["label"] == "Dissipative"


def test_verify_rotation(tmp_path, capsys):
    code, out = invoke(capsys, "verify", "-f", "irrational-rot", "--alpha", 1.2, "--seed", 3,
                       "--out", tmp_path, "--n", 32, *FAST)
    assert code == 0
    assert out["classify"]["label"] == "Conservative"
    assert abs(out["growth"]["slope"] - 1 / 1.2) < 0.03
    m = out["maxima"]
    assert m["normalization_label"] == "n^(1/alpha)" and m["target"] == "Frechet"
    assert 0 <= m["ks_statistic"] < 1
    for name in ("results.json", "bn.csv", "maxima.csv"):
        assert (tmp_path / name).exists()


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_verify_every_fixture(name, tmp_path, capsys):
    code, out = invoke(capsys, "verify", "-f", name, "--seed", 4, "--out", tmp_path, "--n", 8, *FAST)
    assert code == 0
    expected = "Dissipative" if name == "moving-avg" else "Conservative"
    assert out["classify"]["label"] == expected
    assert out["maxima"]["ks_statistic"] is not None


def test_field_file(tmp_path, capsys):
    path = tmp_path / "z3.ini"
    fieldio.dump(z3_flip(), path)
    code, out = invoke(capsys, "effdim", "--field", path, "--seed", 1, "--out", tmp_path)
    assert code == 0 and out["effdim"]["p"] == 1


def test_alpha_override_on_field_file(tmp_path, capsys):
    path = tmp_path / "z3.ini"
    fieldio.dump(z3_flip(), path)
    code, out = invoke(capsys, "bn", "--field", path, "--alpha", 0.7, "--n", 3, "--seed", 1, "--out", tmp_path)
    assert code == 0 and out["field"]["alpha"] == 0.7
    assert out["bn"]["values"][0] == pytest.approx(14 ** (1 / 0.7))


@pytest.mark.parametrize("argv,code,kind", [
    (["effdim", "--seed", "1"], 2, "usage"),
    (["effdim", "-f", "z3-flip"], 2, "usage"),
    (["effdim", "-f", "nope", "--seed", "1"], 1, "fixture"),
    (["effdim", "--field", "/nonexistent.ini", "--seed", "1"], 1, "config"),
    (["bn", "-f", "z3-flip", "--n", "0", "--seed", "1"], 2, "usage"),
    (["bn", "-f", "z3-flip", "--n-grid", "4,x", "--seed", "1"], 2, "usage"),
    (["frobnicate", "--seed", "1"], 2, "usage"),
])
def test_errors_are_json(argv, code, kind, capsys, tmp_path):
    got, out = invoke(capsys, *argv, "--out", tmp_path) if argv[0] != "frobnicate" else invoke(capsys, *argv)
    assert got == code
    assert out["error"] == kind and out["message"]


def test_bad_config_file(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[field]\nalpha = 1.2\n[action]\ntype = warp\n[kernel]\ntype = coordinate\n")
    code, out = invoke(capsys, "effdim", "--field", path, "--seed", 1, "--out", tmp_path)
    assert code == 2 and out["error"] == "config"


def test_threads_env_validated(monkeypatch, capsys, tmp_path):
    monkeypatch.setenv("STABLEFIELD_THREADS", "many")
    code, out = invoke(capsys, "maxima", "-f", "z3-flip", "--n", 2, "--seed", 1, "--out", tmp_path, *FAST)
    assert code == 2 and out["error"] == "config"


def test_deterministic_across_runs_and_threads(tmp_path, capsys, monkeypatch):
    argv = ["verify", "-f", "z3-flip", "--n", 8, "--seed", 9, *FAST]
    outs = []
    for i, threads in enumerate(("1", "1", "3")):
        monkeypatch.setenv("STABLEFIELD_THREADS", threads)
        d = tmp_path / f"run{i}"
        assert invoke(capsys, *argv, "--out", d)[0] == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1] == outs[2]
    assert set(outs[0]) == {"results.json", "bn.csv", "maxima.csv"}


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "stablefield.cli", "effdim", "-f", "z3-flip", "--seed", "1",
                           "--out", str(tmp_path)], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["effdim"]["p"] == 1
