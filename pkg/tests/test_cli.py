import json
import subprocess
import sys

import numpy as np
import pytest

from ghzdistill.cli import main
from ghzdistill.states_io import instruments_to_dict, flower_instruments, save_pmf
from ghzdistill.quantum_core import JointPmf


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_rates_w3(capsys):
    code, out, _ = run(["rates", "--state", "w3", "--measure", "computational"], capsys)
    assert code == 0
    for value in ("0.459148", "0.584963", "0.251629", "0.918296"):
        assert value in out


def test_rates_antisym3(capsys):
    code, out, _ = run(["rates", "--state", "antisym3", "--measure", "computational"], capsys)
    assert code == 0
    for value in ("0.792481", "1.084963", "0.584963"):
        assert value in out


def test_rates_ghz3_json(tmp_path, capsys):
    prefix = tmp_path / "ghz3"
    code, _, _ = run(["rates", "--state", "ghz3", "--out", str(prefix)], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "ghz3.json").read_text())
    vals = {e["name"]: e["value"] for e in doc["entries"]}
    assert vals["vc"] == pytest.approx(1.0) and vals["entropy_upper_bound"] == pytest.approx(1.0)
    assert (tmp_path / "ghz3.txt").read_text().startswith("state: ghz3")


def test_rates_with_instruments(tmp_path, capsys):
    path = tmp_path / "flower.instr.json"
    path.write_text(json.dumps(instruments_to_dict(flower_instruments(4))))
    code, out, _ = run(["rates", "--state", "flower4", "--instr", str(path)], capsys)
    assert code == 0
    assert "cq_ghz" in out and "2.000000" in out


def test_rates_optimize(capsys):
    code, out, _ = run(["rates", "--state", "w3", "--optimize", "--restarts", "1", "--seed", "3"], capsys)
    assert code == 0 and "vc_optimized" in out


def test_region_examples(tmp_path, capsys):
    code, out, _ = run(["region", "--state", "w3", "--mode", "classical", "--out", str(tmp_path / "r")], capsys)
    assert code == 0 and "min total rate:    1.000000" in out
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["solution"]["objective"] == pytest.approx(1.0)
    assert len(doc["constraints"]) == 6
    code, out, _ = run(["region", "--state", "antisym3"], capsys)
    assert "min total rate:    1.500000" in out


def test_region_independent_bits(tmp_path, capsys):
    pmf = tmp_path / "bits.pmf.json"
    save_pmf(JointPmf(np.full((2, 2), 0.25)), pmf)
    code, out, _ = run(["region", "--pmf", str(pmf)], capsys)
    assert code == 0 and "minimizing vertex: 1.000000, 1.000000" in out


def test_region_cq(tmp_path, capsys):
    path = tmp_path / "f.json"
    path.write_text(json.dumps(instruments_to_dict(flower_instruments(4))))
    code, out, _ = run(["region", "--state", "flower4", "--mode", "cq", "--instr", str(path)], capsys)
    assert code == 0 and "min total rate:    1.000000" in out


def test_simulate_rows(tmp_path, capsys):
    code, out, _ = run(["simulate", "--pmf", "w3", "--rates", "0.34,0.34,0.34", "--n", "6",
                        "--trials", "50", "--seed", "1", "--out", str(tmp_path / "sim")], capsys)
    assert code == 0
    header, row = out.strip().splitlines()
    assert header.startswith("pmf,rates,n,trials,seed,error")
    assert (tmp_path / "sim.csv").read_text() == out
    assert json.loads((tmp_path / "sim.json").read_text())["trials"] == 50


def test_simulate_deterministic_pmf(capsys):
    code, out, _ = run(["simulate", "--pmf", "deterministic3", "--rates", "0,0,0", "--n", "5", "--trials", "20"], capsys)
    assert code == 0 and out.splitlines()[1].split(",")[-5] == "0.000000"


@pytest.mark.parametrize("argv", [
    ["simulate", "--pmf", "w3", "--rates", "0.3,abc,0.1", "--n", "6"],
    ["simulate", "--pmf", "w3", "--rates", "0.3,0.3", "--n", "6"],
    ["simulate", "--pmf", "w3", "--rates", "0.3,0.3,0.3", "--n", "0"],
    ["rates", "--state", "nosuchstate"],
    ["rates", "--state", "w3", "--unknown-flag"],
    ["region", "--state", "w3", "--mode", "cq"],
    ["region"],
    [],
])
def test_bad_input_exit_2(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2
    assert len(err.strip().splitlines()) == 1


def test_bad_instrument_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"parties": [{"type": "kraus", "operators": [{"re": (0.9 * np.eye(2)).tolist()}]}] * 3}))
    code, _, err = run(["rates", "--state", "w3", "--instr", str(path)], capsys)
    assert code == 2 and "party 0" in err


def test_examples_subcommand(capsys):
    code, out, _ = run(["examples"], capsys)
    assert code == 0
    assert "MISMATCH" not in out
    assert out.strip().splitlines()[-1].endswith("match")


def test_examples_invariant_exit(monkeypatch, capsys):
    import ghzdistill.cli as cli

    monkeypatch.setattr(cli, "example_rows", lambda: [{"name": "x", "value": 1.0, "expected": 0.0, "tol": 0.0, "ok": False}])
    code, _, err = run(["examples"], capsys)
    assert code == 3 and "invariant" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ghzdistill", "rates", "--state", "epr"], capture_output=True, text=True)
    assert proc.returncode == 0 and "epr_0_1" in proc.stdout
