import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from decospace.cli import main
from decospace.grid import GridSpec, SampledField, random_bandlimited

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
BESOV = str(CONFIGS / "besov.toml")


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def patched_config(tmp_path, text_from, replace):
    src = (CONFIGS / text_from).read_text()
    for old, new in replace:
        assert old in src
        src = src.replace(old, new)
    path = tmp_path / "cfg.toml"
    path.write_text(src)
    return str(path)


@pytest.mark.parametrize("name", ["besov", "alpha_half", "besov_frame_inadmissible"])
def test_verify_all_passes_on_shipped_configs(name, tmp_path, capsys):
    code, out, err = run(["verify", "all", "--seed", "7", "--config", str(CONFIGS / f"{name}.toml"), "--out-dir", str(tmp_path)], capsys)
    summary = json.loads(out)
    assert code == 0, summary["failed"]
    assert summary["failed"] == [] and summary["checks"] > 0 and summary["seed"] == 7
    assert (tmp_path / "verify.json").exists() and (tmp_path / "verify.csv").exists()


def test_sweep_csv_contract_and_determinism(tmp_path, capsys):
    argv = ["sweep", "--deltas", "1,0.5,0.25,0.125", "--config", BESOV, "--emit", "csv"]
    code1, out1, _ = run(argv + ["--out-dir", str(tmp_path / "a")], capsys)
    code2, out2, _ = run(argv + ["--out-dir", str(tmp_path / "b")], capsys)
    assert code1 == code2 == 0
    assert out1 == out2
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
    rows = list(csv.DictReader(io.StringIO(out1)))
    assert list(rows[0]) == ["delta", "residual", "iters", "coeff_norm", "decomp_norm", "ratio"]
    assert [float(r["delta"]) for r in rows] == [1.0, 0.5, 0.25, 0.125]
    res = [float(r["residual"]) for r in rows]
    assert all(b < a for a, b in zip(res, res[1:]))
    iters = [int(r["iters"]) for r in rows if r["iters"]]
    assert iters and all(b <= a for a, b in zip(iters, iters[1:]))
    assert json.loads((tmp_path / "a" / "sweep.json").read_text())["verdict"] == "monotone"


def test_sweep_single_delta(tmp_path, capsys):
    code, out, _ = run(["sweep", "--deltas", "0.25", "--config", BESOV, "--out-dir", str(tmp_path)], capsys)
    assert code == 0 and json.loads(out)["verdict"] == "insufficient points"


def test_sweep_rejects_bad_density(tmp_path, capsys):
    code, _, err = run(["sweep", "--deltas", "2,1,0.5", "--config", BESOV, "--out-dir", str(tmp_path)], capsys)
    assert code == 2 and "--deltas" in err


def test_unknown_key_is_config_error(tmp_path, capsys):
    cfg = patched_config(tmp_path, "besov.toml", [("n = 2048", "n = 2048\nnn = 3")])
    code, _, err = run(["covering", "--config", cfg, "--out-dir", str(tmp_path)], capsys)
    assert code == 2 and "nn" in err


def test_delta_above_one_is_config_error(tmp_path, capsys):
    cfg = patched_config(tmp_path, "besov.toml", [("delta = 0.0625", "delta = 1.5")])
    code, _, err = run(["frame", "analyze", "--config", cfg, "--out-dir", str(tmp_path)], capsys)
    assert code == 2 and "delta" in err


def test_no_contraction_is_numeric_guard(tmp_path, capsys):
    cfg = patched_config(tmp_path, "besov.toml", [("delta = 0.0625", "delta = 1.0")])
    code, _, err = run(["frame", "reconstruct", "--method", "neumann", "--config", cfg, "--out-dir", str(tmp_path)], capsys)
    assert code == 3 and "frames" in err


def test_aliased_input_is_numeric_guard(tmp_path, capsys):
    grid = GridSpec(1, 2048, 16.0)
    white = SampledField.from_hat(grid, np.random.default_rng(0).standard_normal(grid.shape))
    path = tmp_path / "white.dspf"
    white.save(path)
    code, _, err = run(["norm", "--input", str(path), "--config", BESOV, "--out-dir", str(tmp_path)], capsys)
    assert code == 3 and "trusted" in err


def test_norm_input_file(tmp_path, capsys):
    grid = GridSpec(1, 2048, 16.0)
    f = random_bandlimited(grid, np.random.default_rng(3))
    path = tmp_path / "f.dspf"
    f.save(path)
    code, out, _ = run(["norm", "--input", str(path), "--config", BESOV, "--out-dir", str(tmp_path), "--emit", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["field", "index", "w", "piece_norm"]
    assert {r["field"] for r in rows} == {"0"} and len(rows) == 7
    summary = json.loads((tmp_path / "norm.json").read_text())
    assert len(summary["norms"]) == 1 and summary["p"] == 2.0


def test_bapu_flags(tmp_path, capsys):
    code, out, _ = run(["bapu", "--bump-kind", "smooth", "--order", "1", "--config", BESOV, "--out-dir", str(tmp_path)], capsys)
    summary = json.loads(out)
    assert code == 0 and summary["config"]["partition"]["kind"] == "smooth"
    assert "derivative_sups" in summary
    code, _, err = run(["bapu", "--bump-order", "20", "--config", BESOV, "--out-dir", str(tmp_path)], capsys)
    assert code == 2 and "partition.N" in err


def test_criteria_report(tmp_path, capsys):
    cfg = str(CONFIGS / "besov_frame_inadmissible.toml")
    code, out, _ = run(["criteria", "--config", cfg, "--truncation", "64", "--out-dir", str(tmp_path)], capsys)
    summary = json.loads(out)
    assert code == 0
    assert summary["verdict"] == "inadmissible" and summary["stability"] >= 1.25
    assert {"params", "C1", "C2", "stability", "verdict", "pessimistic_delta0"} <= set(summary)


def test_frame_analyze_then_synthesize(tmp_path, capsys):
    code, out, _ = run(["frame", "analyze", "--config", BESOV, "--out-dir", str(tmp_path)], capsys)
    assert code == 0 and json.loads(out)["coefficients"] > 0
    dscf = tmp_path / "coefficients.dscf"
    assert dscf.exists()
    code, out, _ = run(["frame", "synthesize", "--coefficients", str(dscf), "--config", BESOV, "--out-dir", str(tmp_path)], capsys)
    assert code == 0 and json.loads(out)["l2_norm"] > 0


@pytest.mark.parametrize("method", ["semidiscrete", "neumann", "banach"])
def test_frame_reconstruct_methods(method, tmp_path, capsys):
    code, out, _ = run(["frame", "reconstruct", "--method", method, "--config", BESOV, "--out-dir", str(tmp_path)], capsys)
    summary = json.loads(out)
    assert code == 0 and summary["max_error"] <= 1e-6


def test_covering_flags(tmp_path, capsys):
    code, out, _ = run(["covering", "--kind", "alpha", "--alpha", "0.5", "--r", "1.0", "--xi", "100", "--config", BESOV, "--out-dir", str(tmp_path)], capsys)
    assert code == 1  # r = 1 leaves gaps between neighbouring sets


def test_seed_recorded_and_changes_output(tmp_path, capsys):
    a = json.loads(run(["norm", "--seed", "1", "--config", BESOV, "--out-dir", str(tmp_path)], capsys)[1])
    b = json.loads(run(["norm", "--seed", "2", "--config", BESOV, "--out-dir", str(tmp_path)], capsys)[1])
    assert (a["seed"], b["seed"]) == (1, 2) and a["norms"] != b["norms"]
