import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from nosekam.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    rows = list(csv.reader(io.StringIO(Path(path).read_text())))
    return rows[0], np.array(rows[1:], dtype=float)


def only(out_dir, pattern):
    files = sorted(Path(out_dir).glob(pattern))
    assert len(files) == 1, files
    return files[0]


def test_normal_form_constant_mass(capsys, tmp_path):
    code, out, _ = run(capsys, "normal-form", "--a", "0", "--b", "0", "--out", str(tmp_path))
    rep = json.loads(out)
    assert code == 0
    assert (rep["alpha"], rep["beta_scalar"], rep["gamma_par"], rep["gamma_perp"]) == ("-11/24", "1", "1", "-1/2")
    assert rep["nu"]["x^3*U"] == "55/144"
    assert rep["residual_ok"] is True
    manifest = json.loads(only(tmp_path, "manifest-normal-form-*.json").read_text())
    assert manifest["config_sha256"][:12] in only(tmp_path, "normal-form-*.json").name


def test_normal_form_a2(capsys, tmp_path):
    code, out, _ = run(capsys, "normal-form", "--a", "2", "--b", "-2/3", "--out", str(tmp_path))
    assert code == 0 and json.loads(out)["beta_scalar"] == "0"


def test_normal_form_truncation(capsys, tmp_path):
    _, out4, _ = run(capsys, "normal-form", "--out", str(tmp_path))
    code, out3, _ = run(capsys, "normal-form", "--N", "3", "--out", str(tmp_path))
    n4, n3 = json.loads(out4)["nu"], json.loads(out3)["nu"]
    assert code == 0
    assert set(n3) < set(n4)
    assert all(n4[k] == v for k, v in n3.items())
    assert "x^3*U" not in n3 and "U^3" in n3


def test_simulate_nose_hoover(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--chart", "nose-hoover", "--n", "1", "--sho", "--T", "1", "--M", "1",
                     "--t-end", "5", "--h", "0.01", "--no-figures", "--out", str(tmp_path))
    assert code == 0
    head, data = read_csv(only(tmp_path, "orbit-nose-hoover-*.csv"))
    assert head == ["t", "q", "rho", "xi", "log_s", "dxi_dt", "E"]
    rho, dxi = data[:, 2], data[:, 5]
    assert np.max(np.abs(dxi - (rho ** 2 - 1.0) / 1.0)) < 1e-9
    # the column is the derivative of the xi column
    t, xi = data[:, 0], data[:, 3]
    assert np.max(np.abs(np.gradient(xi, t)[1:-1] - dxi[1:-1])) < 1e-3
    assert np.ptp(data[:, -1]) < 1e-8


def test_simulate_rescaled_beta0_keeps_W(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--chart", "rescaled", "--beta", "0", "--cosine", "1", "--t-end", "2",
                     "--out", str(tmp_path))
    assert code == 0
    head, data = read_csv(only(tmp_path, "orbit-rescaled-*.csv"))
    assert np.ptp(data[:, head.index("W")]) == 0.0
    assert only(tmp_path, "orbit-rescaled-*.svg").stat().st_size > 0


def test_missing_potential(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--chart", "rescaled", "--out", str(tmp_path))
    assert code == 2 and "model.potential" in err


def test_unknown_key_rejected(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"n": 1, "temperature": 3}}))
    code, _, err = run(capsys, "normal-form", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 2 and "model" in err and "temperature" in err


def test_bad_json_reports_line(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "seed": 1,\n  oops\n}')
    code, _, err = run(capsys, "normal-form", "--config", str(cfg))
    assert code == 2 and "line 3" in err


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"normal_form": {"a": "1", "b": "1"}}))
    _, out, _ = run(capsys, "normal-form", "--config", str(cfg), "--b", "0", "--out", str(tmp_path))
    rep = json.loads(out)
    assert (rep["a"], rep["b"]) == ("1", "0")


def test_nondegen(capsys, tmp_path):
    code, out, _ = run(capsys, "nondegen", "--n", "3", "--rho", "0,0.1,11", "--out", str(tmp_path))
    summary = json.loads(out)
    assert code == 0
    assert summary["rho0_exact"] == {"det_kolmogorov_full": "-1/12", "det_isoenergetic": "-1/12"}
    assert summary["rho_expansion"]["B_W"] == ["-1/12", "-13/6", "-5/4"]
    assert summary["degeneracy_locus"]["status"] == "OPEN"
    head, data = read_csv(only(tmp_path, "nondegen-scan-*.csv"))
    assert data[0, head.index("det_isoenergetic")] == pytest.approx(-1 / 12, abs=1e-14)
    assert data[0, head.index("det_B_Wperp")] == 1.0


def test_kam_scan_small_and_deterministic(capsys, tmp_path):
    args = ["kam-scan", "--betas", "0,0.001", "--grid", "2", "2", "--max-crossings", "200"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, *args, "--out", str(a))[0] == 0
    assert run(capsys, *args, "--out", str(b), "--no-figures")[0] == 0
    for f in sorted(a.glob("*.csv")):
        assert f.read_bytes() == (b / f.name).read_bytes()
    summary = json.loads(only(a, "kam-summary-*.json").read_text())
    assert summary["fractions"][0] == 1.0
    assert len(list(a.glob("section-*.png"))) == 2
    head = only(a, "classification-beta0-*.csv").read_text().splitlines()[0]
    assert head == "ic_index,verdict,rot_w,rot_thermo,gap,energy_drift"


def test_simulate_is_deterministic(capsys, tmp_path):
    args = ["simulate", "--chart", "nose", "--cosine", "0.5", "--t-end", "1", "--no-figures"]
    run(capsys, *args, "--out", str(tmp_path / "a"))
    run(capsys, *args, "--out", str(tmp_path / "b"))
    fa = only(tmp_path / "a", "*.csv")
    assert fa.read_bytes() == (tmp_path / "b" / fa.name).read_bytes()


def test_verify_mutation_fails(capsys, tmp_path):
    out_json = tmp_path / "v.json"
    code, out, _ = run(capsys, "verify", "--mutate", "alpha=1/1000", "--json", str(out_json))
    assert code == 1
    checks = {c["id"]: c["status"] for c in json.loads(out_json.read_text())["checks"]}
    assert checks["nf-scalars-constant-mass"] == "FAIL"
