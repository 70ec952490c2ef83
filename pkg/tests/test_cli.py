import csv
import math

import pytest

import spindle.pipeline
from spindle import checks, cli
from spindle.checks import CheckResult


def config(tmp_path, metric, extra=""):
    f = tmp_path / "run.yaml"
    f.write_text(f"metric: {metric}\nnumerics: {{eta_grid_n: 17}}\n{extra}")
    return f


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_analyze_besse(tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["analyze", "--config", str(config(tmp_path, "{type: besse, m: 2, n: 1}")),
                     "--out", str(out), "--jobs", "1"])
    assert code == cli.EXIT_OK
    assert "A: AtBound" in capsys.readouterr().out
    for name in ("report.txt", "returns.csv", "genfun.csv", "genfun_returns.csv", "critical.csv",
                 "geodesics.csv", "tau.csv", "ratios.csv", "profile.csv"):
        assert (out / name).exists(), name
    assert len(rows(out / "returns.csv")) == 18
    text = (out / "report.txt").read_text()
    assert "AtBound" in text


def test_analyze_deterministic(tmp_path):
    cfg = config(tmp_path, "{type: perturbed, base: {type: round}, bump: {center: 0.8, width: 0.4, amplitude: -0.1}}")
    outs = []
    for i, jobs in enumerate(("1", "2")):
        out = tmp_path / f"o{i}"
        assert cli.main(["analyze", "--config", str(cfg), "--out", str(out), "--jobs", jobs]) == 0
        outs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert outs[0] == outs[1]


def test_emit_subset(tmp_path):
    cfg = config(tmp_path, "{type: round}", "output: {emit_csv: [ratios]}\n")
    out = tmp_path / "out"
    assert cli.main(["analyze", "--config", str(cfg), "--out", str(out), "--jobs", "1"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["ratios.csv", "report.txt"]


def test_violation_exit_code(tmp_path, monkeypatch, capsys):
    real = spindle.pipeline.ratios

    def halved(p, area, *a, **k):
        return real(p, area / 2, *a, **k)

    monkeypatch.setattr(spindle.pipeline, "ratios", halved)
    code = cli.main(["analyze", "--config", str(config(tmp_path, "{type: round}")),
                     "--out", str(tmp_path / "out"), "--jobs", "1"])
    assert code == cli.EXIT_VIOLATION
    assert "Violation" in capsys.readouterr().out


def test_config_error_exit_code(tmp_path, capsys):
    f = tmp_path / "bad.yaml"
    f.write_text("metric: {type: round}\nnumerics: {eta_grid_n: 400}\n")
    assert cli.main(["analyze", "--config", str(f)]) == cli.EXIT_ERROR
    err = capsys.readouterr().err
    assert err.startswith("error: [cli]") and "eta_grid_n" in err


def test_numerical_error_exit_code(tmp_path, capsys):
    cfg = config(tmp_path, "{type: perturbed, eps: 0.3, m: 1, n: 1, base: {type: besse, m: 5, n: 5}}")
    assert cli.main(["analyze", "--config", str(cfg)]) == cli.EXIT_ERROR
    assert "error: [profile]" in capsys.readouterr().err


def test_missing_config(capsys):
    assert cli.main(["analyze"]) == cli.EXIT_ERROR


def test_bad_flags(tmp_path):
    cfg = str(config(tmp_path, "{type: round}"))
    assert cli.main(["analyze", "--config", cfg, "--jobs", "0"]) == cli.EXIT_ERROR
    assert cli.main(["analyze", "--config", cfg, "--cutoff", "-1"]) == cli.EXIT_ERROR
    assert cli.main(["analyze", "--config", cfg, "--qmax", "0"]) == cli.EXIT_ERROR


def test_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("SPINDLE_METRIC__N", "3")
    out = tmp_path / "out"
    cfg = config(tmp_path, "{type: besse, m: 2, n: 1}")
    assert cli.main(["besse-gen", "--config", str(cfg), "--out", str(out), "--n-samples", "11"]) == 0
    r = rows(out / "profile.csv")
    assert r[0] == ["s", "r", "dr"] and len(r) == 12
    # M = (m + n) pi / 2 for h = (m - n)/2 v
    assert float(r[-1][0]) == pytest.approx(2.5 * math.pi, rel=1e-12)
    assert float(r[1][2]) == pytest.approx(0.5, abs=1e-12)


def test_besse_gen_rejects_other_metrics(tmp_path):
    assert cli.main(["besse-gen", "--config", str(config(tmp_path, "{type: round}"))]) == cli.EXIT_ERROR


def test_geodesic(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = config(tmp_path, "{type: round}")
    assert cli.main(["geodesic", "--config", str(cfg), "--out", str(out), "--eta", "-0.5",
                     "--t-max", "6.283185307179586", "--n-samples", "101"]) == 0
    r = rows(out / "geodesic.csv")
    assert r[0] == ["t", "theta", "beta", "s", "K"] and len(r) == 102
    K = [float(x[4]) for x in r[1:]]
    assert max(K) - min(K) < 1e-10 and K[0] == pytest.approx(0.5)
    assert float(r[-1][1]) == pytest.approx(2 * math.pi, abs=1e-9)
    assert "Clairaut drift" in capsys.readouterr().out


def test_geodesic_bad_eta(tmp_path):
    cfg = config(tmp_path, "{type: round}")
    assert cli.main(["geodesic", "--config", str(cfg), "--eta", "2"]) == cli.EXIT_ERROR


def test_sweep(tmp_path):
    out = tmp_path / "out"
    cfg = config(tmp_path, "{type: perturbed, m: 2, n: 3, eps: 0.3}")
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out), "--param", "metric.eps",
                     "--values", "0.4,0.2", "--jobs", "2"]) == 0
    r = rows(out / "sweep.csv")
    assert r[0] == cli.SWEEP_COLUMNS and len(r) == 3
    assert [float(x[0]) for x in r[1:]] == [0.4, 0.2]
    assert all(x[-1] == "1" for x in r[1:])
    # rho_contr below 2 pi (m+n) for a non-Besse orbifold metric
    assert all(float(x[3]) < 10 * math.pi for x in r[1:])


def test_sweep_from_config(tmp_path):
    out = tmp_path / "out"
    cfg = config(tmp_path, "{type: perturbed, m: 2, n: 1, eps: 0.3}",
                 "sweep: {param: metric.eps, values: [0.3]}\n")
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out), "--jobs", "1"]) == 0
    assert len(rows(out / "sweep.csv")) == 2


@pytest.mark.parametrize("extra", [["--param", "numerics.q_max", "--values", "1"],
                                   ["--param", "metric.eps", "--values", "a,b"],
                                   ["--param", "metric.eps"]])
def test_sweep_errors(tmp_path, extra):
    cfg = config(tmp_path, "{type: perturbed, m: 2, n: 3, eps: 0.3}")
    assert cli.main(["sweep", "--config", str(cfg), "--jobs", "1"] + extra) == cli.EXIT_ERROR


def test_verify_dispatch(monkeypatch, capsys):
    seen = {}

    def fake(battery, n_orbits):
        seen["n"] = n_orbits
        return [CheckResult(1, "ok", True, 0.0, 1.0, ""), CheckResult(2, "bad", False, 2.0, 1.0, "")]

    monkeypatch.setattr(checks, "run_all", fake)
    assert cli.main(["verify", "--orbits", "3"]) == cli.EXIT_VIOLATION
    out = capsys.readouterr().out
    assert seen["n"] == 3
    assert "[PASS] 1. ok" in out and "[FAIL] 2. bad" in out and "1/2 checks passed" in out
