import math
from pathlib import Path

import pytest

from spindle.config import CSV_KINDS, apply_env, build_profile, load, parse
from spindle.errors import ConfigParse, MonotonicityViolation
from spindle.profile import BesseProfile, PolePerturbedProfile, SampledProfile


def write(tmp_path, text):
    f = tmp_path / "run.yaml"
    f.write_text(text)
    return f


def test_minimal(tmp_path):
    cfg = load(write(tmp_path, "metric: {type: round}\n"), environ={})
    assert cfg.numerics.eta_grid_n == 401
    assert cfg.emit_csv == CSV_KINDS
    assert cfg.out_dir == Path("out")
    assert cfg.profile().M == math.pi


def test_full_document(tmp_path):
    text = """
metric:
  type: perturbed
  m: 2
  n: 3
  eps: 0.2
  base: {type: besse, m: 1, n: 1, h_coeffs: [0.1]}
numerics:
  eta_grid_n: 101
  q_max: 3
  length_cutoff: 40.0
output:
  out_dir: results
  emit_csv: [genfun, ratios]
seed: 7
sweep: {param: metric.eps, values: [0.3, 0.2]}
geodesic: {eta: -0.25, t_max: 12.0}
"""
    cfg = load(write(tmp_path, text), environ={})
    p = cfg.profile()
    assert isinstance(p, PolePerturbedProfile)
    assert p.signature.order == 5
    assert cfg.numerics.q_max == 3 and cfg.numerics.length_cutoff == 40.0
    assert cfg.emit_csv == ("genfun", "ratios")
    assert cfg.seed == 7 and cfg.out_dir == Path("results")
    assert cfg.sweep["values"] == [0.3, 0.2]
    assert cfg.geodesic["eta"] == -0.25


def test_env_override(tmp_path):
    f = write(tmp_path, "metric: {type: besse, m: 2, n: 1}\nnumerics: {eta_grid_n: 101}\n")
    cfg = load(f, environ={"SPINDLE_NUMERICS__ETA_GRID_N": "33", "SPINDLE_METRIC__N": "3",
                           "SPINDLE_UNRELATED": "x", "OTHER": "1"})
    assert cfg.numerics.eta_grid_n == 33
    assert cfg.profile().signature.n == 3


def test_env_nested():
    doc = apply_env({"metric": {"type": "perturbed"}},
                    {"SPINDLE_METRIC__BUMP__CENTER": "1.0", "SPINDLE_METRIC__BUMP__WIDTH": "0.4",
                     "SPINDLE_METRIC__BUMP__AMPLITUDE": "-0.1"})
    assert doc["metric"]["bump"] == {"center": 1.0, "width": 0.4, "amplitude": -0.1}
    assert build_profile(doc["metric"]).reference_equator.s == pytest.approx(math.pi / 2, abs=1e-9)


def test_besse_and_sampled():
    assert isinstance(build_profile({"type": "besse", "m": 2, "n": 3, "h_coeffs": [0.3]}), BesseProfile)
    knots = [[0, 0], [0.5, 0.4], [1.0, 0.7], [1.5, 0.8], [2.0, 0.6], [2.6, 0]]
    p = build_profile({"type": "sampled", "m": 2, "n": 3, "knots": knots})
    assert isinstance(p, SampledProfile) and p.M == 2.6


@pytest.mark.parametrize("doc", [
    {},
    {"metric": {"type": "ellipsoid"}},
    {"metric": {"type": "round"}, "extra": 1},
    {"metric": {"type": "besse", "m": 0}},
    {"metric": {"type": "besse", "m": 1.5}},
    {"metric": {"type": "besse", "h_coeffs": ["a"]}},
    {"metric": {"type": "perturbed"}},
    {"metric": {"type": "perturbed", "bump": {"center": 1.0}}},
    {"metric": {"type": "sampled", "knots": [[0, 0], [1, 0]]}},
    {"metric": {"type": "round"}, "numerics": {"eta_grid_n": 400}},
    {"metric": {"type": "round"}, "numerics": {"eta_grid_n": 15}},
    {"metric": {"type": "round"}, "numerics": {"ode_rel_tol": -1}},
    {"metric": {"type": "round"}, "numerics": {"q_max": 0}},
    {"metric": {"type": "round"}, "numerics": {"jobs": 4}},
    {"metric": {"type": "round"}, "output": {"emit_csv": ["pictures"]}},
    {"metric": {"type": "round"}, "seed": "zero"},
])
def test_rejected(doc):
    with pytest.raises(ConfigParse):
        parse(doc)


def test_bad_yaml(tmp_path):
    with pytest.raises(ConfigParse):
        load(write(tmp_path, "metric: [unclosed\n"), environ={})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigParse):
        load(tmp_path / "nope.yaml", environ={})


def test_profile_errors_surface():
    cfg = parse({"metric": {"type": "perturbed", "eps": 0.3, "m": 1, "n": 1,
                            "base": {"type": "besse", "m": 5, "n": 5}}})
    with pytest.raises(MonotonicityViolation):
        cfg.profile()
