"""Run configuration: YAML file, environment overrides, validation and profile construction.

Grammar (all sections optional except ``metric``)::

    metric:
      type: besse            # round | besse | perturbed | sampled
      m: 2
      n: 1
      h_coeffs: [0.1, -0.05] # besse: odd corrections c_j of h
      eps: 0.2               # perturbed: pole caps of width eps, cone orders (m, n)
      base: {type: round}    # perturbed: any metric block, default round
      bump: {center: 1.0, width: 0.4, amplitude: -0.1}  # perturbed: optional bump
      knots: [[0, 0], [0.5, 0.45], ...]                  # sampled: (s, r) pairs
    numerics:
      eta_grid_n: 401        # odd
      ode_rel_tol: 1.0e-10
      ode_abs_tol: 1.0e-12
      quad_rel_tol: 1.0e-10
      q_max: null            # default 2 (2 - alpha)
      length_cutoff: null    # default 3 (m+n) L
      time_cap_factor: 50
    output:
      out_dir: out
      emit_csv: true         # or a list drawn from CSV_KINDS
    seed: 0
    sweep:                   # used by the sweep subcommand
      param: metric.eps      # dotted path into this document
      values: [0.4, 0.2, 0.1]
    geodesic:                # used by the geodesic subcommand
      eta: -0.5
      t_max: 20.0
      n_samples: 2001

Any scalar key can be overridden from the environment as
``SPINDLE_<SECTION>__<KEY>`` (double underscore between levels), e.g.
``SPINDLE_NUMERICS__ETA_GRID_N=101``.  Values are parsed as YAML scalars.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigParse
from .pipeline import Numerics
from .profile import (BesseSpec, MetricProfile, OrbifoldSignature, SampledProfile, make_besse,
                      make_round, perturb_bump, perturb_poles)

ENV_PREFIX = "SPINDLE_"
CSV_KINDS = ("returns", "genfun", "critical", "geodesics", "tau", "ratios", "profile")
METRIC_TYPES = ("round", "besse", "perturbed", "sampled")
_SECTIONS = {"metric", "numerics", "output", "seed", "sweep", "geodesic"}


@dataclass
class RunConfig:
    metric: dict
    numerics: Numerics
    out_dir: Path = Path("out")
    emit_csv: tuple[str, ...] = CSV_KINDS
    seed: int = 0
    sweep: dict = field(default_factory=dict)
    geodesic: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def profile(self) -> MetricProfile:
        return build_profile(self.metric)


def apply_env(doc: dict, environ=None) -> dict:
    env = os.environ if environ is None else environ
    doc = copy.deepcopy(doc)
    for key in sorted(env):
        if not key.startswith(ENV_PREFIX):
            continue
        path = key[len(ENV_PREFIX):].lower().split("__")
        if path[0] not in _SECTIONS:
            continue
        try:
            value = yaml.safe_load(env[key])
        except yaml.YAMLError as exc:
            raise ConfigParse(f"{key}: {exc}") from exc
        set_path(doc, path, value)
    return doc


def set_path(doc: dict, path: list[str], value: Any) -> None:
    node = doc
    for part in path[:-1]:
        if not isinstance(node.get(part), dict):
            node[part] = {}
        node = node[part]
    node[path[-1]] = value


def _positive(name: str, v) -> float:
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise ConfigParse(f"numerics.{name} must be a number, got {v!r}") from None
    if not x > 0:
        raise ConfigParse(f"numerics.{name} must be positive, got {v!r}")
    return x


def parse_numerics(d: dict) -> Numerics:
    if not isinstance(d, dict):
        raise ConfigParse("numerics must be a mapping")
    known = set(Numerics.__dataclass_fields__) - {"jobs"}
    extra = set(d) - known
    if extra:
        raise ConfigParse(f"unknown numerics keys: {sorted(extra)}")
    num = Numerics()
    if "eta_grid_n" in d:
        n = d["eta_grid_n"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 17 or n % 2 == 0:
            raise ConfigParse(f"numerics.eta_grid_n must be an odd integer >= 17, got {n!r}")
        num.eta_grid_n = n
    for key in ("ode_rel_tol", "ode_abs_tol", "quad_rel_tol", "time_cap_factor"):
        if key in d:
            setattr(num, key, _positive(key, d[key]))
    if d.get("length_cutoff") is not None:
        num.length_cutoff = _positive("length_cutoff", d["length_cutoff"])
    if d.get("q_max") is not None:
        q = d["q_max"]
        if not isinstance(q, int) or isinstance(q, bool) or q < 1:
            raise ConfigParse(f"numerics.q_max must be a positive integer, got {q!r}")
        num.q_max = q
    return num


def validate_metric(d) -> dict:
    if not isinstance(d, dict):
        raise ConfigParse("metric must be a mapping")
    kind = d.get("type")
    if kind not in METRIC_TYPES:
        raise ConfigParse(f"metric.type must be one of {METRIC_TYPES}, got {kind!r}")
    for key in ("m", "n"):
        if key in d and (not isinstance(d[key], int) or isinstance(d[key], bool) or d[key] < 1):
            raise ConfigParse(f"metric.{key} must be a positive integer, got {d[key]!r}")
    if kind == "besse" and not all(isinstance(c, (int, float)) for c in d.get("h_coeffs", [])):
        raise ConfigParse("metric.h_coeffs must be a list of numbers")
    if kind == "perturbed":
        if "eps" not in d and "bump" not in d:
            raise ConfigParse("perturbed metric needs eps and/or bump")
        if "base" in d:
            validate_metric(d["base"])
        if "bump" in d and not {"center", "width", "amplitude"} <= set(d["bump"] or {}):
            raise ConfigParse("metric.bump needs center, width and amplitude")
    if kind == "sampled":
        knots = d.get("knots")
        if not isinstance(knots, list) or len(knots) < 4 or any(
                not isinstance(k, (list, tuple)) or len(k) != 2 for k in knots):
            raise ConfigParse("metric.knots must be a list of at least 4 (s, r) pairs")
    return d


def build_profile(d: dict) -> MetricProfile:
    validate_metric(d)
    kind = d["type"]
    if kind == "round":
        return make_round()
    if kind == "besse":
        sig = OrbifoldSignature(d.get("m", 1), d.get("n", 1))
        return make_besse(BesseSpec(sig, tuple(d.get("h_coeffs", []))))
    if kind == "sampled":
        return SampledProfile([tuple(map(float, k)) for k in d["knots"]], d.get("m", 1), d.get("n", 1))
    p = build_profile(d.get("base", {"type": "round"}))
    if "eps" in d:
        p = perturb_poles(p, float(d["eps"]), d.get("m"), d.get("n"))
    if "bump" in d:
        b = d["bump"]
        p = perturb_bump(p, float(b["center"]), float(b["width"]), float(b["amplitude"]))
    return p


def parse(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigParse("configuration must be a mapping")
    extra = set(doc) - _SECTIONS
    if extra:
        raise ConfigParse(f"unknown top-level keys: {sorted(extra)}")
    if "metric" not in doc:
        raise ConfigParse("missing metric section")
    metric = validate_metric(doc["metric"])
    num = parse_numerics(doc.get("numerics") or {})
    out = doc.get("output") or {}
    emit = out.get("emit_csv", True)
    if emit is True:
        emit = CSV_KINDS
    elif emit is False:
        emit = ()
    elif isinstance(emit, list) and set(emit) <= set(CSV_KINDS):
        emit = tuple(emit)
    else:
        raise ConfigParse(f"output.emit_csv must be a boolean or a subset of {CSV_KINDS}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigParse(f"seed must be an integer, got {seed!r}")
    return RunConfig(metric, num, Path(out.get("out_dir", "out")), emit, seed,
                     doc.get("sweep") or {}, doc.get("geodesic") or {}, doc)


def load(path: str | Path | None, environ=None) -> RunConfig:
    """Read ``path`` (or start from an empty document), apply env overrides, validate."""
    doc: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigParse(f"cannot read {path}: {exc}") from exc
        try:
            doc = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigParse(f"{path}: {exc}") from exc
    return parse(apply_env(doc, environ))
