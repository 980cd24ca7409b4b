"""JSON experiment descriptions.

A config is one JSON object::

    {
      "sources": [{"family": "fock", "n": 115}, {"family": "fock", "n": 115}],
      "detectors": {"paper_pair": {"R": 0.867, "split": 0.6, "dtheta_over_pi": 0.9}},
      "backend": "Auto",
      "conditioning": {"detector_index": 1, "count": 118},
      "scaling": {"q": 0.5, "keep_M": 2},
      "quadrature": {"phase_nodes": 256, "radial_nodes": 48},
      "tail_tolerance": 1e-10,
      "budget": 10000000,
      "min_mass": 0.01,
      "output": {"directory": "out", "prefix": ""},
      "sweep": {"parameter": "Q", "values": [0.01, 0.1, 0.3, 1.0]}
    }

``detectors`` is either the ``paper_pair`` shorthand or a list of
``{"r_aa", "r_bb", "r_ab_modulus", "theta", "label"}`` objects, where a
missing ``r_ab_modulus`` (or ``"rank_one": true``) means maximal
interference.  Only ``sources`` and ``detectors`` are required.  Source
objects carry ``family`` plus that family's parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .detectors import DetectorArray, DetectorMatrix, paper_pair, validate_array
from .errors import ConfigError, ParameterError
from .kernel.mixture import BackendChoice, _choice
from .kernel.network import DEFAULT_BUDGET
from .number_stats import DEFAULT_TAIL_TOLERANCE, NumberDistribution, make_distribution

DEFAULT_PHASE_NODES = 256
DEFAULT_RADIAL_NODES = 48
DEFAULT_MIN_MASS = 0.01
SWEEP_PARAMETERS = ("Q", "q", "R", "dtheta_over_pi", "n1")

_TOP_KEYS = {
    "sources", "detectors", "backend", "conditioning", "scaling", "quadrature",
    "tail_tolerance", "budget", "min_mass", "output", "sweep", "threads",
}


@dataclass(frozen=True)
class Conditioning:
    detector_index: int
    count: int


@dataclass(frozen=True)
class Scaling:
    q: float
    keep_M: int | None = None


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class ExperimentConfig:
    sources: tuple[dict, dict]
    detectors: Any
    backend: BackendChoice = BackendChoice.AUTO
    conditioning: Conditioning | None = None
    scaling: Scaling | None = None
    phase_nodes: int = DEFAULT_PHASE_NODES
    radial_nodes: int = DEFAULT_RADIAL_NODES
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    budget: int = DEFAULT_BUDGET
    min_mass: float = DEFAULT_MIN_MASS
    threads: int = 1
    output_directory: str | None = None
    output_prefix: str = ""
    sweep: Sweep | None = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def build_sources(self) -> tuple[NumberDistribution, NumberDistribution]:
        return tuple(_build_source(s, f"sources[{i}]", self.tail_tolerance) for i, s in enumerate(self.sources))

    def build_array(self) -> DetectorArray:
        """Validated detector array; physics errors propagate unchanged."""
        d = self.detectors
        if isinstance(d, dict):
            pp = d["paper_pair"]
            return paper_pair(pp["R"], pp.get("split", 0.6), math.pi * pp.get("dtheta_over_pi", 0.9), pp.get("theta1", 0.0))
        return validate_array([
            DetectorMatrix.rank_one(x["r_aa"], x["r_bb"], x.get("theta", 0.0), x.get("label", str(i + 1)))
            if x.get("r_ab_modulus") is None or x.get("rank_one", False)
            else DetectorMatrix.from_polar(x["r_aa"], x["r_bb"], x["r_ab_modulus"], x.get("theta", 0.0), x.get("label", str(i + 1)))
            for i, x in enumerate(d)
        ])

    def kernel_options(self) -> dict:
        return {
            "backend": self.backend,
            "budget": self.budget,
            "phase_nodes": self.phase_nodes,
            "radial_nodes": self.radial_nodes,
            "tail_tolerance": self.tail_tolerance,
        }

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _build_source(spec: dict, where: str, tol: float) -> NumberDistribution:
    params = {k: v for k, v in spec.items() if k != "family"}
    try:
        return make_distribution(spec["family"], tail_tolerance=tol, **params)
    except ParameterError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _expect(cond, where, msg):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def _number(obj, key, where, kind=float, default=None, lo=None, hi=None, required=False):
    if key not in obj or obj[key] is None:
        _expect(not required, f"{where}.{key}", "required field missing")
        return default
    v = obj[key]
    ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    if kind is int:
        ok = ok and float(v).is_integer()
    _expect(ok and math.isfinite(v), f"{where}.{key}", f"expected {'an integer' if kind is int else 'a number'}, got {v!r}")
    v = kind(v)
    _expect(lo is None or v >= lo, f"{where}.{key}", f"must be >= {lo}, got {v}")
    _expect(hi is None or v <= hi, f"{where}.{key}", f"must be <= {hi}, got {v}")
    return v


def _parse_detectors(d):
    if isinstance(d, dict):
        _expect(set(d) == {"paper_pair"}, "detectors", "object form must be {\"paper_pair\": {...}}")
        pp = d["paper_pair"]
        _expect(isinstance(pp, dict), "detectors.paper_pair", "expected an object")
        unknown = set(pp) - {"R", "split", "dtheta_over_pi", "theta1"}
        _expect(not unknown, "detectors.paper_pair", f"unknown keys {sorted(unknown)}")
        _number(pp, "R", "detectors.paper_pair", lo=0.0, required=True)
        _number(pp, "split", "detectors.paper_pair", lo=0.0, hi=1.0)
        _number(pp, "dtheta_over_pi", "detectors.paper_pair")
        _number(pp, "theta1", "detectors.paper_pair")
        return d
    _expect(isinstance(d, list) and d, "detectors", "expected a nonempty list or the paper_pair shorthand")
    for i, x in enumerate(d):
        where = f"detectors[{i}]"
        _expect(isinstance(x, dict), where, "expected an object")
        unknown = set(x) - {"r_aa", "r_bb", "r_ab_modulus", "theta", "label", "rank_one"}
        _expect(not unknown, where, f"unknown keys {sorted(unknown)}")
        _number(x, "r_aa", where, lo=0.0, required=True)
        _number(x, "r_bb", where, lo=0.0, required=True)
        _number(x, "r_ab_modulus", where, lo=0.0)
        _number(x, "theta", where)
    return d


def parse_config(doc: dict, base_dir: str | Path | None = None) -> ExperimentConfig:
    """Validate a decoded JSON document; errors name the offending field."""
    _expect(isinstance(doc, dict), "<root>", "expected a JSON object")
    unknown = set(doc) - _TOP_KEYS
    _expect(not unknown, "<root>", f"unknown keys {sorted(unknown)}")
    _expect("sources" in doc, "sources", "required field missing")
    _expect("detectors" in doc, "detectors", "required field missing")
    src = doc["sources"]
    _expect(isinstance(src, list) and len(src) == 2, "sources", "expected a list of two source objects")
    for i, s in enumerate(src):
        _expect(isinstance(s, dict) and isinstance(s.get("family"), str), f"sources[{i}]", "expected an object with a \"family\" string")
    detectors = _parse_detectors(doc["detectors"])
    kw: dict[str, Any] = {"sources": (dict(src[0]), dict(src[1])), "detectors": detectors, "raw": doc}
    if "backend" in doc:
        try:
            kw["backend"] = _choice(doc["backend"])
        except ParameterError as exc:
            raise ConfigError(f"backend: {exc}") from None
    if doc.get("conditioning") is not None:
        c = doc["conditioning"]
        _expect(isinstance(c, dict), "conditioning", "expected an object")
        kw["conditioning"] = Conditioning(
            _number(c, "detector_index", "conditioning", int, lo=1, required=True),
            _number(c, "count", "conditioning", int, lo=0, required=True),
        )
    if doc.get("scaling") is not None:
        s = doc["scaling"]
        _expect(isinstance(s, dict), "scaling", "expected an object")
        kw["scaling"] = Scaling(
            _number(s, "q", "scaling", lo=0.0, hi=1.0, required=True),
            _number(s, "keep_M", "scaling", int, lo=1),
        )
        _expect(kw["scaling"].q > 0, "scaling.q", "must be positive")
    if doc.get("quadrature") is not None:
        qd = doc["quadrature"]
        _expect(isinstance(qd, dict), "quadrature", "expected an object")
        kw["phase_nodes"] = _number(qd, "phase_nodes", "quadrature", int, DEFAULT_PHASE_NODES, lo=1)
        kw["radial_nodes"] = _number(qd, "radial_nodes", "quadrature", int, DEFAULT_RADIAL_NODES, lo=1)
    kw["tail_tolerance"] = _number(doc, "tail_tolerance", "<root>", float, DEFAULT_TAIL_TOLERANCE, lo=0.0, hi=1e-3)
    kw["budget"] = _number(doc, "budget", "<root>", int, DEFAULT_BUDGET, lo=1)
    kw["min_mass"] = _number(doc, "min_mass", "<root>", float, DEFAULT_MIN_MASS, lo=0.0, hi=0.5)
    kw["threads"] = _number(doc, "threads", "<root>", int, 1, lo=1)
    if doc.get("output") is not None:
        o = doc["output"]
        _expect(isinstance(o, dict), "output", "expected an object")
        if o.get("directory") is not None:
            d = Path(o["directory"])
            if base_dir is not None and not d.is_absolute():
                d = Path(base_dir) / d
            kw["output_directory"] = str(d)
        kw["output_prefix"] = str(o.get("prefix", ""))
    if doc.get("sweep") is not None:
        sw = doc["sweep"]
        _expect(isinstance(sw, dict), "sweep", "expected an object")
        _expect(sw.get("parameter") in SWEEP_PARAMETERS, "sweep.parameter", f"expected one of {list(SWEEP_PARAMETERS)}")
        vals = sw.get("values")
        _expect(isinstance(vals, list) and vals, "sweep.values", "expected a nonempty list of numbers")
        for i, v in enumerate(vals):
            _expect(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v),
                    f"sweep.values[{i}]", f"expected a number, got {v!r}")
        kw["sweep"] = Sweep(sw["parameter"], tuple(float(v) for v in vals))
    cfg = ExperimentConfig(**kw)
    # surface bad family parameters now, with their field address
    cfg.build_sources()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return parse_config(doc, path.parent)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
