"""Experiment configuration: TOML/JSON parsing, validation, defaults.

A config names one experiment kind, a manifold (or a suite of them), the
geometric and numeric parameters of that kind, and an optional assertion
block checked by the runner.  Unknown manifolds, missing required fields and
invalid values raise ConfigError with distinct codes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from .errors import ConfigError
from .manifolds import (
    ModelManifold,
    cusp_surface,
    euclidean,
    flat_torus,
    hyperbolic,
    sphere,
    warped_product_2d,
    cusp_warp,
)

__all__ = ["ExperimentConfig", "load_config", "manifold_from_spec",
           "KNOWN_KINDS", "MANIFOLD_KINDS"]

KNOWN_KINDS = (
    "theorem1",
    "estimate1d",
    "euclidean",
    "scaling",
    "morrey",
    "interior",
    "harmonic_radius",
    "lifting",
    "divergence",
    "convergence",
)

MANIFOLD_KINDS = {
    "euclidean": "euclidean(dim)",
    "sphere": "sphere(dim, radius)",
    "hyperbolic": "hyperbolic(dim, scale)",
    "flat_torus": "flat_torus(periods)",
    "warped2d": "warped2d(warp name, t_max); warp 'cusp' available",
}

_DEFAULT_EPSILON = 1e-6
_DEFAULT_SEED = 0


def manifold_from_spec(spec: dict) -> ModelManifold:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("manifold spec must be a table with a 'kind'", code="missing-field")
    kind = str(spec["kind"]).lower()
    try:
        if kind == "euclidean":
            return euclidean(int(spec.get("dim", 2)))
        if kind == "sphere":
            return sphere(int(spec.get("dim", 2)), float(spec.get("radius", 1.0)))
        if kind == "hyperbolic":
            return hyperbolic(int(spec.get("dim", 2)), float(spec.get("scale", 1.0)))
        if kind == "flat_torus":
            return flat_torus([float(L) for L in spec.get("periods", [1.0, 1.0])])
        if kind == "warped2d":
            warp_name = str(spec.get("warp", "cusp")).lower()
            if warp_name != "cusp":
                raise ConfigError(f"unknown warp {warp_name!r}", code="unknown-manifold")
            t_max = float(spec.get("t_max", 130.0))
            return warped_product_2d(cusp_warp(), (0.0, t_max))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid manifold parameters: {exc}", code="invalid-value")
    raise ConfigError(f"unknown manifold kind {spec['kind']!r}", code="unknown-manifold")


@dataclass
class ExperimentConfig:
    kind: str
    manifold: dict = field(default_factory=dict)
    suite: list = field(default_factory=list)   # optional [(manifold spec, params), ...]
    params: dict = field(default_factory=dict)
    assertions: dict = field(default_factory=dict)
    seed: int = _DEFAULT_SEED
    out: str = ""
    source: str = ""

    def echo(self) -> dict:
        return {
            "kind": self.kind,
            "manifold": dict(self.manifold),
            "suite": [dict(s) for s in self.suite],
            "params": dict(self.params),
            "assertions": {k: dict(v) if isinstance(v, dict) else v
                           for k, v in self.assertions.items()},
            "seed": self.seed,
        }

    # -- validation ---------------------------------------------------------

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KNOWN_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}", code="invalid-value")
        p = self.params
        eps = p.get("epsilon", _DEFAULT_EPSILON)
        if not (isinstance(eps, (int, float)) and eps > 0):
            raise ConfigError("epsilon must be > 0", code="invalid-value")
        p.setdefault("epsilon", float(eps))
        if self.kind in ("theorem1", "scaling", "convergence"):
            self._require_manifolds()
            R0 = self._positive("R0", default=1.0)
            p.setdefault("h", R0 / 64.0)
            if p["h"] <= 0:
                raise ConfigError("h must be > 0", code="invalid-value")
        if self.kind == "scaling":
            lams = p.get("lam", [0.5, 2.0])
            lams = [lams] if isinstance(lams, (int, float)) else list(lams)
            if any(not 0.25 <= float(l) <= 4.0 for l in lams):
                raise ConfigError("lam values must lie in [0.25, 4]", code="invalid-value")
            p["lam"] = [float(l) for l in lams]
        if self.kind == "estimate1d":
            self._positive("n_cases", default=1000)
            self._positive("n_samples", default=10 ** 4)
        if self.kind == "euclidean":
            self._positive("R0", default=1.0)
            p.setdefault("dim", 2)
        if self.kind == "morrey":
            pval = self._positive("p", default=3.0)
            if pval <= p.get("dim", 2):
                raise ConfigError("morrey needs p > dim", code="invalid-value")
            self._positive("R", default=1.0)
        if self.kind == "interior":
            self._positive("q", default=3.0)
        if self.kind == "harmonic_radius":
            self._require_manifolds()
            self._positive("p", default=3.0)
            q = self._positive("Q", default=4.0)
            if q <= 1.0:
                raise ConfigError("Q must exceed 1", code="invalid-value")
            self._positive("r_max", default=1.0)
        if self.kind == "lifting":
            self._require_manifolds()
            self._positive("R", default=1.0)
        if self.kind == "divergence":
            self._require_manifolds()
            radii = p.get("radii")
            if not radii or len(radii) < 4:
                raise ConfigError("divergence needs >= 4 radii", code="missing-field")
            p["radii"] = [float(r) for r in radii]
            self._positive("h", default=min(p["radii"]) / 256.0)
            p.setdefault("u", "bounded_decay")
        if self.kind == "convergence":
            levels = p.get("levels", [16, 32, 64])
            p["levels"] = [int(v) for v in levels]
        if self.kind in ("theorem1", "scaling"):
            psis = p.get("psi", ["x1"])
            p["psi"] = [psis] if isinstance(psis, str) else [str(s) for s in psis]
        return self

    def _require_manifolds(self):
        if not self.suite and not self.manifold:
            raise ConfigError(f"kind {self.kind!r} needs a [manifold] table or [[suite]]",
                              code="missing-field")
        if self.manifold:
            manifold_from_spec(self.manifold)
        for entry in self.suite:
            manifold_from_spec(entry.get("manifold", {}))

    def _positive(self, key: str, default=None):
        p = self.params
        if key not in p:
            if default is None:
                raise ConfigError(f"missing required parameter {key!r}", code="missing-field")
            p[key] = default
        val = p[key]
        if not isinstance(val, (int, float)) or val <= 0:
            raise ConfigError(f"parameter {key!r} must be a positive number",
                              code="invalid-value")
        p[key] = float(val)
        return p[key]


def load_config(path) -> ExperimentConfig:
    """Parse and validate a TOML or JSON experiment config."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist", code="parse")
    text = path.read_text()
    data = None
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"JSON parse error at line {exc.lineno}: {exc.msg}",
                              code="parse")
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"TOML parse error: {exc}", code="parse")
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError("config must define an experiment 'kind'", code="missing-field")
    cfg = ExperimentConfig(
        kind=str(data.get("kind")),
        manifold=dict(data.get("manifold", {})),
        suite=[dict(s) for s in data.get("suite", [])],
        params=dict(data.get("params", {})),
        assertions=dict(data.get("assertions", {})),
        seed=int(data.get("seed", _DEFAULT_SEED)),
        out=str(data.get("out", "")),
        source=str(path),
    )
    return cfg.validate()
