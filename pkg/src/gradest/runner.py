"""Config-driven experiment runner: builds jobs, executes them (optionally in
a process pool), aggregates, evaluates the assertion block, and writes the
machine-readable report plus CSV tables.

The JSON report (schema version 1) contains only reproducible content: the
config echo, per-job results sorted by job id, aggregates recomputable from
them, and assertion outcomes.  Wall-clock and solver statistics go to a
separate run_stats.json so that fixed-seed reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, manifold_from_spec
from .errors import ConfigError, GradestError

__all__ = ["RunReport", "run", "execute_job", "build_jobs", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Job construction


def _entries(cfg: ExperimentConfig):
    """(manifold spec, per-entry params) pairs from suite or single manifold."""
    if cfg.suite:
        return [(e["manifold"], {k: v for k, v in e.items() if k != "manifold"})
                for e in cfg.suite]
    return [(cfg.manifold, {})]


def build_jobs(cfg: ExperimentConfig):
    p = cfg.params
    jobs = []

    def add(kind, **payload):
        jobs.append({"id": f"{kind}-{len(jobs):03d}", "kind": kind,
                     "seed": cfg.seed, **payload})

    if cfg.kind == "theorem1":
        for spec, extra in _entries(cfg):
            for psi in extra.get("psi", p["psi"]):
                add("theorem1_check", manifold=spec, psi=psi, R0=p["R0"],
                    epsilon=p["epsilon"], h=extra.get("h", p["h"]))
    elif cfg.kind == "scaling":
        for spec, extra in _entries(cfg):
            for psi in extra.get("psi", p["psi"]):
                for lam in p["lam"]:
                    add("scaling_pair", manifold=spec, psi=psi, R0=p["R0"],
                        epsilon=p["epsilon"], h=p["h"], lam=lam)
    elif cfg.kind == "estimate1d":
        add("estimate1d_corpus", n_cases=int(p["n_cases"]),
            n_samples=int(p["n_samples"]))
    elif cfg.kind == "euclidean":
        for psi in p.get("psi", ["x1"]):
            add("euclidean_check", psi=psi, R0=p["R0"], dim=int(p.get("dim", 2)),
                h=p.get("h", p["R0"] / 64.0))
    elif cfg.kind == "morrey":
        for name in p.get("fields", ["x1", "quadratic"]):
            add("morrey_ratio", psi=name, p_exp=p["p"], R=p["R"],
                dim=int(p.get("dim", 2)), h=p.get("h", p["R"] / 16.0))
    elif cfg.kind == "interior":
        for name in p.get("fields", ["quadratic"]):
            add("interior_ratio", psi=name, q=p["q"], dim=int(p.get("dim", 2)),
                h=p.get("h", 1.0 / 24.0))
    elif cfg.kind == "harmonic_radius":
        for spec, extra in _entries(cfg):
            add("harmonic_radius", manifold=spec, p_exp=p["p"], Q=p["Q"],
                r_max=extra.get("r_max", p["r_max"]), C=p.get("C"))
    elif cfg.kind == "lifting":
        for spec, extra in _entries(cfg):
            add("lifting_check", manifold=spec, R=extra.get("R", p["R"]),
                epsilon=p["epsilon"])
    elif cfg.kind == "divergence":
        for spec, extra in _entries(cfg):
            add("divergence_suite", manifold=spec, u=extra.get("u", p.get("u")),
                radii=extra.get("radii", p["radii"]), h=extra.get("h", p["h"]),
                tolerance=p.get("tolerance", 1e-3))
    elif cfg.kind == "convergence":
        for spec, extra in _entries(cfg):
            for psi in extra.get("psi", p.get("psi", ["quadratic"])):
                add("convergence_study", manifold=spec, psi=psi, R0=p["R0"],
                    levels=p.get("levels", [16, 32, 64]),
                    radius_fraction=extra.get("radius_fraction",
                                              p.get("radius_fraction", 1.0)))
    else:
        raise ConfigError(f"unknown experiment kind {cfg.kind!r}", code="invalid-value")
    return jobs


# ---------------------------------------------------------------------------
# Job execution (top level, picklable)


def _resolve_field(name: str, M):
    from . import funcs

    if name == "bounded_decay":
        return funcs.WarpedRadialFunction(
            u=lambda t: 1.0 / (1.0 + t * t),
            du=lambda t: -2.0 * t / (1.0 + t * t) ** 2,
            d2u=lambda t: (6.0 * t * t - 2.0) / (1.0 + t * t) ** 3,
            name="bounded_decay")
    if name == "potential":
        return funcs.mollified_potential_2d()
    return funcs.field_family(name, M)


def execute_job(job: dict) -> dict:
    from . import divergence, estimates, funcs, harmonic, lifting
    from .grids import build_ball_grid
    from .poisson import manufactured_problem, solve_dirichlet

    kind = job["kind"]
    t0 = time.perf_counter()
    out = {"id": job["id"], "kind": kind}
    stats = {}

    if kind == "theorem1_check":
        M = manifold_from_spec(job["manifold"])
        psi = _resolve_field(job["psi"], M)
        rep = estimates.gradient_estimate_report(
            M, np.zeros(M.dim), job["R0"], psi, job["epsilon"], job["h"])
        out["result"] = rep.to_dict()
        out["c_emp"] = rep.c_emp
    elif kind == "scaling_pair":
        M = manifold_from_spec(job["manifold"])
        psi = _resolve_field(job["psi"], M)
        pair = estimates.scaling_invariance(
            M, np.zeros(M.dim), job["R0"], psi, job["lam"], job["epsilon"], job["h"])
        rel = abs(pair.c_emp - pair.c_emp_scaled) / max(abs(pair.c_emp), 1e-300)
        out["result"] = pair.to_dict()
        out["rel_deviation"] = rel
    elif kind == "estimate1d_corpus":
        corpus = funcs.random_1d_corpus(job["n_cases"], seed=job["seed"])
        ratios = [estimates.interval_gradient_bound(u, a, r, job["n_samples"])[2]
                  for (u, a, r) in corpus]
        slack = 1.0 + 10.0 / job["n_samples"]
        out["result"] = {
            "n_cases": job["n_cases"],
            "n_samples": job["n_samples"],
            "max_ratio": max(ratios),
            "mean_ratio": float(np.mean(ratios)),
            "violations": int(sum(r > slack for r in ratios)),
        }
    elif kind == "euclidean_check":
        m = job["dim"]
        psi = _resolve_field(job["psi"], manifold_from_spec({"kind": "euclidean", "dim": m}))
        rep = estimates.euclidean_gradient_report(psi, np.zeros(m), job["R0"], job["h"])
        out["result"] = rep.to_dict()
        out["c_emp"] = rep.c_emp
    elif kind == "morrey_ratio":
        M = manifold_from_spec({"kind": "euclidean", "dim": job["dim"]})
        psi = _resolve_field(job["psi"], M)
        semi, K, ratio = estimates.morrey_ratio(psi, job["p_exp"], job["R"],
                                                h=job["h"], dim=job["dim"])
        out["result"] = {"seminorm": semi, "K": K, "ratio": ratio}
    elif kind == "interior_ratio":
        M = manifold_from_spec({"kind": "euclidean", "dim": job["dim"]})
        psi = _resolve_field(job["psi"], M)
        ratio = estimates.interior_estimate_ratio(
            np.eye(job["dim"]), 0.0, psi, job["q"], job["h"], dim=job["dim"])
        out["result"] = {"ratio": ratio}
    elif kind == "harmonic_radius":
        M = manifold_from_spec(job["manifold"])
        x = np.zeros(M.dim)
        res = harmonic.build_harmonic_coords(M, x, min(job["r_max"], 0.9 *
                                             M.inj_radius_at(x)) if
                                             math.isfinite(M.inj_radius_at(x)) else job["r_max"])
        r_est = harmonic.estimate_harmonic_radius(M, x, job["p_exp"], job["Q"],
                                                  job["r_max"])
        result = {"radius_estimate": r_est, "residual_sup": res.residual_sup}
        if job.get("C"):
            result["ac_ratio"] = harmonic.anderson_cheeger_ratio(
                M, x, job["p_exp"], job["Q"], job["C"])
        out["result"] = result
    elif kind == "lifting_check":
        M = manifold_from_spec(job["manifold"])
        pm = lifting.build_pullback(M, np.zeros(M.dim), job["R"], epsilon=job["epsilon"])
        g0 = pm.chart.g(np.zeros(M.dim))
        out["result"] = {
            "origin_identity_dev": float(np.max(np.abs(g0 - np.eye(M.dim)))),
            "radial_deviation": lifting.verify_radial_distance(pm),
            "isometry_mismatch": lifting.verify_local_isometry(pm),
            "min_jacobi_det": lifting.conjugate_point_scan(pm),
        }
    elif kind == "divergence_suite":
        M = manifold_from_spec(job["manifold"])
        u = _resolve_field(job["u"], M)
        verdict = divergence.corollary_suite(M, u, np.zeros(M.dim), job["radii"],
                                             job["h"], job["tolerance"])
        out["result"] = verdict.to_dict()
        out["verdict"] = [verdict.hypotheses_hold, verdict.conclusion_holds]
    elif kind == "convergence_study":
        M = manifold_from_spec(job["manifold"])
        psi = _resolve_field(job["psi"], M)
        R0 = job["R0"]
        radius = R0 * job.get("radius_fraction", 1.0)
        errs = []
        for n in job["levels"]:
            grid = build_ball_grid(M, np.zeros(M.dim), radius, R0 / n)
            f, bvals, ref = manufactured_problem(M, psi, grid)
            sol = solve_dirichlet(grid, f, bvals)
            errs.append(float(np.max(np.abs(sol.values - ref.values))))
            stats[f"solver_n{n}"] = sol.solve_info
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)
                  if errs[i + 1] > 0]
        out["result"] = {"levels": list(job["levels"]), "sup_errors": errs,
                         "orders": orders,
                         "min_order": min(orders) if orders else math.inf}
    else:
        raise ConfigError(f"unknown job kind {kind!r}", code="invalid-value")

    stats["wall_seconds"] = time.perf_counter() - t0
    out["_stats"] = stats
    return out


# ---------------------------------------------------------------------------
# Aggregation, assertions, report


def _aggregate(cfg: ExperimentConfig, results: list) -> dict:
    agg = {"n_jobs": len(results)}
    c_emps = [r["c_emp"] for r in results if "c_emp" in r]
    if c_emps:
        agg["max_c_emp"] = max(c_emps)
    rels = [r["rel_deviation"] for r in results if "rel_deviation" in r]
    if rels:
        agg["max_scaling_deviation"] = max(rels)
    for r in results:
        res = r.get("result", {})
        if r["kind"] == "estimate1d_corpus":
            agg["max_ratio"] = res["max_ratio"]
            agg["violations"] = res["violations"]
        if r["kind"] == "convergence_study":
            agg["min_order"] = min(agg.get("min_order", math.inf), res["min_order"])
        if r["kind"] == "harmonic_radius":
            agg["min_radius_estimate"] = min(agg.get("min_radius_estimate", math.inf),
                                             res["radius_estimate"])
            agg["max_residual_sup"] = max(agg.get("max_residual_sup", 0.0),
                                          res["residual_sup"])
        if r["kind"] == "lifting_check":
            agg["min_jacobi_det"] = min(agg.get("min_jacobi_det", math.inf),
                                        res["min_jacobi_det"])
            agg["max_radial_deviation"] = max(agg.get("max_radial_deviation", 0.0),
                                              res["radial_deviation"])
        if r["kind"] == "divergence_suite":
            agg.setdefault("verdicts", []).append(r["verdict"])
    return agg


_OPS = {
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "ge": lambda a, b: a >= b,
    "eq": lambda a, b: a == b,
    "is": lambda a, b: bool(a) is bool(b),
}


def _check_assertions(assertions: dict, aggregates: dict) -> list:
    checks = []
    for key, spec in assertions.items():
        if not isinstance(spec, dict):
            spec = {"eq": spec}
        if key not in aggregates:
            checks.append({"name": key, "passed": False,
                           "detail": "aggregate key missing"})
            continue
        value = aggregates[key]
        for op, target in spec.items():
            if op not in _OPS:
                checks.append({"name": f"{key}:{op}", "passed": False,
                               "detail": f"unknown operator {op!r}"})
                continue
            ok = bool(_OPS[op](value, target))
            checks.append({"name": f"{key}:{op}:{target}", "passed": ok,
                           "detail": f"value={value}"})
    return checks


@dataclass
class RunReport:
    config: dict
    jobs: list
    aggregates: dict
    assertions: list
    all_passed: bool
    schema_version: int = SCHEMA_VERSION
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "jobs": self.jobs,
            "aggregates": self.aggregates,
            "assertions": self.assertions,
            "all_passed": self.all_passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _flatten(prefix: str, obj, rows: list):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], rows)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    elif isinstance(obj, (int, float, bool)) or obj is None:
        rows.append((prefix, obj))
    else:
        rows.append((prefix, str(obj)))


def run(cfg: ExperimentConfig, jobs: int = 1, out_dir=None) -> RunReport:
    """Execute a validated config; write report.json, jobs.csv and
    run_stats.json into the output directory; return the report."""
    t0 = time.perf_counter()
    descriptors = build_jobs(cfg)
    if jobs > 1 and len(descriptors) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(execute_job, descriptors))
    else:
        results = [execute_job(d) for d in descriptors]
    results.sort(key=lambda r: r["id"])

    stats = {"total_wall_seconds": time.perf_counter() - t0, "jobs": {}}
    for r in results:
        stats["jobs"][r["id"]] = r.pop("_stats", {})

    aggregates = _aggregate(cfg, results)
    checks = _check_assertions(cfg.assertions, aggregates)
    all_passed = all(c["passed"] for c in checks)
    report = RunReport(config=cfg.echo(), jobs=results, aggregates=aggregates,
                       assertions=checks, all_passed=all_passed, stats=stats)

    target = out_dir or cfg.out or os.environ.get("GRADEST_OUT", "gradest_out")
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    (target / "report.json").write_text(report.to_json())
    (target / "run_stats.json").write_text(
        json.dumps(stats, sort_keys=True, indent=2, default=str) + "\n")
    with open(target / "jobs.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["job_id", "kind", "metric", "value"])
        for r in results:
            rows = []
            _flatten("", {k: v for k, v in r.items() if k not in ("id", "kind")}, rows)
            for metric, value in rows:
                writer.writerow([r["id"], r["kind"], metric, repr(value)])
    return report
