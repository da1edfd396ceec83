"""Scenario files, suite execution and report assembly.

A scenario is a JSON document naming a catalog map, the two metric parameter
triples and a sampling plan. :func:`run` returns a report dictionary and an
exit code (0 all suites pass, 1 some check failed, 2 bad configuration).
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import catalog
from .bundle import BundlePoint, CGParams, cg_matrix, verify_levi_civita
from .certify import (
    certify_harmonic_morphism,
    maint_agreement,
    measure_lifted,
    t_sweep_diagnostic,
)
from .errors import GeometryError, ParameterError
from .geometry import local_geometry
from .lift import LiftedMap, lift_residuals, split_basis, split_residuals
from .maps import map_point_data
from .sampling import FIBER_NORMS, sample_bundle

SUITES = ("metric", "connection", "lift", "maint", "hmt")
XI_MODES = ("gaussian", "horizontal", "vertical")

_ref_schema = {"type": "object", "properties": {"id": {"type": "string"}, "params": {"type": "object"}}, "required": ["id"], "additionalProperties": False}

SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "domain": _ref_schema,
        "codomain": _ref_schema,
        "map": _ref_schema,
        "metric": {
            "type": "object",
            "properties": {k: {"type": "number"} for k in ("p", "q", "alpha", "r", "s", "beta")},
            "additionalProperties": False,
        },
        "samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "tol": {
            "type": "object",
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in ("identity", "rank", "deviation")},
            "additionalProperties": False,
        },
        "suites": {"type": "array", "items": {"enum": list(SUITES)}, "uniqueItems": True},
        "xi_mode": {"enum": list(XI_MODES)},
    },
    "required": ["name", "map"],
    "additionalProperties": False,
}

DEFAULT_TOL = {"identity": 1e-7, "rank": 1e-8, "deviation": 1e-3}


class ConfigError(GeometryError, ValueError):
    """A scenario file does not parse or validate; ``field`` locates the problem."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass
class Scenario:
    name: str
    map_id: str
    map_params: dict
    params_m: CGParams
    params_n: CGParams
    samples: int = 20
    seed: int = 0
    tol: dict = field(default_factory=lambda: dict(DEFAULT_TOL))
    suites: tuple = SUITES
    xi_mode: str = "gaussian"
    domain: dict | None = None
    codomain: dict | None = None

    def build_map(self):
        return catalog.make_map(self.map_id, **self.map_params)

    def as_dict(self) -> dict:
        pm, pn = self.params_m, self.params_n
        return {
            "name": self.name,
            "map": {"id": self.map_id, "params": self.map_params},
            "metric": {"p": pm.p, "q": pm.q, "alpha": pm.alpha, "r": pn.p, "s": pn.q, "beta": pn.alpha},
            "samples": self.samples,
            "seed": self.seed,
            "tol": self.tol,
            "suites": list(self.suites),
            "xi_mode": self.xi_mode,
        }


def parse(text: str, overrides: dict | None = None) -> Scenario:
    """Parse and validate scenario JSON; raises :class:`ConfigError`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from None
    for key, val in (overrides or {}).items():
        if val is not None:
            if key == "tol":
                doc.setdefault("tol", {})["identity"] = val
            else:
                doc[key] = val
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(err.message, where)
    metric = doc.get("metric", {})
    try:
        pm = CGParams(metric.get("p", 0.0), metric.get("q", 0.0), metric.get("alpha", 1.0))
    except ParameterError as exc:
        raise ConfigError(str(exc), _metric_field(str(exc), "m")) from None
    try:
        pn = CGParams(metric.get("r", 0.0), metric.get("s", 0.0), metric.get("beta", 1.0))
    except ParameterError as exc:
        msg = str(exc).replace("q must", "s must").replace("alpha must", "beta must")
        raise ConfigError(msg, _metric_field(str(exc), "n")) from None
    map_doc = doc["map"]
    try:
        entry = catalog.entry(map_doc["id"])
        params = dict(map_doc.get("params", {}))
        phi = entry.make(**params)
    except (GeometryError, TypeError) as exc:
        raise ConfigError(str(exc), "map") from None
    for key, ch in (("domain", phi.domain), ("codomain", phi.codomain)):
        chart_doc = doc.get(key)
        if chart_doc is None:
            continue
        try:
            declared = catalog.chart(chart_doc["id"], **chart_doc.get("params", {}))
        except (GeometryError, TypeError) as exc:
            raise ConfigError(str(exc), f"{key}.id") from None
        if declared.name != ch.name or declared.dim != ch.dim:
            raise ConfigError(f"map {map_doc['id']} has {key} {ch.name}, scenario names {declared.name}", f"{key}.id")
    return Scenario(
        name=doc["name"],
        map_id=map_doc["id"],
        map_params=params,
        params_m=pm,
        params_n=pn,
        samples=doc.get("samples", 20),
        seed=doc.get("seed", 0),
        tol={**DEFAULT_TOL, **doc.get("tol", {})},
        suites=tuple(doc.get("suites", SUITES)),
        xi_mode=doc.get("xi_mode", "gaussian"),
        domain=doc.get("domain"),
        codomain=doc.get("codomain"),
    )


def _metric_field(message: str, side: str) -> str:
    name = "q" if message.startswith("q") else "alpha" if message.startswith("alpha") else "p"
    if side == "n":
        name = {"p": "r", "q": "s", "alpha": "beta"}[name]
    return f"metric.{name}"


def load(path: str, overrides: dict | None = None) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(str(exc), path) from None
    return parse(text, overrides)


# -- sampling --------------------------------------------------------------------


def bundle_samples(sc: Scenario, phi=None) -> list[BundlePoint]:
    """Seeded bundle points; ``xi_mode`` optionally restricts ``xi`` to ``H`` or ``V`` of ``phi``."""
    phi = sc.build_map() if phi is None else phi
    pts = sample_bundle(phi.domain, sc.samples, sc.seed)
    if sc.xi_mode == "gaussian":
        return pts
    out = []
    for i, at in enumerate(pts):
        data = map_point_data(phi, at.x, sc.tol["rank"])
        basis = data.horizontal_basis if sc.xi_mode == "horizontal" else data.vertical_basis
        g = local_geometry(at.chart, at.x).g
        proj = basis @ (basis.T @ g @ at.xi)
        norm = np.sqrt(proj @ g @ proj)
        if norm == 0.0 and basis.shape[1]:
            proj, norm = basis[:, 0], 1.0
        target = FIBER_NORMS[i % len(FIBER_NORMS)]
        xi = proj * (target / norm) if norm > 0 else np.zeros(at.dim)
        out.append(BundlePoint(at.chart, at.x, xi))
    return out


# -- suites ------------------------------------------------------------------------


def _suite_metric(sc, phi, pts) -> dict:
    min_eig = np.inf
    asym = 0.0
    for params in (sc.params_m,):
        for at in pts:
            H = cg_matrix(params, at)
            asym = max(asym, float(np.max(np.abs(H - H.T))))
            min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (H + H.T))[0]))
    return {"pass": bool(min_eig > 0 and asym <= 1e-12), "min_eigenvalue": min_eig, "max_asymmetry": asym}


def _suite_connection(sc, phi, pts) -> dict:
    res = verify_levi_civita(sc.params_m, pts)
    tol = sc.tol["identity"]
    return {"pass": bool(res["torsion"] <= tol and res["compatibility"] <= tol), **res}


def _suite_lift(sc, phi, pts) -> dict:
    Phi = LiftedMap(phi)
    rng = np.random.default_rng(sc.seed + 1)
    l1 = 0.0
    ann = orth = 0.0
    kernel, hdims = set(), set()
    m, n = phi.domain.dim, phi.codomain.dim
    for at in pts:
        r = lift_residuals(Phi, at, rng.standard_normal(m), sc.params_n)
        l1 = max(l1, r.vertical, r.horizontal)
        data = map_point_data(phi, at.x, sc.tol["rank"])
        if data.rank == n and m > n:
            s = split_residuals(Phi, sc.params_m, split_basis(Phi, sc.params_m, at, data))
            ann, orth = max(ann, s.annihilation), max(orth, s.orthogonality)
            kernel.add(s.kernel_dim)
            hdims.add(s.h_dim)
    tol = sc.tol["identity"]
    ok = l1 <= tol and ann <= tol and orth <= tol and kernel <= {2 * (m - n)}
    return {
        "pass": bool(ok),
        "lift_identity_max": l1,
        "annihilation_max": ann,
        "orthogonality_max": orth,
        "kernel_dims": sorted(kernel),
        "h_span_dims": sorted(hdims),
    }


def _lifted_ok(phi) -> str | None:
    m, n = phi.domain.dim, phi.codomain.dim
    if n < 2 or m <= n:
        return f"needs dim M > dim N >= 2 (m={m}, n={n})"
    return None


def _suite_maint(sc, phi, pts, cache) -> dict:
    reason = _lifted_ok(phi)
    if reason:
        return {"pass": True, "skipped": reason}
    rec = maint_agreement(phi, sc.params_m, sc.params_n, pts, sc.tol["identity"])
    cache["maint"] = rec
    d = rec.as_dict()
    detected = rec.predicted or rec.measurement.max_deviation >= sc.tol["deviation"]
    d["necessity_detected"] = bool(detected)
    d["pass"] = bool(rec.agreement and detected)
    return d


def _suite_hmt(sc, phi, pts, cache) -> dict:
    reason = _lifted_ok(phi)
    if reason:
        return {"pass": True, "skipped": reason}
    tol = sc.tol["identity"]
    cond = cache["maint"].conditions if "maint" in cache else None
    if cond is None:
        from .certify import evaluate_theorem_conditions

        cond = evaluate_theorem_conditions(phi, sc.params_m, sc.params_n, pts, tol)
    cert = certify_harmonic_morphism(LiftedMap(phi), pts, tol, sc.params_m, sc.params_n)
    return {
        "pass": bool(cert.certified == cond.hmt),
        "predicted": cond.hmt,
        "certified": cert.certified,
        "horizontally_conformal": cert.horizontally_conformal,
        "harmonic": cert.harmonic,
        "max_tension": cert.max_tension,
    }


def _fmt(v: float) -> float:
    return float(f"{v:.12g}")


def run(sc: Scenario, stable: bool = False) -> tuple[dict, int]:
    """Execute the scenario's suites; returns ``(report, exit_code)``."""
    start = time.perf_counter()
    phi = sc.build_map()
    pts = bundle_samples(sc, phi)
    cache: dict = {}
    summaries = {}
    for suite in sc.suites:
        if suite == "metric":
            summaries[suite] = _suite_metric(sc, phi, pts)
        elif suite == "connection":
            summaries[suite] = _suite_connection(sc, phi, pts)
        elif suite == "lift":
            summaries[suite] = _suite_lift(sc, phi, pts)
        elif suite == "maint":
            summaries[suite] = _suite_maint(sc, phi, pts, cache)
        elif suite == "hmt":
            summaries[suite] = _suite_hmt(sc, phi, pts, cache)

    per_sample = []
    predicted = agreement = None
    aggregate = "not evaluated"
    rec = cache.get("maint")
    if rec is not None:
        for at, v in zip(pts, rec.measurement.verdicts):
            per_sample.append(
                {
                    "x": [_fmt(c) for c in at.x],
                    "xi": [_fmt(c) for c in at.xi],
                    "verdict": v.kind,
                    "lambda_or_deviation": _fmt(v.value),
                }
            )
        predicted = "conformal" if rec.predicted else "nonconformal"
        agreement = rec.agreement
        if rec.measured:
            aggregate = f"conformal, Lambda={rec.measurement.Lambda:.8g}"
        else:
            aggregate = "nonconformal (predicted)" if not rec.predicted else "nonconformal (contradicts prediction)"
    report = {
        "scenario": sc.as_dict(),
        "per_sample": per_sample,
        "aggregate": aggregate,
        "predicted": predicted,
        "agreement": agreement,
        "residual_summaries": _clean(summaries),
        "runtime_ms": None if stable else round((time.perf_counter() - start) * 1e3, 3),
    }
    code = 0 if all(s["pass"] for s in summaries.values()) else 1
    return report, code


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return _fmt(v) if np.isfinite(v) else str(v)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# -- sweeps ------------------------------------------------------------------------

SWEEP_AXES = ("t", "p", "q", "alpha", "r", "s", "beta")
SWEEP_HEADER = ("p", "q", "alpha", "r", "s", "beta", "t", "max_deviation", "Lambda")


def sweep(sc: Scenario, axis: str, grid) -> list[dict]:
    """One row per grid value: parameters, maximum deviation over the samples, mean ``Lambda``."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown axis {axis!r}; expected one of {SWEEP_AXES}", "--axis")
    phi = sc.build_map()
    reason = _lifted_ok(phi)
    if reason:
        raise ConfigError(reason, "map")
    pts = bundle_samples(sc, phi)
    pm, pn = sc.params_m, sc.params_n
    rows = []
    for val in grid:
        val = float(val)
        t = 1.0
        try:
            if axis == "t":
                t = val
            elif axis in ("p", "q", "alpha"):
                pm = CGParams(**{**pm.as_dict(), axis: val})
            else:
                key = {"r": "p", "s": "q", "beta": "alpha"}[axis]
                pn = CGParams(**{**pn.as_dict(), key: val})
        except ParameterError as exc:
            raise ConfigError(str(exc), f"--grid {axis}={val:g}") from None
        devs, lams = [], []
        for at in pts:
            row = t_sweep_diagnostic(phi, pm, pn, at.x, at.xi, [t], sc.tol["identity"])[0]
            if row["verdict"] == "critical":
                continue
            devs.append(row["deviation"])
            lams.append(row["Lambda"])
        rows.append(
            {
                "p": pm.p,
                "q": pm.q,
                "alpha": pm.alpha,
                "r": pn.p,
                "s": pn.q,
                "beta": pn.alpha,
                "t": t,
                "max_deviation": max(devs) if devs else float("nan"),
                "Lambda": float(np.mean(lams)) if lams else float("nan"),
            }
        )
    return rows


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: f"{row[k]:.12g}" for k in SWEEP_HEADER})
    return buf.getvalue()


__all__ = [
    "SCHEMA",
    "Scenario",
    "ConfigError",
    "parse",
    "load",
    "run",
    "dumps",
    "sweep",
    "sweep_csv",
    "bundle_samples",
    "measure_lifted",
]
