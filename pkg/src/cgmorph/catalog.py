"""Built-in charts and maps used by the scenarios and the test suite.

Each map entry declares ground-truth flags (as functions of its parameters)
that :func:`self_test` confirms by measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import jets
from .errors import UsageError
from .geometry import Chart
from .maps import MapJet

# -- charts -------------------------------------------------------------------


def _box(dim: int, half: float) -> tuple:
    return tuple((-half, half) for _ in range(dim))


def flat(dim: int = 2, half: float = 2.0, scale: float = 1.0) -> Chart:
    """Euclidean ``R^dim`` (times ``scale``) on the box ``(-half, half)^dim``."""
    return _flat(int(dim), float(half), float(scale))


@lru_cache(maxsize=None)
def _flat(dim: int, half: float, scale: float) -> Chart:
    eye = np.eye(dim) * scale
    return Chart(f"flat{dim}", dim, _box(dim, half), lambda x: eye)


@lru_cache(maxsize=None)
def sphere() -> Chart:
    """Unit sphere in ``(theta, phi)``, poles excluded by a 0.1 margin."""
    return Chart(
        "sphere",
        2,
        ((0.1, np.pi - 0.1), (-np.pi, np.pi)),
        lambda x: [[1.0, 0.0], [0.0, jets.sin(x[0]) ** 2]],
    )


@lru_cache(maxsize=None)
def sphere_product() -> Chart:
    """``S^2 x R`` with the product metric."""
    return Chart(
        "sphere_product",
        3,
        ((0.1, np.pi - 0.1), (-np.pi, np.pi), (-2.0, 2.0)),
        lambda x: [[1.0, 0.0, 0.0], [0.0, jets.sin(x[0]) ** 2, 0.0], [0.0, 0.0, 1.0]],
    )


@lru_cache(maxsize=None)
def heisenberg() -> Chart:
    """``R^3`` with orthonormal frame ``d_x, d_y + x d_z, d_z``."""
    return Chart(
        "heisenberg",
        3,
        _box(3, 1.5),
        lambda x: [[1.0, 0.0, 0.0], [0.0, 1.0 + x[0] ** 2, -x[0]], [0.0, -x[0], 1.0]],
    )


@lru_cache(maxsize=None)
def warped() -> Chart:
    """``dx^2 + dy^2 + e^{2x} dz^2``."""
    return Chart(
        "warped",
        3,
        _box(3, 1.0),
        lambda x: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, jets.exp(2.0 * x[0])]],
    )


@lru_cache(maxsize=None)
def conformal_flat() -> Chart:
    """``e^{2x} (dx^2 + dy^2)``."""
    return Chart(
        "conformal_flat",
        2,
        _box(2, 1.0),
        lambda x: [[jets.exp(2.0 * x[0]), 0.0], [0.0, jets.exp(2.0 * x[0])]],
    )


@lru_cache(maxsize=None)
def polar() -> Chart:
    """Flat plane minus the origin in polar coordinates ``(r, theta)``."""
    return Chart("polar", 2, ((0.5, 2.5), (-np.pi, np.pi)), lambda x: [[1.0, 0.0], [0.0, x[0] ** 2]])


@lru_cache(maxsize=None)
def punctured_plane() -> Chart:
    """A Cartesian box in ``R^2`` away from the origin."""
    return Chart("punctured_plane", 2, ((0.5, 2.0), (-1.0, 1.0)), lambda x: np.eye(2))


def line(half: float = 4.0) -> Chart:
    return _line(float(half))


@lru_cache(maxsize=None)
def _line(half: float) -> Chart:
    return Chart("line", 1, ((-half, half),), lambda x: [[1.0]])


CHARTS: dict[str, Callable[..., Chart]] = {
    "flat": flat,
    "sphere": sphere,
    "sphere_product": sphere_product,
    "heisenberg": heisenberg,
    "warped": warped,
    "conformal_flat": conformal_flat,
    "polar": polar,
    "punctured_plane": punctured_plane,
    "line": line,
}


def chart(chart_id: str, **params) -> Chart:
    try:
        return CHARTS[chart_id](**params)
    except KeyError:
        raise UsageError(f"unknown chart {chart_id!r}; known: {sorted(CHARTS)}") from None


# -- maps -----------------------------------------------------------------


FLAG_NAMES = (
    "totally_geodesic",
    "riemannian_submersion",
    "horizontally_conformal",
    "constant_dilatation",
    "T_zero",
    "fibers_totally_geodesic",
    "harmonic",
)


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    description: str
    build: Callable[..., MapJet]
    flags: Callable[..., dict]
    defaults: dict = field(default_factory=dict)

    def make(self, **params) -> MapJet:
        return self.build(**{**self.defaults, **params})

    def declared(self, **params) -> dict:
        return self.flags(**{**self.defaults, **params})


def _flags(**kw) -> dict:
    out = {name: False for name in FLAG_NAMES}
    out["dilatation"] = None
    out.update(kw)
    return out


@lru_cache(maxsize=None)
def _flat_projection(m: int = 3, n: int = 2, lam: float = 1.0) -> MapJet:
    if not 1 <= n <= m:
        raise UsageError("flat_projection needs 1 <= n <= m")
    c = float(np.sqrt(lam))
    return MapJet(flat(m), flat(n, half=2.0 * c + 1.0), lambda x: [c * x[i] for i in range(n)], f"flat_projection({m},{n},{lam:g})")


def _flat_projection_flags(m=3, n=2, lam=1.0):
    return _flags(
        totally_geodesic=True,
        riemannian_submersion=lam == 1.0,
        horizontally_conformal=True,
        constant_dilatation=True,
        dilatation=float(lam),
        T_zero=True,
        fibers_totally_geodesic=True,
        harmonic=True,
    )


@lru_cache(maxsize=None)
def _linear_map(matrix: tuple = ((1.0, 0.0, 0.0), (0.0, 2.0, 0.0))) -> MapJet:
    A = np.array(matrix, dtype=float)
    n, m = A.shape
    half = 2.0 * float(np.abs(A).sum(axis=1).max()) + 1.0
    return MapJet(flat(m), flat(n, half=half), lambda x: [sum(A[i, j] * x[j] for j in range(m)) for i in range(n)], "linear_map")


def _linear_flags(matrix=((1.0, 0.0, 0.0), (0.0, 2.0, 0.0))):
    A = np.array(matrix, dtype=float)
    eig = np.linalg.eigvalsh(A @ A.T)
    hc = bool(eig[0] > 0 and np.ptp(eig) < 1e-12)
    return _flags(
        totally_geodesic=True,
        riemannian_submersion=hc and abs(eig[0] - 1.0) < 1e-12,
        horizontally_conformal=hc,
        constant_dilatation=hc,
        dilatation=float(eig[0]) if hc else None,
        T_zero=True,
        fibers_totally_geodesic=True,
        harmonic=True,
    )


@lru_cache(maxsize=None)
def _sphere_product_projection() -> MapJet:
    return MapJet(sphere_product(), sphere(), lambda x: [x[0], x[1]], "sphere_product_projection")


@lru_cache(maxsize=None)
def _heisenberg_submersion() -> MapJet:
    return MapJet(heisenberg(), flat(2), lambda x: [x[0], x[1]], "heisenberg_submersion")


@lru_cache(maxsize=None)
def _warped_projection() -> MapJet:
    return MapJet(warped(), flat(2), lambda x: [x[0], x[1]], "warped_projection")


@lru_cache(maxsize=None)
def _conformal_plane() -> MapJet:
    return MapJet(
        flat(2, half=1.0),
        flat(2, half=3.0),
        lambda x: [jets.exp(x[0]) * jets.cos(x[1]), jets.exp(x[0]) * jets.sin(x[1])],
        "conformal_plane",
    )


@lru_cache(maxsize=None)
def _conformal_projection() -> MapJet:
    return MapJet(
        flat(3, half=1.0),
        flat(2, half=3.0),
        lambda x: [jets.exp(x[0]) * jets.cos(x[1]), jets.exp(x[0]) * jets.sin(x[1])],
        "conformal_projection",
    )


@lru_cache(maxsize=None)
def _constant_map(m: int = 2, n: int = 2) -> MapJet:
    return MapJet(flat(m), flat(n), lambda x: [0.5 + 0.0 * x[0] for _ in range(n)], "constant_map")


@lru_cache(maxsize=None)
def _identity_map(chart_id: str = "flat", dim: int = 3) -> MapJet:
    c = flat(dim) if chart_id == "flat" else chart(chart_id)
    return MapJet(c, c, lambda x: [x[i] for i in range(c.dim)], f"identity_map({c.name})")


@lru_cache(maxsize=None)
def _radial_distance() -> MapJet:
    return MapJet(polar(), line(), lambda x: [x[0]], "radial_distance")


@lru_cache(maxsize=None)
def _log_radius() -> MapJet:
    return MapJet(
        punctured_plane(),
        line(),
        lambda x: [0.5 * jets.log(x[0] ** 2 + x[1] ** 2)],
        "log_radius",
    )


@lru_cache(maxsize=None)
def _unit_circle_curve() -> MapJet:
    return MapJet(line(), flat(2), lambda x: [jets.cos(x[0]), jets.sin(x[0])], "unit_circle_curve")


ENTRIES: dict[str, CatalogEntry] = {
    e.id: e
    for e in [
        CatalogEntry(
            "flat_projection",
            "scaled linear projection R^m -> R^n, x -> sqrt(lam) (x_1..x_n)",
            _flat_projection,
            _flat_projection_flags,
            {"m": 3, "n": 2, "lam": 1.0},
        ),
        CatalogEntry("linear_map", "linear map between flat spaces", _linear_map, _linear_flags),
        CatalogEntry(
            "sphere_product_projection",
            "product projection S^2 x R -> S^2",
            _sphere_product_projection,
            lambda: _flags(
                totally_geodesic=True,
                riemannian_submersion=True,
                horizontally_conformal=True,
                constant_dilatation=True,
                dilatation=1.0,
                T_zero=True,
                fibers_totally_geodesic=True,
                harmonic=True,
            ),
        ),
        CatalogEntry(
            "heisenberg_submersion",
            "Heisenberg group R^3 -> R^2, (x, y, z) -> (x, y); Riemannian submersion with T != 0",
            _heisenberg_submersion,
            lambda: _flags(
                riemannian_submersion=True,
                horizontally_conformal=True,
                constant_dilatation=True,
                dilatation=1.0,
                fibers_totally_geodesic=True,
                harmonic=True,
            ),
        ),
        CatalogEntry(
            "warped_projection",
            "(R^2 x R, dx^2 + dy^2 + e^{2x} dz^2) -> R^2; fibres not totally geodesic",
            _warped_projection,
            lambda: _flags(
                riemannian_submersion=True,
                horizontally_conformal=True,
                constant_dilatation=True,
                dilatation=1.0,
                T_zero=True,
            ),
        ),
        CatalogEntry(
            "conformal_plane",
            "(x, y) -> (e^x cos y, e^x sin y); conformal with lambda = e^{2x}",
            _conformal_plane,
            lambda: _flags(horizontally_conformal=True, T_zero=True, fibers_totally_geodesic=True, harmonic=True),
        ),
        CatalogEntry(
            "conformal_projection",
            "(x, y, z) -> (e^x cos y, e^x sin y); harmonic morphism with lambda = e^{2x}",
            _conformal_projection,
            lambda: _flags(horizontally_conformal=True, T_zero=True, fibers_totally_geodesic=True, harmonic=True),
        ),
        CatalogEntry(
            "constant_map",
            "constant map R^m -> R^n",
            _constant_map,
            lambda m=2, n=2: _flags(totally_geodesic=True, T_zero=True, fibers_totally_geodesic=True, harmonic=True),
            {"m": 2, "n": 2},
        ),
        CatalogEntry(
            "identity_map",
            "identity of a catalog chart",
            _identity_map,
            lambda chart_id="flat", dim=3: _flags(
                totally_geodesic=True,
                riemannian_submersion=True,
                horizontally_conformal=True,
                constant_dilatation=True,
                dilatation=1.0,
                T_zero=True,
                fibers_totally_geodesic=True,
                harmonic=True,
            ),
            {"chart_id": "flat", "dim": 3},
        ),
        CatalogEntry(
            "radial_distance",
            "polar plane -> R, (r, theta) -> r; fibres are circles",
            _radial_distance,
            lambda: _flags(
                riemannian_submersion=True,
                horizontally_conformal=True,
                constant_dilatation=True,
                dilatation=1.0,
                T_zero=True,
            ),
        ),
        CatalogEntry(
            "log_radius",
            "punctured plane -> R, ln |x|; harmonic function",
            _log_radius,
            lambda: _flags(horizontally_conformal=True, T_zero=True, harmonic=True),
        ),
        CatalogEntry(
            "unit_circle_curve",
            "R -> R^2, t -> (cos t, sin t)",
            _unit_circle_curve,
            lambda: _flags(T_zero=True, fibers_totally_geodesic=True),
        ),
    ]
}


def catalog() -> list[CatalogEntry]:
    return list(ENTRIES.values())


def entry(entry_id: str) -> CatalogEntry:
    try:
        return ENTRIES[entry_id]
    except KeyError:
        raise UsageError(f"unknown catalog entry {entry_id!r}; known: {sorted(ENTRIES)}") from None


def make_map(entry_id: str, **params) -> MapJet:
    params = {k: tuple(map(tuple, v)) if k == "matrix" else v for k, v in params.items()}
    return entry(entry_id).make(**params)


# -- self-test ----------------------------------------------------------------


def measure_flags(phi: MapJet, samples: int = 20, seed: int = 0, tol: float = 1e-7) -> dict:
    """Measure every catalog flag of ``phi`` on ``samples`` random points."""
    from .maps import (
        dilatation,
        fiber_second_fundamental_form,
        integrability_tensor,
        map_point_data,
        second_fundamental_tensor,
        tension,
    )
    from .sampling import sample_points

    rng = np.random.default_rng(seed)
    m, n = phi.domain.dim, phi.codomain.dim
    max_B = max_T = max_II = max_tau = 0.0
    lams = []
    noncritical = 0
    all_hc = True
    for x in sample_points(phi.domain, samples, rng):
        max_B = max(max_B, float(np.max(np.abs(second_fundamental_tensor(phi, x)))))
        tau = tension(phi, x)
        gn = phi.codomain.metric(phi.value(x))
        max_tau = max(max_tau, float(np.sqrt(tau @ gn @ tau)))
        data = map_point_data(phi, x)
        if data.critical:
            continue
        noncritical += 1
        v = dilatation(phi, data, tol)
        if v.conformal:
            lams.append(v.value)
        else:
            all_hc = False
        if data.rank == n and m > n:
            H = data.horizontal_basis
            for i in range(n):
                for j in range(i + 1, n):
                    max_T = max(max_T, float(np.max(np.abs(integrability_tensor(phi, H[:, i], H[:, j], x)))))
            max_II = max(max_II, float(np.max(np.abs(fiber_second_fundamental_form(phi, data)))))
    hc = noncritical > 0 and all_hc
    spread = float(np.ptp(lams)) if lams else float("inf")
    lam = float(np.mean(lams)) if lams else None
    const = hc and spread <= tol * (1 + lam)
    return {
        "totally_geodesic": max_B <= tol,
        "riemannian_submersion": bool(const and abs(lam - 1.0) <= tol),
        "horizontally_conformal": hc,
        "constant_dilatation": bool(const),
        "dilatation": lam if const else None,
        "T_zero": max_T <= tol,
        "fibers_totally_geodesic": max_II <= tol,
        "harmonic": max_tau <= tol,
        "residuals": {"max_B": max_B, "max_T": max_T, "max_fiber_II": max_II, "max_tension": max_tau, "lambda_spread": spread},
    }


def self_test(entry_id: str, samples: int = 20, seed: int = 0, tol: float = 1e-7, **params) -> dict:
    """Declared flags of a catalog entry against measurement; ``ok`` is the conjunction."""
    e = entry(entry_id)
    declared = e.declared(**params)
    measured = measure_flags(e.make(**params), samples, seed, tol)
    checks = {}
    for name in FLAG_NAMES:
        checks[name] = {"declared": declared[name], "measured": measured[name], "ok": declared[name] == measured[name]}
    lam_ok = declared["dilatation"] is None or (measured["dilatation"] is not None and abs(measured["dilatation"] - declared["dilatation"]) <= tol * (1 + declared["dilatation"]))
    checks["dilatation"] = {"declared": declared["dilatation"], "measured": measured["dilatation"], "ok": lam_ok}
    return {"entry": entry_id, "ok": all(c["ok"] for c in checks.values()), "checks": checks, "residuals": measured["residuals"]}
