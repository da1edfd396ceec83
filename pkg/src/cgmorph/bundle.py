"""The tangent bundle ``TM`` with a Cheeger-Gromoll type metric.

Points of ``TM`` are pairs ``(x, xi)``; vectors of ``T_xi TM`` are written in
induced coordinates ``(a, b)`` (:class:`SecondTangent`). The connection map is
``K(a, b) = b + Gamma(a, xi)``, so ``a`` is the horizontal and ``K(A)`` the
vertical part of ``A`` in the lift frame. The bundle metric is

    h(A, B) = g(a, a') + w(xi)**p * (g(KA, KB) + q g(KA, xi) g(KB, xi)),

with ``w(xi) = 1 / (1 + alpha |xi|^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import jets
from .errors import ParameterError, UsageError
from .geometry import (
    Chart,
    Point,
    Tangent,
    VectorField,
    christoffel_from_metric,
    coords_of,
    covariant_derivative,
    local_geometry,
    vector_of,
)
from .jets import Jet


@dataclass(frozen=True)
class CGParams:
    """Parameters ``(p, q, alpha)`` of ``h_{p,q,alpha}``."""

    p: float = 0.0
    q: float = 0.0
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("p", "q", "alpha"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
                raise ParameterError(f"{name} must be a finite real number, got {v!r}")
        if self.q < 0:
            raise ParameterError(f"q must be non-negative, got {self.q}")
        if self.alpha <= 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")

    @property
    def sasaki(self) -> bool:
        return self.q == 0 and self.p * self.alpha == 0

    def as_dict(self) -> Mapping[str, float]:
        return {"p": self.p, "q": self.q, "alpha": self.alpha}


SASAKI = CGParams(0.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class BundlePoint:
    chart: Chart
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        x = self.x.coords if isinstance(self.x, Point) else self.x
        object.__setattr__(self, "x", coords_of(self.chart, x))
        xi = np.asarray(vector_of(self.xi), dtype=float)
        if xi.shape != (self.chart.dim,):
            raise UsageError("fibre vector must match the chart dimension")
        object.__setattr__(self, "xi", xi)

    @property
    def point(self) -> Point:
        return Point(self.chart, self.x)

    @property
    def dim(self) -> int:
        return self.chart.dim


@dataclass(frozen=True, eq=False)
class SecondTangent:
    """``A in T_xi TM`` in induced coordinates ``(a, b)``."""

    at: BundlePoint
    a: np.ndarray
    b: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    @classmethod
    def from_vector(cls, at: BundlePoint, v) -> "SecondTangent":
        v = np.asarray(v, dtype=float)
        m = at.dim
        return cls(at, v[:m].copy(), v[m:].copy())

    def __add__(self, other: "SecondTangent") -> "SecondTangent":
        return SecondTangent(self.at, self.a + other.a, self.b + other.b)

    def __sub__(self, other: "SecondTangent") -> "SecondTangent":
        return SecondTangent(self.at, self.a - other.a, self.b - other.b)

    def __mul__(self, c: float) -> "SecondTangent":
        return SecondTangent(self.at, c * self.a, c * self.b)

    __rmul__ = __mul__


def _gamma(at: BundlePoint) -> np.ndarray:
    return local_geometry(at.chart, at.x).gamma


# -- scalar weights ------------------------------------------------------


def omega_alpha(params: CGParams, at: BundlePoint) -> float:
    g = local_geometry(at.chart, at.x).g
    return 1.0 / (1.0 + params.alpha * (at.xi @ g @ at.xi))


def omega_q(params: CGParams, at: BundlePoint) -> float:
    g = local_geometry(at.chart, at.x).g
    return 1.0 / (1.0 + params.q * (at.xi @ g @ at.xi))


# -- splitting -------------------------------------------------------------


def pi_push(A: SecondTangent) -> np.ndarray:
    return A.a.copy()


def connection_map(A: SecondTangent) -> np.ndarray:
    return A.b + np.einsum("kij,i,j->k", _gamma(A.at), A.a, A.at.xi)


def from_lift_frame(at: BundlePoint, horizontal, vertical) -> SecondTangent:
    """The vector ``horizontal^h + vertical^v`` in induced coordinates."""
    h = np.asarray(horizontal, dtype=float)
    v = np.asarray(vertical, dtype=float)
    return SecondTangent(at, h.copy(), v - np.einsum("kij,i,j->k", _gamma(at), h, at.xi))


def to_lift_frame(A: SecondTangent) -> tuple[np.ndarray, np.ndarray]:
    return pi_push(A), connection_map(A)


def vertical_lift(X, at: BundlePoint) -> SecondTangent:
    X = vector_of(X)
    return SecondTangent(at, np.zeros_like(X), X.copy())


def horizontal_lift(X, at: BundlePoint) -> SecondTangent:
    return from_lift_frame(at, vector_of(X), np.zeros(at.dim))


def decompose(A: SecondTangent) -> tuple[SecondTangent, SecondTangent]:
    """``(HA, VA)`` with ``A = HA + VA``."""
    return horizontal_lift(pi_push(A), A.at), vertical_lift(connection_map(A), A.at)


# -- metric ----------------------------------------------------------------


def fiber_block(params: CGParams, g, xi):
    """Vertical block ``w^p (g + q (g xi)(g xi)^T)`` of the metric in the lift frame.

    Works on plain arrays and on jets.
    """
    gxi = jets.matmul(g, xi)
    quad = (gxi * xi).sum(-1) if isinstance(gxi, Jet) else gxi @ xi
    w = 1.0 / (1.0 + params.alpha * quad)
    if isinstance(gxi, Jet):
        outer = gxi[:, None] * gxi[None, :]
        return (g + outer * params.q) * jets.power(w, params.p)
    return w**params.p * (g + params.q * np.outer(gxi, gxi))


def lift_frame_metric(params: CGParams, at: BundlePoint) -> np.ndarray:
    g = local_geometry(at.chart, at.x).g
    m = at.dim
    out = np.zeros((2 * m, 2 * m))
    out[:m, :m] = g
    out[m:, m:] = fiber_block(params, g, at.xi)
    return out


def cg_matrix(params: CGParams, at: BundlePoint) -> np.ndarray:
    """Matrix of ``h`` in induced coordinates ``(a, b)``."""
    m = at.dim
    to_frame = np.eye(2 * m)
    to_frame[m:, :m] = np.einsum("kij,j->ki", _gamma(at), at.xi)
    return to_frame.T @ lift_frame_metric(params, at) @ to_frame


def cg_inner(params: CGParams, A: SecondTangent, B: SecondTangent) -> float:
    if A.at is not B.at and not (np.array_equal(A.at.x, B.at.x) and np.array_equal(A.at.xi, B.at.xi)):
        raise UsageError("vectors live at different points of TM")
    g = local_geometry(A.at.chart, A.at.x).g
    ka, kb = connection_map(A), connection_map(B)
    return float(A.a @ g @ B.a + ka @ fiber_block(params, g, A.at.xi) @ kb)


def cg_norm(params: CGParams, A: SecondTangent) -> float:
    return float(np.sqrt(max(cg_inner(params, A, A), 0.0)))


def bundle_variables(at: BundlePoint, order: int) -> tuple[Jet, Jet]:
    """Seed jets for ``x`` (variables ``0..m-1``) and ``xi`` (``m..2m-1``)."""
    m = at.dim
    u = Jet.variables(np.concatenate([at.x, at.xi]), order=order)
    return u[:m], u[m:]


def tm_metric_jet(params: CGParams, at: BundlePoint, order: int = 1) -> Jet:
    """Taylor expansion of ``h`` in induced coordinates, to ``order``."""
    m = at.dim
    x, xi = bundle_variables(at, order + 1)
    G = at.chart.metric_jet(x)
    gamma = christoffel_from_metric(G, dim=m)
    G = G.truncate(order)
    xi = xi.truncate(order)
    gxi_map = (gamma * xi[None, None, :]).sum(-1)  # [k, i] = Gamma^k_ij xi^j
    D = fiber_block(params, G, xi)
    eye = Jet.constant(np.eye(m), G.space)
    zero = Jet.constant(np.zeros((m, m)), G.space)
    to_frame = jets.block([[eye, zero], [gxi_map, eye]])
    frame_metric = jets.block([[G, zero], [zero, D]])
    return jets.matmul(jets.matmul(to_frame.T, frame_metric), to_frame)


# -- Levi-Civita connection of h -----------------------------------------

CASES = ("hh", "hv", "vh", "vv")


def cg_connection(params: CGParams, case: str, X, Y, at: BundlePoint) -> SecondTangent:
    """``nabla^{TM}`` of lifts at ``xi``.

    ``case`` names the lifts of ``(X, Y)``: ``"hv"`` is ``nabla_{X^h} Y^v``.
    ``X`` is a vector at ``x``; ``Y`` is a :class:`VectorField` or a vector,
    read as its constant-coefficient extension.
    """
    if case not in CASES:
        raise UsageError(f"unknown case {case!r}; expected one of {CASES}")
    chart = at.chart
    geo = local_geometry(chart, at.x)
    Xv = vector_of(X)
    if isinstance(Y, VectorField):
        Yv = Y(at.x)
        nabla_xy = covariant_derivative(chart, Xv, Y, at.x)
    else:
        Yv = vector_of(Y)
        nabla_xy = np.einsum("kij,i,j->k", geo.gamma, Xv, Yv)
    xi = at.xi
    R = geo.riemann
    g = geo.g
    sq = xi @ g @ xi
    w = 1.0 / (1.0 + params.alpha * sq)
    wq = 1.0 / (1.0 + params.q * sq)
    wp = w**params.p
    curv = lambda A, B, C: np.einsum("lijk,i,j,k->l", R, A, B, C)  # noqa: E731
    zero = np.zeros(chart.dim)
    if case == "hh":
        return from_lift_frame(at, nabla_xy, -0.5 * curv(Xv, Yv, xi))
    if case == "hv":
        return from_lift_frame(at, 0.5 * wp * curv(xi, Yv, Xv), nabla_xy)
    if case == "vh":
        return from_lift_frame(at, 0.5 * wp * curv(xi, Xv, Yv), zero)
    ap = params.alpha * params.p
    x_xi, y_xi, x_y = Xv @ g @ xi, Yv @ g @ xi, Xv @ g @ Yv
    vert = -ap * w * (x_xi * Yv + y_xi * Xv)
    vert = vert + (ap * w + params.q) * wq * x_y * xi
    vert = vert + ap * params.q * w * wq * x_xi * y_xi * xi
    return from_lift_frame(at, zero, vert)


def lift_frame_tables(params: CGParams, at: BundlePoint) -> dict[str, np.ndarray]:
    """``nabla`` of coordinate lifts in lift-frame components.

    ``tables[case][i, k]`` is the length-``2m`` lift-frame vector of
    ``nabla_{(d_i)^?} (d_k)^?``.
    """
    m = at.dim
    eye = np.eye(m)
    out = {}
    for case in CASES:
        t = np.empty((m, m, 2 * m))
        for i in range(m):
            for k in range(m):
                h, v = to_lift_frame(cg_connection(params, case, eye[i], eye[k], at))
                t[i, k] = np.concatenate([h, v])
        out[case] = t
    return out


def tm_covariant_derivative(params: CGParams, A: SecondTangent, horizontal: Jet, vertical: Jet, tables=None) -> SecondTangent:
    """``nabla^{TM}_A U`` for ``U = horizontal^h + vertical^v``.

    The components are jets over the bundle variables of :func:`bundle_variables`
    (order >= 1), i.e. functions of ``(x, xi)`` near ``A.at``.
    """
    at = A.at
    m = at.dim
    tables = lift_frame_tables(params, at) if tables is None else tables
    a, c = to_lift_frame(A)
    direction = A.vector
    f, v = horizontal.value, vertical.value
    frame = np.concatenate([horizontal.directional(direction).value, vertical.directional(direction).value])
    frame += np.einsum("i,k,ikj->j", a, f, tables["hh"]) + np.einsum("i,k,ikj->j", a, v, tables["hv"])
    frame += np.einsum("i,k,ikj->j", c, f, tables["vh"]) + np.einsum("i,k,ikj->j", c, v, tables["vv"])
    return from_lift_frame(at, frame[:m], frame[m:])


def _coordinate_lift_jets(at: BundlePoint) -> tuple[Jet, Jet]:
    """Induced-coordinate components of ``d_k^h`` / ``d_k^v`` (rows) and the lift-frame metric, as jets."""
    m = at.dim
    x, xi = bundle_variables(at, 2)
    G = at.chart.metric_jet(x)
    gamma = christoffel_from_metric(G, dim=m)  # order 1
    xi1 = xi.truncate(1)
    gxi_map = (gamma * xi1[None, None, :]).sum(-1)  # [k, i]
    eye = Jet.constant(np.eye(m), gamma.space)
    zero = Jet.constant(np.zeros((m, m)), gamma.space)
    fields = jets.block([[eye, -gxi_map.T], [zero, eye]])  # row J = coordinates of the J-th lift
    return fields, G.truncate(1)


def verify_levi_civita(params: CGParams, chart_or_points, samples: int = 100, seed: int = 0) -> dict:
    """Torsion and metric-compatibility residuals of :func:`cg_connection`.

    Checked on all lifted coordinate fields ``d_i^h``, ``d_i^v`` at each bundle
    point (given directly, or ``samples`` points drawn on a chart). The
    derivative of ``h`` along ``TM`` and the brackets come from jet
    differentiation, not from the connection formulas.
    """
    if isinstance(chart_or_points, Chart):
        from .sampling import sample_bundle

        points = sample_bundle(chart_or_points, samples, seed)
    else:
        points = chart_or_points
    torsion = 0.0
    compat = 0.0
    count = 0
    for at in points:
        count += 1
        m = at.dim
        fields, G = _coordinate_lift_jets(at)
        U = fields.value  # U[J] coordinates of the J-th lift
        dU = fields.gradient()  # dU[J, K, L] = d_L U[J]^K
        brackets = np.einsum("bkl,al->abk", dU, U) - np.einsum("akl,bl->abk", dU, U)

        tables = lift_frame_tables(params, at)
        nab = np.empty((2 * m, 2 * m, 2 * m))  # lift-frame components of nabla_{U_A} U_B
        nab[:m, :m] = tables["hh"]
        nab[:m, m:] = tables["hv"]
        nab[m:, :m] = tables["vh"]
        nab[m:, m:] = tables["vv"]
        nab_coords = np.einsum("jk,abj->abk", U, nab)  # lift frame -> induced coordinates
        H = cg_matrix(params, at)
        diff = nab_coords - nab_coords.transpose(1, 0, 2) - brackets
        torsion = max(torsion, float(np.sqrt(np.max(np.einsum("abk,kl,abl->ab", diff, H, diff).clip(min=0.0)))))

        # h(U_B, U_C) in the lift frame: blockdiag(g, fibre block)
        xi = Jet.variables(np.concatenate([at.x, at.xi]), order=1)[m:]
        D = fiber_block(params, G, xi)
        zero = Jet.constant(np.zeros((m, m)), G.space)
        frame_metric = jets.block([[G, zero], [zero, D]])
        D0 = frame_metric.value
        dD = np.einsum("bcl,al->abc", frame_metric.gradient(), U)  # U_A h(U_B, U_C)
        lower = np.einsum("abj,jc->abc", nab, D0)
        residual = dD - lower - lower.transpose(0, 2, 1)
        compat = max(compat, float(np.max(np.abs(residual))))
    return {"points": count, "torsion": torsion, "compatibility": compat}
