"""Smooth maps between charts and their first- and second-order invariants.

A :class:`MapJet` wraps a coordinate expression written with
:mod:`cgmorph.jets` functions, so Jacobians, Hessians and all derived fields
(dilatation, horizontal projector, ...) can be differentiated exactly.

Fields on ``M`` that appear in tensorial formulas (the integrability tensor,
fibre mean curvature, basic lifts) are extended from a point by projecting the
constant-coefficient extension onto ``H`` or ``V`` with the pointwise
projector. Any smooth extension gives the same value for these tensors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets
from .errors import InvalidUseError, RankError, UsageError
from .geometry import (
    Chart,
    Point,
    Tangent,
    coords_of,
    gram_schmidt,
    local_geometry,
    orthonormalize,
    vector_of,
)
from .jets import Jet

RANK_TOL = 1e-8
CONFORMAL_TOL = 1e-7


class RankAmbiguityWarning(UserWarning):
    """A singular value of ``d phi`` lies within a factor 10 of the rank threshold."""


@dataclass(frozen=True, eq=False)
class MapJet:
    """A smooth map ``phi: M -> N`` given in coordinates."""

    domain: Chart
    codomain: Chart
    value_fn: Callable
    name: str = "map"

    def jet(self, x, order: int = 2) -> Jet:
        """Taylor expansion of ``phi`` at ``x`` (or composed with a seed jet ``x``)."""
        if not isinstance(x, Jet):
            x = Jet.variables(coords_of(self.domain, x), order=order)
        out = jets.asjet(self.value_fn(x), x.space)
        if out.shape != (self.codomain.dim,):
            out = Jet(out.space, np.broadcast_to(out.coeffs, (self.codomain.dim, out.space.size)).copy())
        return out

    def value(self, x) -> np.ndarray:
        out = np.array(self.value_fn(np.asarray(x, dtype=float)), dtype=float)
        return np.broadcast_to(out, (self.codomain.dim,)).copy()

    def __call__(self, x) -> np.ndarray:
        x = coords_of(self.domain, x)
        y = self.value(x)
        self.codomain.check(y)
        return y

    def jacobian(self, x) -> np.ndarray:
        return self.jet(x, order=1).gradient()

    def hessian(self, x) -> np.ndarray:
        return self.jet(x, order=2).hessian()


@dataclass(frozen=True, eq=False)
class MapPointData:
    """Kernel/horizontal splitting of ``d phi`` at one point."""

    x: np.ndarray
    rank: int
    vertical_basis: np.ndarray  # columns, g-orthonormal
    horizontal_basis: np.ndarray  # columns, g-orthonormal
    singular_values: np.ndarray
    critical: bool
    rank_ambiguous: bool
    dilatation: float | None = None
    notes: list = field(default_factory=list)

    @property
    def point(self) -> Point:
        return self.x


def _x(phi: MapJet, x) -> np.ndarray:
    if isinstance(x, Tangent):
        x = x.base
    return coords_of(phi.domain, x)


# -- first and second order ----------------------------------------------


def pushforward(phi: MapJet, X, x=None) -> np.ndarray:
    """``d phi_x X`` in codomain coordinates."""
    x0 = _x(phi, X if x is None else x)
    return phi.jacobian(x0) @ vector_of(X)


def second_fundamental_tensor(phi: MapJet, x) -> np.ndarray:
    """``B[c, i, j]``: Hessian + codomain Christoffels - pushed domain Christoffels."""
    x0 = _x(phi, x)
    j2 = phi.jet(x0, order=2)
    J, H = j2.gradient(), j2.hessian()
    gm = local_geometry(phi.domain, x0).gamma
    gn = local_geometry(phi.codomain, j2.value).gamma
    return H + np.einsum("cab,ai,bj->cij", gn, J, J) - np.einsum("ck,kij->cij", J, gm)


def second_fundamental_form(phi: MapJet, X, Y, x=None) -> np.ndarray:
    """``B(X, Y) = nabla^phi_X phi_* Y - phi_*(nabla_X Y)`` at ``phi(x)``."""
    x0 = _x(phi, X if x is None else x)
    return np.einsum("cij,i,j->c", second_fundamental_tensor(phi, x0), vector_of(X), vector_of(Y))


def tension(phi: MapJet, x, frame=None) -> np.ndarray:
    """``tr B`` over a g-orthonormal frame (coordinate Gram-Schmidt by default)."""
    x0 = _x(phi, x)
    if frame is None:
        frame = orthonormalize(list(np.eye(phi.domain.dim)), phi.domain, x0)
    B = second_fundamental_tensor(phi, x0)
    return sum(np.einsum("cij,i,j->c", B, e, e) for e in frame)


# -- splitting of T_xM ------------------------------------------------------


def _ordered_basis(P: np.ndarray, g: np.ndarray, count: int) -> np.ndarray:
    """Gram-Schmidt of ``P e_0, P e_1, ...`` keeping the first ``count`` independent ones."""
    chosen: list[np.ndarray] = []
    for i in range(P.shape[1]):
        if len(chosen) == count:
            break
        v = P[:, i].copy()
        for e in chosen:
            v -= (e @ g @ v) * e
        for e in chosen:
            v -= (e @ g @ v) * e
        norm = np.sqrt(max(v @ g @ v, 0.0))
        if norm > 1e-8:
            chosen.append(v / norm)
    if len(chosen) != count:
        raise RankError("could not extract a basis of the requested dimension")
    return np.array(chosen).T.reshape(P.shape[0], count)


def map_point_data(phi: MapJet, x, tol: float = RANK_TOL) -> MapPointData:
    """Vertical and horizontal bases of ``d phi_x`` by singular-value thresholding.

    Singular values are those of ``d phi`` between the metrics ``g_M`` and
    ``g_N``; rank counts those above ``tol`` times the largest.
    """
    x0 = _x(phi, x)
    m = phi.domain.dim
    g = local_geometry(phi.domain, x0).g
    gn = phi.codomain.metric(phi.value(x0))
    J = phi.jacobian(x0)
    Lm = np.linalg.cholesky(g)
    Ln = np.linalg.cholesky(gn)
    A = Ln.T @ J @ np.linalg.inv(Lm.T)
    _, sv, vt = np.linalg.svd(A)
    smax = sv[0] if sv.size else 0.0
    notes = []
    rank = 0 if smax <= tol else int(np.sum(sv > tol * smax))
    thresh = tol * smax
    ambiguous = bool(smax > tol and np.any((sv > thresh / 10) & (sv < thresh * 10)))
    if ambiguous:
        msg = f"{phi.name}: singular values {sv.tolist()} close to rank threshold at {x0.tolist()}"
        notes.append(msg)
        warnings.warn(msg, RankAmbiguityWarning, stacklevel=2)
    critical = rank == 0
    # g-orthonormal basis of H from the leading right singular vectors
    U = np.linalg.solve(Lm.T, vt[:rank].T) if rank else np.zeros((m, 0))
    P_h = U @ U.T @ g
    P_v = np.eye(m) - P_h
    horizontal = _ordered_basis(P_h, g, rank)
    vertical = _ordered_basis(P_v, g, m - rank)
    return MapPointData(x0, rank, vertical, horizontal, sv, critical, ambiguous, notes=notes)


# -- dilatation -----------------------------------------------------------


def conformality_matrix(J, ginv, gn):
    """``J g^{-1} J^T g_N``; conformal iff it equals ``lambda I`` (arrays or jets)."""
    return jets.matmul(jets.matmul(jets.matmul(J, ginv), J.T), gn)


@dataclass(frozen=True)
class DilatationVerdict:
    kind: str  # "critical" | "conformal" | "nonconformal"
    value: float  # lambda for conformal, eigenvalue spread for nonconformal
    gram: np.ndarray

    @property
    def conformal(self) -> bool:
        return self.kind == "conformal"

    def __str__(self) -> str:
        if self.kind == "critical":
            return "critical"
        return f"{self.kind}({self.value:.6g})"


def gram_verdict(G: np.ndarray, dim_target: int, tol: float, critical: bool = False) -> DilatationVerdict:
    """Compare a Gram matrix of ``d phi`` on an orthonormal horizontal basis with ``lambda I``.

    Missing horizontal directions (rank below ``dim_target``) count as zero
    eigenvalues. The deviation is the spread ``max - min`` of the eigenvalues.
    """
    if critical:
        return DilatationVerdict("critical", 0.0, G)
    eig = np.linalg.eigvalsh(0.5 * (G + G.T)) if G.size else np.zeros(0)
    eig = np.concatenate([eig, np.zeros(dim_target - eig.size)])
    lam = float(eig.sum() / dim_target)
    spread = float(eig.max() - eig.min())
    if spread <= tol and lam > 0:
        return DilatationVerdict("conformal", lam, G)
    return DilatationVerdict("nonconformal", spread, G)


def dilatation(phi: MapJet, data: MapPointData, tol: float = CONFORMAL_TOL) -> DilatationVerdict:
    x0 = data.x
    gn = phi.codomain.metric(phi.value(x0))
    pushed = phi.jacobian(x0) @ data.horizontal_basis
    G = pushed.T @ gn @ pushed
    return gram_verdict(G, phi.codomain.dim, tol, data.critical)


def _geometry_jets(phi: MapJet, x0: np.ndarray, order: int):
    """Jets of ``J``, ``g^{-1}`` and ``g_N o phi`` at ``x0`` to ``order``."""
    m = phi.domain.dim
    xj = Jet.variables(x0, order=order + 1)
    pj = phi.jet(xj)
    J = jets.stack([pj.derivative(i) for i in range(m)], axis=-1)
    ginv = jets.inv(phi.domain.metric_jet(xj.truncate(order)))
    gn = phi.codomain.metric_jet(pj.truncate(order))
    return J, ginv, gn


def dilatation_jet(phi: MapJet, x, order: int = 1) -> Jet:
    """``lambda = tr(J g^{-1} J^T g_N) / n`` as a jet in the domain coordinates."""
    x0 = _x(phi, x)
    C = conformality_matrix(*_geometry_jets(phi, x0, order))
    n = phi.codomain.dim
    return sum(C[i, i] for i in range(n)) * (1.0 / n)


def conformal_probe(phi: MapJet, x, tol: float = CONFORMAL_TOL) -> float:
    """Largest entry of the order-1 jet of ``J g^{-1} J^T g_N - lambda I``.

    Zero exactly when ``phi`` is horizontally conformal at ``x`` to first
    order, which is what differentiating ``lambda`` requires.
    """
    x0 = _x(phi, x)
    C = conformality_matrix(*_geometry_jets(phi, x0, 1))
    n = phi.codomain.dim
    lam = sum(C[i, i] for i in range(n)) * (1.0 / n)
    D = C - Jet.constant(np.eye(n), C.space) * lam
    return float(np.max(np.abs(D.coeffs)))


def grad_dilatation(phi: MapJet, x, tol: float = CONFORMAL_TOL) -> np.ndarray:
    """``grad lambda`` (index raised with ``g``); refused unless conformal to first order."""
    x0 = _x(phi, x)
    scale = max(1.0, float(dilatation_jet(phi, x0, order=0).value))
    if conformal_probe(phi, x0) > tol * scale:
        raise InvalidUseError(f"{phi.name} is not horizontally conformal near {x0.tolist()}; grad lambda undefined")
    lam = dilatation_jet(phi, x0, order=1)
    return local_geometry(phi.domain, x0).ginv @ lam.gradient()


# -- horizontal / vertical extensions ----------------------------------------


def horizontal_projector_jet(phi: MapJet, x0: np.ndarray, order: int = 1) -> Jet:
    """``P_H = g^{-1} J^T (J g^{-1} J^T)^{-1} J`` as a jet (submersion points only)."""
    m = phi.domain.dim
    xj = Jet.variables(x0, order=order + 1)
    pj = phi.jet(xj)
    J = jets.stack([pj.derivative(i) for i in range(m)], axis=-1)
    ginv = jets.inv(phi.domain.metric_jet(xj.truncate(order)))
    gJt = jets.matmul(ginv, J.T)
    return jets.matmul(jets.matmul(gJt, jets.inv(jets.matmul(J, gJt))), J)


def _require_submersion(phi: MapJet, data: MapPointData) -> None:
    if data.critical or data.rank < phi.codomain.dim:
        raise RankError(f"{phi.name} is not a submersion at {data.x.tolist()} (rank {data.rank})")


def _projectors(phi: MapJet, x0: np.ndarray):
    P = horizontal_projector_jet(phi, x0, order=1)
    eye = Jet.constant(np.eye(phi.domain.dim), P.space)
    return P, eye - P


def _field_derivative(F: Jet, X: np.ndarray) -> np.ndarray:
    """``X(F)`` for a vector-valued jet ``F`` at the expansion point."""
    return F.gradient() @ X


def _covariant(chart: Chart, x0, X: np.ndarray, F: Jet) -> np.ndarray:
    """``nabla_X F`` for a vector field given by its jet at ``x0``."""
    return _field_derivative(F, X) + np.einsum("kij,i,j->k", local_geometry(chart, x0).gamma, X, F.value)


def is_horizontal(phi: MapJet, X, x, tol: float = 1e-9) -> bool:
    x0 = _x(phi, x)
    _, Pv = _projectors(phi, x0)
    X = vector_of(X)
    return bool(np.linalg.norm(Pv.value @ X) <= tol * max(1.0, np.linalg.norm(X)))


def basic_lift(phi: MapJet, data: MapPointData, Z) -> np.ndarray:
    """The horizontal vector ``Z^`` with ``phi_* Z^ = Z``."""
    if data.critical:
        raise RankError(f"{phi.name}: critical point, no horizontal lift")
    Z = vector_of(Z)
    A = phi.jacobian(data.x) @ data.horizontal_basis
    c, *_ = np.linalg.lstsq(A, Z, rcond=None)
    if np.linalg.norm(A @ c - Z) > 1e-9 * max(1.0, np.linalg.norm(Z)):
        raise RankError(f"{phi.name}: {Z.tolist()} is not in the image of d phi at {data.x.tolist()}")
    return data.horizontal_basis @ c


def _basic_field_jet(phi: MapJet, x0: np.ndarray, Z: np.ndarray) -> Jet:
    """Basic lift of the constant-coefficient field ``Z`` on ``N`` as a jet on ``M``."""
    m = phi.domain.dim
    xj = Jet.variables(x0, order=2)
    pj = phi.jet(xj)
    J = jets.stack([pj.derivative(i) for i in range(m)], axis=-1)
    ginv = jets.inv(phi.domain.metric_jet(xj.truncate(1)))
    gJt = jets.matmul(ginv, J.T)
    return jets.matmul(jets.matmul(gJt, jets.inv(jets.matmul(J, gJt))), Z)


def integrability_tensor(phi: MapJet, X, Y, x) -> np.ndarray:
    """``T(X, Y) = 1/2 [X, Y]^vertical`` for horizontal ``X``, ``Y``."""
    x0 = _x(phi, x)
    X, Y = vector_of(X), vector_of(Y)
    Ph, Pv = _projectors(phi, x0)
    for name, V in (("X", X), ("Y", Y)):
        if np.linalg.norm(Pv.value @ V) > 1e-9 * max(1.0, np.linalg.norm(V)):
            raise UsageError(f"integrability tensor needs horizontal arguments; {name} has a vertical part")
    Xf, Yf = jets.matmul(Ph, X), jets.matmul(Ph, Y)
    bracket = _field_derivative(Yf, Xf.value) - _field_derivative(Xf, Yf.value)
    return 0.5 * Pv.value @ bracket


def s_tensor(phi: MapJet, X, Y, x) -> np.ndarray:
    """``S(X,Y) = ((X lam) Y + (Y lam) X - <X,Y> grad lam) / (2 lam)``."""
    x0 = _x(phi, x)
    lam = float(dilatation_jet(phi, x0, order=0).value)
    if not lam > 0:
        raise InvalidUseError(f"dilatation {lam} is not positive at {x0.tolist()}")
    grad = grad_dilatation(phi, x0)
    g = local_geometry(phi.domain, x0).g
    X, Y = vector_of(X), vector_of(Y)
    return ((X @ g @ grad) * Y + (Y @ g @ grad) * X - (X @ g @ Y) * grad) / (2.0 * lam)


def p_operator(phi: MapJet, data: MapPointData, X, xi, x=None) -> np.ndarray:
    """``P(X, xi) = sum_i <xi, T(X, e_i)> phi_* e_i`` over the horizontal basis."""
    x0 = data.x if x is None else _x(phi, x)
    g = local_geometry(phi.domain, x0).g
    J = phi.jacobian(x0)
    xi = vector_of(xi)
    out = np.zeros(phi.codomain.dim)
    for e in data.horizontal_basis.T:
        out += (xi @ g @ integrability_tensor(phi, X, e, x0)) * (J @ e)
    return out


def fiber_second_fundamental_form(phi: MapJet, data: MapPointData) -> np.ndarray:
    """``(nabla_{v_a} v_b)^horizontal`` for the vertical basis, stacked ``[a, b, :]``."""
    _require_submersion(phi, data)
    x0 = data.x
    Ph, Pv = _projectors(phi, x0)
    V = data.vertical_basis
    k = V.shape[1]
    out = np.zeros((k, k, phi.domain.dim))
    for b in range(k):
        Wf = jets.matmul(Pv, V[:, b])
        for a in range(k):
            out[a, b] = Ph.value @ _covariant(phi.domain, x0, V[:, a], Wf)
    return out


def mean_curvature_fibers(phi: MapJet, data: MapPointData) -> np.ndarray:
    """``kappa = (1/(m-n)) sum_a (nabla_{e_a} e_a)^horizontal`` over a vertical frame."""
    k = data.vertical_basis.shape[1]
    if k == 0:
        raise UsageError("mean curvature of fibres needs dim M > dim N")
    II = fiber_second_fundamental_form(phi, data)
    return np.einsum("aak->k", II) / k


def hc_tension(phi: MapJet, data: MapPointData, tol: float = CONFORMAL_TOL) -> np.ndarray:
    """Tension of a horizontally conformal map from ``lambda`` and fibre mean curvature."""
    verdict = dilatation(phi, data, tol)
    if not verdict.conformal:
        raise InvalidUseError(f"{phi.name} is not horizontally conformal at {data.x.tolist()}")
    m, n = phi.domain.dim, phi.codomain.dim
    J = phi.jacobian(data.x)
    lam = verdict.value
    out = -0.5 * (n - 2) * (J @ grad_dilatation(phi, data.x, tol)) / lam
    if m > n:
        out = out - (m - n) * (J @ mean_curvature_fibers(phi, data))
    return out


def e12_residual(phi: MapJet, Z, W, xi, x) -> float:
    """``|<(nabla_xi Z^)^perp, W^> + <xi, T(Z^, W^)>|`` for basic lifts and vertical ``xi``."""
    x0 = _x(phi, x)
    g = local_geometry(phi.domain, x0).g
    Zf = _basic_field_jet(phi, x0, vector_of(Z))
    Wv = _basic_field_jet(phi, x0, vector_of(W)).value
    Ph, _ = _projectors(phi, x0)
    xi = vector_of(xi)
    lhs = -(Ph.value @ _covariant(phi.domain, x0, xi, Zf)) @ g @ Wv
    rhs = xi @ g @ integrability_tensor(phi, Zf.value, Wv, x0)
    return float(abs(lhs - rhs))


def frame_in(data: MapPointData, rotation: np.ndarray | None = None) -> list[np.ndarray]:
    """Full g-orthonormal frame (horizontal then vertical), optionally rotated."""
    E = np.concatenate([data.horizontal_basis, data.vertical_basis], axis=1)
    if rotation is not None:
        E = E @ rotation
    return [E[:, i] for i in range(E.shape[1])]


__all__ = [
    "MapJet",
    "MapPointData",
    "DilatationVerdict",
    "RankAmbiguityWarning",
    "pushforward",
    "second_fundamental_form",
    "second_fundamental_tensor",
    "tension",
    "map_point_data",
    "dilatation",
    "dilatation_jet",
    "conformal_probe",
    "grad_dilatation",
    "horizontal_projector_jet",
    "basic_lift",
    "integrability_tensor",
    "is_horizontal",
    "s_tensor",
    "p_operator",
    "fiber_second_fundamental_form",
    "mean_curvature_fibers",
    "hc_tension",
    "e12_residual",
    "gram_verdict",
    "conformality_matrix",
    "frame_in",
    "gram_schmidt",
]
