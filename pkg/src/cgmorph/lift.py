"""The differential ``Phi = phi_*: TM -> TN`` and its lift identities.

In induced coordinates ``Phi(x, xi) = (phi(x), d phi_x xi)`` and

    d Phi = [[J,          0],
             [H(., xi),   J]],

with ``J`` the Jacobian and ``H`` the Hessian of ``phi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import jets
from .bundle import (
    SASAKI,
    BundlePoint,
    CGParams,
    SecondTangent,
    cg_inner,
    cg_matrix,
    cg_norm,
    connection_map,
    horizontal_lift,
    omega_alpha,
    omega_q,
    vertical_lift,
)
from .errors import InvalidUseError, RankError
from .geometry import local_geometry, vector_of
from .jets import Jet
from .maps import (
    CONFORMAL_TOL,
    RANK_TOL,
    MapJet,
    MapPointData,
    dilatation,
    horizontal_projector_jet,
    integrability_tensor,
    map_point_data,
    p_operator,
    s_tensor,
    second_fundamental_form,
)


@dataclass(frozen=True, eq=False)
class LiftedMap:
    """``Phi = phi_*`` acting on bundle points and second tangent vectors."""

    phi: MapJet

    @property
    def domain(self):
        return self.phi.domain

    @property
    def codomain(self):
        return self.phi.codomain

    def value(self, x, xi) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        return self.phi.value(x), self.phi.jacobian(x) @ np.asarray(xi, dtype=float)

    def target(self, at: BundlePoint) -> BundlePoint:
        y, eta = self.value(at.x, at.xi)
        return BundlePoint(self.codomain, y, eta)

    def differential(self, at: BundlePoint) -> np.ndarray:
        j2 = self.phi.jet(at.x, order=2)
        J, H = j2.gradient(), j2.hessian()
        n, m = J.shape
        out = np.zeros((2 * n, 2 * m))
        out[:n, :m] = J
        out[n:, :m] = np.einsum("cij,j->ci", H, at.xi)
        out[n:, m:] = J
        return out

    def jet(self, at: BundlePoint, order: int = 2) -> Jet:
        """``Phi`` as a jet in the ``2m`` bundle coordinates."""
        m = self.domain.dim
        u = Jet.variables(np.concatenate([at.x, at.xi]), order=order + 1)
        pj = self.phi.jet(u[:m])
        J = jets.stack([pj.derivative(i) for i in range(m)], axis=-1)
        fibre = jets.matmul(J, u[m:].truncate(order))
        return jets.stack([*pj.truncate(order), *fibre])


def lifted_pushforward(Phi: LiftedMap, A: SecondTangent) -> SecondTangent:
    """``Phi_* A`` at ``Phi(xi)``: coordinates ``(J a, H(a, xi) + J b)``."""
    target = Phi.target(A.at)
    return SecondTangent.from_vector(target, Phi.differential(A.at) @ A.vector)


@dataclass(frozen=True)
class LiftResiduals:
    vertical: float
    horizontal: float


def lift_residuals(Phi: LiftedMap, at: BundlePoint, X, params_n: CGParams = SASAKI) -> LiftResiduals:
    """``Phi_* X^v = (phi_* X)^v`` and ``Phi_* X^h = (phi_* X)^h + B(X, xi)^v``, as ``h``-norms."""
    X = vector_of(X)
    target = Phi.target(at)
    pX = Phi.phi.jacobian(at.x) @ X
    r_v = lifted_pushforward(Phi, vertical_lift(X, at)) - vertical_lift(pX, target)
    B = second_fundamental_form(Phi.phi, X, at.xi, at.x)
    r_h = lifted_pushforward(Phi, horizontal_lift(X, at)) - (horizontal_lift(pX, target) + vertical_lift(B, target))
    return LiftResiduals(cg_norm(params_n, r_v), cg_norm(params_n, r_h))


# -- splitting of T_xi TM ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SplitBasis:
    at: BundlePoint
    v_span: list
    h_span: list
    kernel_dim: int
    h_dim: int
    notes: list = field(default_factory=list)

    def matrix(self, which: str) -> np.ndarray:
        vecs = self.v_span if which == "v" else self.h_span
        return np.stack([A.vector for A in vecs], axis=1) if vecs else np.zeros((2 * self.at.dim, 0))


def _rank(M: np.ndarray, tol: float = RANK_TOL) -> int:
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sv > tol * max(sv[0], 1e-300))) if sv[0] > tol else 0


def kernel_dimension(Phi: LiftedMap, at: BundlePoint, tol: float = RANK_TOL) -> int:
    dPhi = Phi.differential(at)
    return dPhi.shape[1] - _rank(dPhi, tol)


def _nabla_xi_projected(phi: MapJet, at: BundlePoint, vectors: np.ndarray, horizontal: bool) -> np.ndarray:
    """``nabla_xi`` of the projected constant extensions of the given columns."""
    Ph = horizontal_projector_jet(phi, at.x, order=1)
    P = Ph if horizontal else Jet.constant(np.eye(at.dim), Ph.space) - Ph
    gamma = local_geometry(at.chart, at.x).gamma
    out = np.empty_like(vectors)
    for k, v in enumerate(vectors.T):
        F = jets.matmul(P, v)
        out[:, k] = F.gradient() @ at.xi + np.einsum("kij,i,j->k", gamma, at.xi, F.value)
    return out


def split_basis(Phi: LiftedMap, params: CGParams, at: BundlePoint, data: MapPointData | None = None, tol: float = RANK_TOL) -> SplitBasis:
    """Spanning sets of ``V^Phi`` and ``H^Phi`` at ``xi`` from frames of ``V^phi``, ``H^phi``."""
    phi = Phi.phi
    data = map_point_data(phi, at.x, tol) if data is None else data
    n = phi.codomain.dim
    if data.critical or data.rank < n:
        raise RankError(f"{phi.name} is not a submersion at {at.x.tolist()} (rank {data.rank})")
    g = local_geometry(at.chart, at.x).g
    V, H = data.vertical_basis, data.horizontal_basis
    nV = _nabla_xi_projected(phi, at, V, horizontal=False)
    nH = _nabla_xi_projected(phi, at, H, horizontal=True)
    v_span = []
    for k in range(V.shape[1]):
        v_span.append(horizontal_lift(V[:, k], at) + vertical_lift(nV[:, k], at))
        v_span.append(vertical_lift(V[:, k], at))
    wq = omega_q(params, at)
    wp = omega_alpha(params, at) ** params.p
    h_span = []
    for k in range(H.shape[1]):
        X = H[:, k]
        coef = params.q * wq * (X @ g @ at.xi)
        h_span.append(vertical_lift(X - coef * at.xi, at) + horizontal_lift(wp * nH[:, k], at))
        h_span.append(horizontal_lift(X, at))
    split = SplitBasis(at, v_span, h_span, kernel_dimension(Phi, at, tol), 0)
    h_dim = _rank(split.matrix("h"), tol)
    notes = []
    if h_dim != 2 * at.dim:
        notes.append(f"measured dim H^Phi = {h_dim} (= 2 dim N), not 2 dim M = {2 * at.dim}")
    return SplitBasis(at, v_span, h_span, split.kernel_dim, h_dim, notes)


@dataclass(frozen=True)
class SplitResiduals:
    annihilation: float  # max |Phi_* v| over v_span
    orthogonality: float  # max |h(v, w)| over v_span x h_span
    kernel_dim: int
    v_rank: int
    h_dim: int
    full_rank: int  # rank of v_span + h_span


def split_residuals(Phi: LiftedMap, params: CGParams, split: SplitBasis) -> SplitResiduals:
    dPhi = Phi.differential(split.at)
    Vm, Hm = split.matrix("v"), split.matrix("h")
    ann = float(np.max(np.abs(dPhi @ Vm))) if Vm.size else 0.0
    G = cg_matrix(params, split.at)
    orth = float(np.max(np.abs(Vm.T @ G @ Hm))) if Vm.size and Hm.size else 0.0
    both = np.concatenate([Vm, Hm], axis=1)
    return SplitResiduals(ann, orth, split.kernel_dim, _rank(Vm), split.h_dim, _rank(both))


# -- conformal identities --------------------------------------------------------


def _require_conformal(phi: MapJet, data: MapPointData, tol: float):
    verdict = dilatation(phi, data, tol)
    if not verdict.conformal:
        raise InvalidUseError(f"{phi.name} is not horizontally conformal at {data.x.tolist()}")
    return verdict.value


def lmain_residual(Phi: LiftedMap, data: MapPointData, X, at: BundlePoint, params_n: CGParams = SASAKI, tol: float = CONFORMAL_TOL) -> float:
    """``|Phi_* X^h - (phi_* X)^h - (phi_* S(X, xi))^v - P(X, xi)^v|`` in ``h_{r,s,beta}``."""
    phi = Phi.phi
    _require_conformal(phi, data, tol)
    X = vector_of(X)
    J = phi.jacobian(at.x)
    target = Phi.target(at)
    S = s_tensor(phi, X, at.xi, at.x)
    P = p_operator(phi, data, X, at.xi)
    predicted = horizontal_lift(J @ X, target) + vertical_lift(J @ S + P, target)
    return cg_norm(params_n, lifted_pushforward(Phi, horizontal_lift(X, at)) - predicted)


@dataclass(frozen=True)
class ClmainResiduals:
    cme1: float
    cme2: float
    cme3: float
    cme4: float


def clmain_residuals(Phi: LiftedMap, data: MapPointData, X, Y, xi, tol: float = CONFORMAL_TOL) -> ClmainResiduals:
    """Residuals of the four identities; ``cme3``/``cme4`` use the vertical part of ``xi``."""
    phi = Phi.phi
    lam = _require_conformal(phi, data, tol)
    x = data.x
    g = local_geometry(phi.domain, x).g
    gn = phi.codomain.metric(phi.value(x))
    J = phi.jacobian(x)
    X, Y, xi = vector_of(X), vector_of(Y), vector_of(xi)

    B = second_fundamental_form(phi, X, xi, x)
    S = s_tensor(phi, X, xi, x)
    P = p_operator(phi, data, X, xi)
    d = B - J @ S - P
    cme1 = float(np.sqrt(d @ gn @ d))
    T = integrability_tensor(phi, X, Y, x)
    cme2 = abs(B @ gn @ (J @ Y) - lam * (S @ g @ Y + xi @ g @ T))

    V = data.vertical_basis
    xv = V @ (V.T @ g @ xi)
    Bv = second_fundamental_form(phi, X, xv, x)
    Sv = J @ s_tensor(phi, X, xv, x)
    Pv = p_operator(phi, data, X, xv)
    cme3 = abs(Sv @ gn @ Pv)
    # at the zero vector of TN every h_{r,s,beta} restricts to g_N on vertical lifts
    cme4 = abs(Bv @ gn @ Bv - Sv @ gn @ Sv - Pv @ gn @ Pv)
    return ClmainResiduals(cme1, float(cme2), float(cme3), float(cme4))


def gram_lifted(Phi: LiftedMap, params_m: CGParams, params_n: CGParams, split: SplitBasis) -> np.ndarray:
    """Gram matrix of ``Phi_*`` on an ``h``-orthonormalization of ``h_span``."""
    from .geometry import gram_schmidt

    at = split.at
    G = cg_matrix(params_m, at)
    Hm = split.matrix("h")
    # keep the independent directions, in order
    keep = []
    for k in range(Hm.shape[1]):
        if _rank(Hm[:, keep + [k]]) == len(keep) + 1:
            keep.append(k)
    E = gram_schmidt(Hm[:, keep], G)
    target = Phi.target(at)
    GN = cg_matrix(params_n, target)
    pushed = Phi.differential(at) @ E
    return pushed.T @ GN @ pushed


@dataclass(frozen=True)
class L5Residuals:
    e13: float
    e14: float
    Lambda: float
    lam: float


def l5_residuals(Phi: LiftedMap, params_m: CGParams, params_n: CGParams, X, at: BundlePoint, data: MapPointData | None = None, tol: float = CONFORMAL_TOL) -> L5Residuals:
    """Residuals of the two norm identities relating ``Lambda``, ``lambda``, ``B``, ``S`` and ``P``."""
    from .maps import gram_verdict

    phi = Phi.phi
    data = map_point_data(phi, at.x) if data is None else data
    lam = _require_conformal(phi, data, tol)
    split = split_basis(Phi, params_m, at, data)
    verdict = gram_verdict(gram_lifted(Phi, params_m, params_n, split), 2 * phi.codomain.dim, tol)
    if not verdict.conformal:
        raise InvalidUseError(f"Phi is not horizontally conformal at xi={at.xi.tolist()} (deviation {verdict.value:.3g})")
    Lam = verdict.value
    X = vector_of(X)
    g = local_geometry(phi.domain, at.x).g
    x2 = X @ g @ X
    target = Phi.target(at)
    B = second_fundamental_form(phi, X, at.xi, at.x)
    e13 = abs(Lam * x2 - lam * x2 - cg_inner(params_n, vertical_lift(B, target), vertical_lift(B, target)))

    # h-orthogonal projection of S(X, xi)^v onto H^Phi
    Gm = cg_matrix(params_m, at)
    Hm = split.matrix("h")
    Sv = vertical_lift(s_tensor(phi, X, at.xi, at.x), at).vector
    coef, *_ = np.linalg.lstsq(Hm.T @ Gm @ Hm, Hm.T @ Gm @ Sv, rcond=None)
    S_perp = Hm @ coef
    s_perp2 = S_perp @ Gm @ S_perp
    P = vertical_lift(p_operator(phi, data, X, at.xi), target)
    e14 = abs(Lam * x2 + Lam * s_perp2 - lam * x2 - cg_inner(params_n, P, P))
    return L5Residuals(float(e13), float(e14), float(Lam), float(lam))


__all__ = [
    "LiftedMap",
    "lifted_pushforward",
    "lift_residuals",
    "SplitBasis",
    "split_basis",
    "split_residuals",
    "kernel_dimension",
    "lmain_residual",
    "clmain_residuals",
    "gram_lifted",
    "l5_residuals",
]
