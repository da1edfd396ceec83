"""Conformality and harmonic-morphism verdicts for ``phi`` and ``Phi = phi_*``.

The certifier only measures. Predictions come from the closed-form conditions
(totally geodesic, constant dilatation, ``p alpha = r beta = 0``,
``q = lambda s``) evaluated on the same samples, and every report stores the
residuals the booleans were derived from.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import jets
from .bundle import (
    BundlePoint,
    CGParams,
    SecondTangent,
    bundle_variables,
    cg_matrix,
    cg_norm,
    connection_map,
    from_lift_frame,
    lift_frame_tables,
    omega_q,
    tm_covariant_derivative,
    tm_metric_jet,
)
from .errors import UsageError
from .geometry import christoffel_from_metric, gram_schmidt, local_geometry
from .jets import Jet
from .lift import LiftedMap, gram_lifted, lifted_pushforward, split_basis
from .maps import (
    CONFORMAL_TOL,
    RANK_TOL,
    DilatationVerdict,
    MapJet,
    dilatation,
    fiber_second_fundamental_form,
    gram_verdict,
    integrability_tensor,
    map_point_data,
    second_fundamental_tensor,
    tension,
)

DETECTION_FLOOR = 1e-3


def _check_dims(phi: MapJet) -> None:
    m, n = phi.domain.dim, phi.codomain.dim
    if n < 2 or m <= n:
        raise UsageError(f"lifted certification needs dim M > dim N >= 2, got m={m}, n={n}")


# -- conformality of Phi ---------------------------------------------------------


def hc_verdict_lifted(Phi: LiftedMap, params_m: CGParams, params_n: CGParams, at: BundlePoint, tol: float = CONFORMAL_TOL, data=None) -> DilatationVerdict:
    """Compare the Gram matrix of ``Phi_*`` on ``H^Phi`` with ``Lambda I``."""
    phi = Phi.phi
    data = map_point_data(phi, at.x) if data is None else data
    if data.critical:
        # Phi is critical exactly over the critical set of phi
        return DilatationVerdict("critical", 0.0, np.zeros((0, 0)))
    split = split_basis(Phi, params_m, at, data)
    return gram_verdict(gram_lifted(Phi, params_m, params_n, split), 2 * phi.codomain.dim, tol)


# -- tension of Phi ------------------------------------------------------------------


def _tm_christoffel(params: CGParams, at: BundlePoint) -> np.ndarray:
    """Christoffel symbols of ``h`` in induced coordinates, from the metric jet alone."""
    H = tm_metric_jet(params, at, order=1)
    return christoffel_from_metric(H, dim=2 * at.dim).value


def lifted_tension_direct(Phi: LiftedMap, params_m: CGParams, params_n: CGParams, at: BundlePoint) -> np.ndarray:
    """``tau(Phi) = h^{AB} (Hess Phi + Gamma^TN(dPhi, dPhi) - dPhi Gamma^TM)_{AB}``.

    Uses only the two bundle metrics and jets of ``Phi``; it does not touch the
    closed-form Levi-Civita connection, so it cross-checks the conformal route.
    """
    target = Phi.target(at)
    j2 = Phi.jet(at, order=2)
    D, Hs = j2.gradient(), j2.hessian()
    gm = _tm_christoffel(params_m, at)
    gn = _tm_christoffel(params_n, target)
    hinv = np.linalg.inv(tm_metric_jet(params_m, at, order=0).value)
    B = Hs + np.einsum("cde,dA,eB->cAB", gn, D, D) - np.einsum("cD,DAB->cAB", D, gm)
    return np.einsum("AB,cAB->c", hinv, B)


def lifted_dilatation_jet(Phi: LiftedMap, params_m: CGParams, params_n: CGParams, at: BundlePoint, order: int = 1) -> Jet:
    """``Lambda = tr(dPhi h^{-1} dPhi^T h_N(Phi)) / 2n`` as a jet over the bundle coordinates."""
    n = Phi.codomain.dim
    m2 = 2 * at.dim
    pj = Phi.jet(at, order=order + 1)
    dPhi = jets.stack([pj.derivative(i) for i in range(m2)], axis=-1)
    hinv = jets.inv(tm_metric_jet(params_m, at, order=order))
    hn = tm_metric_jet(params_n, Phi.target(at), order=order)
    hn = jets.stack([jets.stack([hn[i, j].compose(pj.truncate(order)) for j in range(2 * n)]) for i in range(2 * n)])
    C = jets.matmul(jets.matmul(jets.matmul(dPhi, hinv), dPhi.T), hn)
    return sum(C[i, i] for i in range(2 * n)) * (1.0 / (2 * n))


def _vertical_projector_jet(Phi: LiftedMap, params_m: CGParams, at: BundlePoint) -> Jet:
    """``I - h^{-1} dPhi^T (dPhi h^{-1} dPhi^T)^{-1} dPhi`` over the bundle coordinates."""
    m2 = 2 * at.dim
    pj = Phi.jet(at, order=2)
    dPhi = jets.stack([pj.derivative(i) for i in range(m2)], axis=-1)
    hinv = jets.inv(tm_metric_jet(params_m, at, order=1))
    hDt = jets.matmul(hinv, dPhi.T)
    Ph = jets.matmul(jets.matmul(hDt, jets.inv(jets.matmul(dPhi, hDt))), dPhi)
    return Jet.constant(np.eye(m2), Ph.space) - Ph


def _nabla_tm(params: CGParams, A: SecondTangent, field_jet: Jet, tables) -> SecondTangent:
    """``nabla^TM_A U`` for a field given by induced coordinates (jet over the bundle variables)."""
    at = A.at
    m = at.dim
    x, xi = bundle_variables(at, 2)
    gamma = christoffel_from_metric(at.chart.metric_jet(x), dim=m)  # order 1
    a, b = field_jet[:m], field_jet[m:]
    vert = b + (gamma * a[None, :, None] * xi.truncate(1)[None, None, :]).sum((1, 2))
    return tm_covariant_derivative(params, A, a, vert, tables)


def lifted_mean_curvature(Phi: LiftedMap, params_m: CGParams, at: BundlePoint) -> SecondTangent:
    """``kappa_Phi = (1 / 2(m-n)) sum (nabla^TM_W W)^perp`` over an h-orthonormal frame of ``V^Phi``."""
    split = split_basis(Phi, params_m, at)
    G = cg_matrix(params_m, at)
    W = gram_schmidt(split.matrix("v"), G)
    Pv = _vertical_projector_jet(Phi, params_m, at)
    Ph0 = np.eye(2 * at.dim) - Pv.value
    tables = lift_frame_tables(params_m, at)
    total = np.zeros(2 * at.dim)
    for w in W.T:
        A = SecondTangent.from_vector(at, w)
        total += Ph0 @ _nabla_tm(params_m, A, jets.matmul(Pv, w), tables).vector
    return SecondTangent.from_vector(at, total / W.shape[1])


@dataclass(frozen=True)
class LiftedTension:
    conformal: np.ndarray  # from Lambda and kappa_Phi
    direct: np.ndarray  # trace of the second fundamental form of Phi
    Lambda: float
    kappa_push: SecondTangent  # Phi_*(kappa_Phi)


def lifted_tension(Phi: LiftedMap, params_m: CGParams, params_n: CGParams, at: BundlePoint) -> LiftedTension:
    """Tension of ``Phi`` through the horizontally-conformal formula and directly."""
    n = Phi.codomain.dim
    m = Phi.domain.dim
    lam = lifted_dilatation_jet(Phi, params_m, params_n, at, order=1)
    Lam = float(lam.value)
    hinv = np.linalg.inv(tm_metric_jet(params_m, at, order=0).value)
    grad_ln = hinv @ lam.gradient() / Lam
    dPhi = Phi.differential(at)
    kappa = lifted_mean_curvature(Phi, params_m, at)
    kpush = lifted_pushforward(Phi, kappa)
    tau = -(n - 1) * (dPhi @ grad_ln) - 2 * (m - n) * kpush.vector
    return LiftedTension(tau, lifted_tension_direct(Phi, params_m, params_n, at), Lam, kpush)


# -- certificates ---------------------------------------------------------------


@dataclass
class Certificate:
    certified: bool
    horizontally_conformal: bool
    harmonic: bool
    max_tension: float
    max_deviation: float
    samples: int
    critical: int
    records: list = field(default_factory=list)


def certify_harmonic_morphism(target, samples, tol: float = CONFORMAL_TOL, params_m: CGParams | None = None, params_n: CGParams | None = None, tension_tol: float | None = None) -> Certificate:
    """Horizontally conformal and harmonic at every sample.

    ``target`` is a :class:`MapJet` (samples are points) or a
    :class:`LiftedMap` (samples are bundle points; the tension is the
    conformal formula in ``Lambda`` and ``kappa_Phi``).
    """
    tension_tol = tol if tension_tol is None else tension_tol
    records = []
    hc = harmonic = True
    max_tau = max_dev = 0.0
    critical = 0
    for s in samples:
        if isinstance(target, LiftedMap):
            _check_dims(target.phi)
            verdict = hc_verdict_lifted(target, params_m, params_n, s, tol)
            norm = np.inf
            if verdict.conformal:
                tau = lifted_tension(target, params_m, params_n, s).conformal
                norm = float(np.sqrt(max(tau @ cg_matrix(params_n, target.target(s)) @ tau, 0.0)))
        else:
            x = s.x if isinstance(s, BundlePoint) else s
            data = map_point_data(target, x)
            verdict = dilatation(target, data, tol)
            tau = tension(target, x)
            gn = target.codomain.metric(target.value(data.x))
            norm = float(np.sqrt(tau @ gn @ tau))
        if verdict.kind == "critical":
            critical += 1
            records.append({"verdict": "critical", "tension": None})
            continue
        hc &= verdict.conformal
        if not verdict.conformal:
            max_dev = max(max_dev, verdict.value)
        harmonic &= norm <= tension_tol
        max_tau = max(max_tau, norm)
        records.append({"verdict": str(verdict), "tension": norm})
    return Certificate(bool(hc and harmonic), bool(hc), bool(harmonic), max_tau, max_dev, len(records), critical, records)


# -- theorem conditions ------------------------------------------------------------


@dataclass
class TheoremConditions:
    totally_geodesic: bool
    max_B: float
    hc_constant_lambda: bool
    lam: float
    lam_spread: float
    max_hc_deviation: float
    p_alpha_zero: bool
    r_beta_zero: bool
    q_equals_lambda_s: bool
    q_minus_lambda_s: float
    sasaki_both: bool
    max_T: float
    max_fiber_II: float

    @property
    def maint(self) -> bool:
        """Predicted horizontal conformality of ``Phi``."""
        return self.totally_geodesic and self.hc_constant_lambda and self.p_alpha_zero and self.r_beta_zero and self.q_equals_lambda_s

    @property
    def hmt(self) -> bool:
        """Predicted harmonic-morphism property of ``Phi``."""
        return self.totally_geodesic and self.hc_constant_lambda and self.sasaki_both

    @property
    def integrable_horizontal(self) -> bool:
        return self.max_T <= 1e-7

    @property
    def fibers_totally_geodesic(self) -> bool:
        return self.max_fiber_II <= 1e-7

    def as_dict(self) -> dict:
        out = {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in self.__dict__.items()}
        out.update(maint=self.maint, hmt=self.hmt)
        return out


def _points(samples):
    return [s.x if isinstance(s, BundlePoint) else np.asarray(s, dtype=float) for s in samples]


def evaluate_theorem_conditions(phi: MapJet, params_m: CGParams, params_n: CGParams, samples, tol: float = CONFORMAL_TOL) -> TheoremConditions:
    max_B = max_dev = max_T = max_II = 0.0
    lams = []
    all_hc = True
    for x in _points(samples):
        B = second_fundamental_tensor(phi, x)
        max_B = max(max_B, float(np.max(np.abs(B))))
        data = map_point_data(phi, x)
        v = dilatation(phi, data, tol)
        if v.kind == "critical":
            continue
        if v.conformal:
            lams.append(v.value)
        else:
            all_hc = False
            max_dev = max(max_dev, v.value)
        if data.rank == phi.codomain.dim and data.rank < phi.domain.dim:
            H = data.horizontal_basis
            for i in range(H.shape[1]):
                for j in range(i + 1, H.shape[1]):
                    max_T = max(max_T, float(np.max(np.abs(integrability_tensor(phi, H[:, i], H[:, j], x)))))
            max_II = max(max_II, float(np.max(np.abs(fiber_second_fundamental_form(phi, data)))))
    lam = float(np.mean(lams)) if lams else float("nan")
    spread = float(np.ptp(lams)) if lams else float("inf")
    hc_const = all_hc and bool(lams) and spread <= tol * (1 + lam)
    qls = abs(params_m.q - lam * params_n.q) if lams else float("inf")
    return TheoremConditions(
        totally_geodesic=max_B <= tol,
        max_B=max_B,
        hc_constant_lambda=hc_const,
        lam=lam,
        lam_spread=spread,
        max_hc_deviation=max_dev,
        p_alpha_zero=params_m.p * params_m.alpha == 0,
        r_beta_zero=params_n.p * params_n.alpha == 0,
        q_equals_lambda_s=qls <= tol * (1 + params_m.q),
        q_minus_lambda_s=qls,
        sasaki_both=params_m.sasaki and params_n.sasaki,
        max_T=max_T,
        max_fiber_II=max_II,
    )


@dataclass
class LiftedMeasurement:
    verdicts: list
    conformal: bool
    Lambda: float
    Lambda_spread: float
    max_deviation: float
    max_deviation_unit: float  # over samples with |xi| = 1
    critical: int


def measure_lifted(Phi: LiftedMap, params_m: CGParams, params_n: CGParams, samples, tol: float = CONFORMAL_TOL) -> LiftedMeasurement:
    verdicts = []
    lams = []
    max_dev = max_unit = 0.0
    critical = 0
    for at in samples:
        v = hc_verdict_lifted(Phi, params_m, params_n, at, tol)
        verdicts.append(v)
        if v.kind == "critical":
            critical += 1
            continue
        if v.conformal:
            lams.append(v.value)
            continue
        max_dev = max(max_dev, v.value)
        g = local_geometry(at.chart, at.x).g
        if abs(np.sqrt(at.xi @ g @ at.xi) - 1.0) < 1e-9:
            max_unit = max(max_unit, v.value)
    noncrit = len(samples) - critical
    lam = float(np.mean(lams)) if lams else float("nan")
    spread = float(np.ptp(lams)) if lams else float("inf")
    conformal = noncrit > 0 and len(lams) == noncrit and spread <= tol * (1 + lam)
    return LiftedMeasurement(verdicts, conformal, lam, spread, max_dev, max_unit, critical)


@dataclass
class AgreementRecord:
    predicted: bool
    measured: bool
    agreement: bool
    conditions: TheoremConditions
    measurement: LiftedMeasurement

    def as_dict(self) -> dict:
        m = self.measurement
        return {
            "predicted": self.predicted,
            "measured": self.measured,
            "agreement": self.agreement,
            "conditions": self.conditions.as_dict(),
            "Lambda": m.Lambda,
            "Lambda_spread": m.Lambda_spread,
            "max_deviation": m.max_deviation,
            "max_deviation_unit_xi": m.max_deviation_unit,
            "critical": m.critical,
        }


def maint_agreement(phi: MapJet, params_m: CGParams, params_n: CGParams, samples, tol: float = CONFORMAL_TOL) -> AgreementRecord:
    """Predicted (closed-form conditions) versus measured conformality of ``Phi``."""
    _check_dims(phi)
    cond = evaluate_theorem_conditions(phi, params_m, params_n, samples, tol)
    meas = measure_lifted(LiftedMap(phi), params_m, params_n, samples, tol)
    return AgreementRecord(cond.maint, meas.conformal, cond.maint == meas.conformal, cond, meas)


def t_sweep_diagnostic(phi: MapJet, params_m: CGParams, params_n: CGParams, x, xi, t_grid, tol: float = CONFORMAL_TOL) -> list[dict]:
    """Deviation from conformality of ``Phi`` at ``t xi`` for each ``t``; raw values only."""
    Phi = LiftedMap(phi)
    rows = []
    for t in t_grid:
        at = BundlePoint(phi.domain, x, float(t) * np.asarray(xi, dtype=float))
        v = hc_verdict_lifted(Phi, params_m, params_n, at, tol)
        eig = np.linalg.eigvalsh(0.5 * (v.gram + v.gram.T)) if v.gram.size else np.zeros(1)
        rows.append({"t": float(t), "deviation": float(np.ptp(eig)), "Lambda": float(eig.mean()), "verdict": v.kind})
    return rows


def kappa_vertical_prediction(Phi: LiftedMap, params_m: CGParams, at: BundlePoint) -> np.ndarray:
    """``1/2 q omega_q(xi) phi_* xi``: the vertical part of ``Phi_*(kappa_Phi)`` predicted for horizontal ``xi``."""
    return 0.5 * params_m.q * omega_q(params_m, at) * (Phi.phi.jacobian(at.x) @ at.xi)


def split_push(kpush: SecondTangent) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal and vertical (connection-map) parts of a vector on ``TN``."""
    return kpush.a.copy(), connection_map(kpush)


__all__ = [
    "hc_verdict_lifted",
    "lifted_tension",
    "lifted_tension_direct",
    "lifted_dilatation_jet",
    "lifted_mean_curvature",
    "certify_harmonic_morphism",
    "Certificate",
    "TheoremConditions",
    "evaluate_theorem_conditions",
    "measure_lifted",
    "maint_agreement",
    "AgreementRecord",
    "t_sweep_diagnostic",
    "kappa_vertical_prediction",
    "split_push",
    "cg_norm",
    "from_lift_frame",
]
