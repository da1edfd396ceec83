"""Acceptance criteria 1-10, one test each.

Every test records a one-line summary of what it measured; ``conftest.py``
prints one PASS/FAIL line per criterion at the end of the run.
"""

from pathlib import Path

import numpy as np
import pytest

from cgmorph import catalog as cat
from cgmorph import finite_diff as fd
from cgmorph import geometry as geo
from cgmorph import maps as mp
from cgmorph.bundle import SASAKI, BundlePoint, CGParams, cg_norm, omega_q, verify_levi_civita
from cgmorph.certify import (
    DETECTION_FLOOR,
    certify_harmonic_morphism,
    lifted_tension,
    maint_agreement,
    measure_lifted,
    split_push,
)
from cgmorph.errors import InvalidUseError
from cgmorph.lift import LiftedMap, clmain_residuals, kernel_dimension, lift_residuals, l5_residuals, split_basis, split_residuals
from cgmorph.sampling import sample_bundle, sample_points
from cgmorph.scenario import bundle_samples, load

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
COMPLIANT = (CGParams(0, 1, 1), CGParams(0, 0.5, 1))


def _horizontal(phi, points):
    out = []
    for at in points:
        H = mp.map_point_data(phi, at.x).horizontal_basis
        out.append(BundlePoint(at.chart, at.x, H @ (H.T @ phi.domain.metric(at.x) @ at.xi)))
    return out


@pytest.mark.criterion(1, "Levi-Civita residuals of the bundle connection")
def test_criterion_01_levi_civita(record_property):
    cases = [
        ("flat/Sasaki", cat.flat(3), SASAKI, 1e-10),
        ("flat/(1,1,1)", cat.flat(3), CGParams(1, 1, 1), 1e-6),
        ("sphere/(2,3,0.5)", cat.sphere(), CGParams(2, 3, 0.5), 1e-5),
    ]
    parts, ok = [], True
    for label, chart, params, tol in cases:
        r = verify_levi_civita(params, chart, samples=100, seed=1)
        worst = max(r["torsion"], r["compatibility"])
        ok &= r["points"] == 100 and worst <= tol
        parts.append(f"{label} {worst:.1e} (tol {tol:g})")
    record_property("detail", "; ".join(parts))
    assert ok


@pytest.mark.criterion(2, "lift pushforward identities on every catalog map")
def test_criterion_02_lift_identities(record_property):
    rng = np.random.default_rng(2)
    worst = {}
    for entry in cat.catalog():
        Phi = LiftedMap(entry.make())
        w = 0.0
        for at in sample_bundle(Phi.domain, 100, seed=2):
            r = lift_residuals(Phi, at, rng.normal(size=at.dim), CGParams(1, 1, 1))
            w = max(w, r.vertical, r.horizontal)
        worst[entry.id] = w
    top = max(worst, key=worst.get)
    record_property("detail", f"{len(worst)} maps x 100 samples, max {worst[top]:.1e} ({top}), tol 1e-8")
    assert max(worst.values()) <= 1e-8


@pytest.mark.criterion(3, "splitting of the lifted tangent space")
def test_criterion_03_splitting(record_property):
    grid = [CGParams(p, q, 1) for p in (0, 1) for q in (0, 1)]
    ann = orth = 0.0
    kernel_ok = True
    for entry_id in ["flat_projection", "sphere_product_projection"]:
        Phi = LiftedMap(cat.make_map(entry_id))
        m, n = Phi.domain.dim, Phi.codomain.dim
        for params in grid:
            for at in sample_bundle(Phi.domain, 50, seed=3):
                r = split_residuals(Phi, params, split_basis(Phi, params, at))
                ann, orth = max(ann, r.annihilation), max(orth, r.orthogonality)
                kernel_ok &= r.kernel_dim == 2 * (m - n) == kernel_dimension(Phi, at)
    record_property("detail", f"annihilation {ann:.1e}, orthogonality {orth:.1e}, kernel dim 2(m-n) {'always' if kernel_ok else 'NOT always'}")
    assert ann <= 1e-8 and orth <= 1e-8 and kernel_ok


@pytest.mark.criterion(4, "compliant scaled projection is conformal with Lambda=2")
def test_criterion_04_compliant_conformal(record_property):
    Phi = LiftedMap(cat.make_map("flat_projection", lam=2.0))
    m = measure_lifted(Phi, *COMPLIANT, sample_bundle(Phi.domain, 200, seed=4))
    bad = sum(1 for v in m.verdicts if v.kind == "nonconformal")
    record_property(
        "detail",
        f"200 samples, {bad} nonconformal, max deviation {m.max_deviation:.3g} (tol 1e-7), Lambda {m.Lambda}",
    )
    assert m.conformal and m.max_deviation <= 1e-7
    assert m.Lambda == pytest.approx(2.0, abs=1e-7)


@pytest.mark.criterion(5, "single-hypothesis perturbations are detected and predicted")
def test_criterion_05_perturbation_probes(record_property):
    proj = cat.make_map("flat_projection", lam=2.0)
    probes = [
        ("p=1", proj, CGParams(1, 1, 1), COMPLIANT[1]),
        ("r=1", proj, COMPLIANT[0], CGParams(1, 0.5, 1)),
        ("s=1", proj, COMPLIANT[0], CGParams(0, 1, 1)),
        ("warped", cat.make_map("warped_projection"), SASAKI, SASAKI),
        ("heisenberg", cat.make_map("heisenberg_submersion"), SASAKI, SASAKI),
    ]
    parts, ok = [], True
    for label, phi, pm, pn in probes:
        rec = maint_agreement(phi, pm, pn, sample_bundle(phi.domain, 40, seed=5))
        dev = rec.measurement.max_deviation_unit
        ok &= rec.agreement and dev >= DETECTION_FLOOR
        parts.append(f"{label} dev {dev:.3g} agree {rec.agreement}")
    record_property("detail", "; ".join(parts))
    assert ok


@pytest.mark.criterion(6, "identities for horizontally conformal maps")
def test_criterion_06_conformal_identities(record_property):
    rng = np.random.default_rng(6)
    cme2 = cme34 = 0.0
    for entry_id in ["heisenberg_submersion", "conformal_projection", "conformal_plane", "flat_projection"]:
        phi = cat.make_map(entry_id, **({"lam": 2.0} if entry_id == "flat_projection" else {}))
        Phi = LiftedMap(phi)
        for at in sample_bundle(phi.domain, 50, seed=6):
            data = mp.map_point_data(phi, at.x)
            X, Y = (data.horizontal_basis @ rng.normal(size=data.rank) for _ in range(2))
            cme2 = max(cme2, clmain_residuals(Phi, data, X, Y, at.xi).cme2)
            if data.vertical_basis.shape[1]:
                xi_v = data.vertical_basis @ rng.normal(size=data.vertical_basis.shape[1])
                r = clmain_residuals(Phi, data, X, Y, xi_v)
                cme34 = max(cme34, r.cme3, r.cme4)
    record_property("detail", f"cme2 {cme2:.1e} (tol 1e-7); cme3/cme4 at vertical xi {cme34:.1e} (tol 1e-8)")
    assert cme2 <= 1e-7 and cme34 <= 1e-8


@pytest.mark.criterion(7, "norm identities on the compliant scenario")
def test_criterion_07_norm_identities(record_property):
    sc = load(str(SCENARIOS / "maint_compliant.json"), {"samples": 100})
    phi = sc.build_map()
    Phi = LiftedMap(phi)
    rng = np.random.default_rng(7)
    worst, refused = 0.0, 0
    for at in bundle_samples(sc, phi):
        data = mp.map_point_data(phi, at.x)
        X = data.horizontal_basis @ rng.normal(size=data.rank)
        try:
            r = l5_residuals(Phi, sc.params_m, sc.params_n, X, at, data)
        except InvalidUseError:
            refused += 1
            continue
        worst = max(worst, r.e13, r.e14)
    record_property("detail", f"100 samples, {refused} refused (lifted map not conformal), max residual {worst:.1e} (tol 1e-7)")
    assert refused == 0 and worst <= 1e-7


@pytest.mark.criterion(8, "tension formula for conformal maps agrees with the direct trace")
def test_criterion_08_tension(record_property):
    hc_entries = [
        "flat_projection",
        "sphere_product_projection",
        "heisenberg_submersion",
        "warped_projection",
        "conformal_plane",
        "conformal_projection",
        "radial_distance",
        "log_radius",
        "identity_map",
    ]
    gap = 0.0
    for entry_id in hc_entries:
        phi = cat.make_map(entry_id)
        for x in sample_points(phi.domain, 20, np.random.default_rng(8)):
            data = mp.map_point_data(phi, x)
            gap = max(gap, float(np.max(np.abs(mp.hc_tension(phi, data) - mp.tension(phi, x)))))
    Phi = LiftedMap(cat.make_map("flat_projection", lam=2.0))
    for params in [(SASAKI, SASAKI), COMPLIANT]:
        for at in _horizontal(Phi.phi, sample_bundle(Phi.domain, 20, seed=8)):
            lt = lifted_tension(Phi, *params, at)
            gap = max(gap, float(np.max(np.abs(lt.conformal - lt.direct))))
    ident = cat.make_map("identity_map", chart_id="sphere")
    lin = cat.make_map("linear_map", matrix=[[1, 2, 0], [0, 1, -1]])
    zero = max(
        max(np.max(np.abs(mp.tension(ident, x))) for x in sample_points(ident.domain, 20, np.random.default_rng(0))),
        max(np.max(np.abs(mp.tension(lin, x))) for x in sample_points(lin.domain, 20, np.random.default_rng(0))),
    )
    record_property("detail", f"conformal vs direct {gap:.1e} (tol 1e-6); identity/linear tension {zero:.1e} (tol 1e-10)")
    assert gap <= 1e-6 and zero <= 1e-10


@pytest.mark.criterion(9, "harmonic morphism certification of the lifted projection")
def test_criterion_09_certification(record_property):
    Phi = LiftedMap(cat.make_map("flat_projection", lam=2.0))
    sasaki = certify_harmonic_morphism(Phi, sample_bundle(Phi.domain, 100, seed=9), params_m=SASAKI, params_n=SASAKI)
    # the q-variant is evaluated at horizontal xi, where the lifted map is conformal
    pts = [at for at in _horizontal(Phi.phi, sample_bundle(Phi.domain, 100, seed=9)) if np.linalg.norm(at.xi) > 1e-9]
    variant = certify_harmonic_morphism(Phi, pts, params_m=COMPLIANT[0], params_n=COMPLIANT[1])
    largest, mismatch = 0.0, 0.0
    for at in pts:
        kpush = lifted_tension(Phi, *COMPLIANT, at).kappa_push
        a, K = split_push(kpush)
        push_xi = Phi.phi.jacobian(at.x) @ at.xi
        expected = 0.5 * COMPLIANT[0].q * omega_q(COMPLIANT[0], at) * np.linalg.norm(push_xi)
        largest = max(largest, cg_norm(COMPLIANT[1], kpush))
        mismatch = max(mismatch, abs(np.linalg.norm(K) - expected), float(np.max(np.abs(a))))
    record_property(
        "detail",
        f"Sasaki certified {sasaki.certified} (max tension {sasaki.max_tension:.1e}); "
        f"q-variant conformal {variant.horizontally_conformal}, certified {variant.certified}, "
        f"max |Phi_* kappa| {largest:.3g}, mismatch {mismatch:.1e} (tol 1e-6)",
    )
    assert sasaki.certified and sasaki.max_tension <= 1e-7
    assert variant.horizontally_conformal and not variant.certified
    assert largest >= 1e-3 and mismatch <= 1e-6


@pytest.mark.criterion(10, "jet derivatives agree with finite differences")
def test_criterion_10_finite_differences(record_property):
    def rel(a, ref):
        return float(np.max(np.abs(a - ref)) / max(1.0, np.max(np.abs(ref))))

    worst = 0.0
    for chart_id in cat.CHARTS:
        c = cat.chart(chart_id)
        for x in sample_points(c, 5, np.random.default_rng(10)):
            worst = max(worst, rel(geo.christoffel(c, x), fd.christoffel(c, x)))
            worst = max(worst, rel(geo.riemann_tensor(c, x), fd.riemann_tensor(c, x)))
    for entry in cat.catalog():
        phi = entry.make()
        for x in sample_points(phi.domain, 5, np.random.default_rng(10)):
            worst = max(worst, rel(mp.second_fundamental_tensor(phi, x), fd.second_fundamental_form(phi, x)))
    record_property("detail", f"{len(cat.CHARTS)} charts, {len(cat.catalog())} maps, max relative error {worst:.1e} (tol 1e-5)")
    assert worst <= 1e-5
