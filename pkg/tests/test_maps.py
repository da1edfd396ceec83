import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgmorph import catalog as cat
from cgmorph import finite_diff as fd
from cgmorph import maps as mp
from cgmorph.errors import InvalidUseError, RankError, UsageError
from cgmorph.geometry import eval_metric
from cgmorph.maps import MapJet
from cgmorph.sampling import sample_points

SUBMERSIONS = [
    "flat_projection",
    "sphere_product_projection",
    "heisenberg_submersion",
    "warped_projection",
    "conformal_projection",
    "radial_distance",
    "log_radius",
]


def _pts(phi, count=10, seed=0):
    return sample_points(phi.domain, count, np.random.default_rng(seed))


# -- pushforward and second fundamental form ----------------------------------


def test_pushforward_examples():
    ident = cat.make_map("identity_map")
    np.testing.assert_allclose(mp.pushforward(ident, [1.0, 2.0, 3.0], [0, 0, 0]), [1.0, 2.0, 3.0])
    lin = cat.make_map("linear_map", matrix=[[1, 2, 0], [0, 1, -1]])
    np.testing.assert_allclose(mp.pushforward(lin, [1.0, 1.0, 1.0], [0.1, 0, 0]), [3.0, 0.0])
    np.testing.assert_allclose(mp.pushforward(cat.make_map("conformal_plane"), [1.0, 0.0], [0, 0]), [1.0, 0.0])


def test_linear_map_is_totally_geodesic():
    lin = cat.make_map("linear_map", matrix=[[1, 2, 0], [0, 1, -1]])
    assert np.max(np.abs(mp.second_fundamental_tensor(lin, [0.3, 0.2, 0.1]))) <= 1e-14


def test_circle_curve_acceleration():
    curve = cat.make_map("unit_circle_curve")
    for t in [-1.0, 0.0, 0.4, 2.0]:
        np.testing.assert_allclose(mp.second_fundamental_form(curve, [1.0], [1.0], [t]), [-np.cos(t), -np.sin(t)], atol=1e-14)


@pytest.mark.parametrize("entry_id", SUBMERSIONS + ["conformal_plane", "unit_circle_curve"])
def test_second_fundamental_form_symmetric(entry_id):
    phi = cat.make_map(entry_id)
    rng = np.random.default_rng(1)
    for x in _pts(phi, 5):
        X, Y = rng.normal(size=(2, phi.domain.dim))
        lhs = mp.second_fundamental_form(phi, X, Y, x)
        rhs = mp.second_fundamental_form(phi, Y, X, x)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10


@pytest.mark.parametrize("entry_id", SUBMERSIONS + ["conformal_plane", "unit_circle_curve"])
def test_second_fundamental_form_matches_finite_differences(entry_id):
    phi = cat.make_map(entry_id)
    for x in _pts(phi, 3):
        ref = fd.second_fundamental_form(phi, x)
        err = np.max(np.abs(mp.second_fundamental_tensor(phi, x) - ref)) / max(1.0, np.max(np.abs(ref)))
        assert err <= 1e-5


@pytest.mark.parametrize("entry", cat.catalog(), ids=lambda e: e.id)
def test_totally_geodesic_flag_matches_B(entry):
    phi = entry.make()
    worst = max(np.max(np.abs(mp.second_fundamental_tensor(phi, x))) for x in _pts(phi, 20, seed=3))
    assert (worst <= 1e-9) == entry.declared()["totally_geodesic"]


# -- tension -------------------------------------------------------------------


def test_tension_vanishes_for_linear_and_identity():
    assert np.max(np.abs(mp.tension(cat.make_map("linear_map"), [0.1, 0.2, 0.3]))) <= 1e-10
    ident = cat.make_map("identity_map", chart_id="sphere")
    assert np.max(np.abs(mp.tension(ident, [1.0, 0.4]))) <= 1e-10


def test_log_radius_is_harmonic():
    phi = cat.make_map("log_radius")
    for x in _pts(phi):
        assert abs(mp.tension(phi, x)[0]) <= 1e-12


@pytest.mark.parametrize("entry_id", ["warped_projection", "heisenberg_submersion", "conformal_projection"])
def test_tension_is_frame_independent(entry_id):
    phi = cat.make_map(entry_id)
    rng = np.random.default_rng(4)
    for x in _pts(phi, 5):
        data = mp.map_point_data(phi, x)
        Q, _ = np.linalg.qr(rng.normal(size=(phi.domain.dim, phi.domain.dim)))
        a = mp.tension(phi, x, frame=mp.frame_in(data))
        b = mp.tension(phi, x, frame=mp.frame_in(data, rotation=Q))
        assert np.max(np.abs(a - b)) <= 1e-9


# -- splitting and dilatation ---------------------------------------------------


def test_projection_splitting():
    data = mp.map_point_data(cat.make_map("flat_projection"), [0.1, 0.2, 0.3])
    assert data.rank == 2 and not data.critical
    np.testing.assert_allclose(np.abs(data.vertical_basis[:, 0]), [0, 0, 1])
    np.testing.assert_allclose(data.horizontal_basis, [[1, 0], [0, 1], [0, 0]])


def test_constant_map_is_critical():
    data = mp.map_point_data(cat.make_map("constant_map"), [0.3, 0.1])
    assert data.critical and data.rank == 0
    assert mp.dilatation(cat.make_map("constant_map"), data).kind == "critical"


def test_heisenberg_splitting():
    phi = cat.make_map("heisenberg_submersion")
    x = np.array([0.5, 0.2, 0.1])
    data = mp.map_point_data(phi, x)
    np.testing.assert_allclose(np.abs(data.vertical_basis[:, 0]), [0, 0, 1], atol=1e-14)
    H = data.horizontal_basis
    frame = np.array([[1, 0, 0], [0, 1, x[0]]], dtype=float).T
    # same span as the frame X, Y and g-orthonormal
    np.testing.assert_allclose(H @ np.linalg.lstsq(H, frame, rcond=None)[0], frame, atol=1e-13)
    np.testing.assert_allclose(H.T @ eval_metric(phi.domain, x) @ H, np.eye(2), atol=1e-13)


def test_rank_ambiguity_warning():
    phi = cat.make_map("linear_map", matrix=[[1, 0, 0], [0, 5e-8, 0]])
    with pytest.warns(mp.RankAmbiguityWarning):
        data = mp.map_point_data(phi, [0, 0, 0])
    assert data.rank_ambiguous


def test_dilatation_examples():
    ident = cat.make_map("identity_map")
    v = mp.dilatation(ident, mp.map_point_data(ident, [0, 0, 0]))
    assert v.conformal and v.value == pytest.approx(1.0)
    cp = cat.make_map("conformal_plane")
    v = mp.dilatation(cp, mp.map_point_data(cp, [np.log(2.0), 0.0]))
    assert v.conformal and v.value == pytest.approx(4.0)
    lin = cat.make_map("linear_map")
    v = mp.dilatation(lin, mp.map_point_data(lin, [0, 0, 0]))
    assert v.kind == "nonconformal" and v.value == pytest.approx(3.0)


@pytest.mark.parametrize("entry_id", ["flat_projection", "heisenberg_submersion", "sphere_product_projection"])
def test_constant_dilatation_has_zero_gradient(entry_id):
    phi = cat.make_map(entry_id)
    for x in _pts(phi, 3):
        assert np.max(np.abs(mp.grad_dilatation(phi, x))) <= 1e-12


def test_scaled_projection_gradient_zero():
    phi = cat.make_map("flat_projection", lam=2.0)
    np.testing.assert_allclose(mp.grad_dilatation(phi, [0.1, 0.2, 0.3]), 0.0, atol=1e-12)


def test_conformal_plane_gradient():
    phi = cat.make_map("conformal_plane")
    for x in _pts(phi, 5):
        np.testing.assert_allclose(mp.grad_dilatation(phi, x), [2 * np.exp(2 * x[0]), 0.0], rtol=1e-12)


def test_gradient_refused_when_nonconformal():
    with pytest.raises(InvalidUseError):
        mp.grad_dilatation(cat.make_map("linear_map"), [0, 0, 0])


# -- basic lifts, T, S, P -----------------------------------------------------------


def test_basic_lift_examples():
    pr = cat.make_map("flat_projection")
    np.testing.assert_allclose(mp.basic_lift(pr, mp.map_point_data(pr, [0, 0, 0]), [1, 0]), [1, 0, 0])
    ident = cat.make_map("identity_map")
    np.testing.assert_allclose(mp.basic_lift(ident, mp.map_point_data(ident, [0, 0, 0]), [1, 2, 3]), [1, 2, 3])
    h = cat.make_map("heisenberg_submersion")
    x = np.array([0.7, -0.2, 0.3])
    np.testing.assert_allclose(mp.basic_lift(h, mp.map_point_data(h, x), [0, 1]), [0, 1, 0.7], atol=1e-14)


def test_basic_lift_needs_submersion():
    cm = cat.make_map("constant_map")
    with pytest.raises(RankError):
        mp.basic_lift(cm, mp.map_point_data(cm, [0, 0]), [1, 0])


def test_integrability_tensor_examples():
    pr = cat.make_map("flat_projection")
    np.testing.assert_allclose(mp.integrability_tensor(pr, [1, 0, 0], [0, 1, 0], [0, 0, 0]), 0.0, atol=1e-15)
    h = cat.make_map("heisenberg_submersion")
    x = np.array([0.4, 0.1, -0.3])
    X, Y = np.array([1.0, 0, 0]), np.array([0, 1.0, x[0]])
    np.testing.assert_allclose(mp.integrability_tensor(h, X, Y, x), [0, 0, 0.5], atol=1e-13)
    np.testing.assert_allclose(mp.integrability_tensor(h, Y, X, x), [0, 0, -0.5], atol=1e-13)
    np.testing.assert_allclose(mp.integrability_tensor(h, X, X, x), 0.0, atol=1e-14)


def test_integrability_tensor_requires_horizontal_inputs():
    h = cat.make_map("heisenberg_submersion")
    with pytest.raises(UsageError):
        mp.integrability_tensor(h, [0, 0, 1], [1, 0, 0], [0.1, 0.2, 0.3])


def test_s_tensor_examples():
    pr = cat.make_map("flat_projection", lam=2.0)
    np.testing.assert_allclose(mp.s_tensor(pr, [1, 0, 0], [0, 1, 0], [0, 0, 0]), 0.0, atol=1e-14)
    cp = cat.make_map("conformal_plane")
    np.testing.assert_allclose(mp.s_tensor(cp, [1, 0], [1, 0], [0, 0]), [1.0, 0.0], atol=1e-13)
    # X orthogonal to grad lambda, unit length: S(X, X) = -grad lambda / (2 lambda)
    np.testing.assert_allclose(mp.s_tensor(cp, [0, 1], [0, 1], [0.3, 0.1]), [-1.0, 0.0], atol=1e-12)


def test_p_operator_examples():
    pr = cat.make_map("flat_projection")
    d = mp.map_point_data(pr, [0, 0, 0])
    np.testing.assert_allclose(mp.p_operator(pr, d, [1, 0, 0], np.array([0, 0, 1.0])), 0.0, atol=1e-15)
    h = cat.make_map("heisenberg_submersion")
    x = np.array([0.5, 0.2, 0.1])
    d = mp.map_point_data(h, x)
    # horizontal xi gives zero
    np.testing.assert_allclose(mp.p_operator(h, d, [1, 0, 0], np.array([0, 1, x[0]])), 0.0, atol=1e-14)
    np.testing.assert_allclose(mp.p_operator(h, d, [1, 0, 0], np.array([0, 0, 1.0])), [0, 0.5], atol=1e-13)


# -- fibres and tension of conformal maps ------------------------------------------


def test_flat_fibres_are_totally_geodesic():
    pr = cat.make_map("flat_projection")
    d = mp.map_point_data(pr, [0.2, 0.1, 0.0])
    np.testing.assert_allclose(mp.mean_curvature_fibers(pr, d), 0.0, atol=1e-15)
    assert np.max(np.abs(mp.fiber_second_fundamental_form(pr, d))) <= 1e-15


def test_circle_fibres_curvature():
    rd = cat.make_map("radial_distance")
    for x in _pts(rd, 5):
        kappa = mp.mean_curvature_fibers(rd, mp.map_point_data(rd, x))
        assert np.sqrt(kappa @ eval_metric(rd.domain, x) @ kappa) == pytest.approx(1 / x[0], rel=1e-12)


def test_heisenberg_fibres_are_geodesic():
    h = cat.make_map("heisenberg_submersion")
    for x in _pts(h, 5):
        assert np.max(np.abs(mp.mean_curvature_fibers(h, mp.map_point_data(h, x)))) <= 1e-13


@pytest.mark.parametrize("entry_id", ["sphere_product_projection", "radial_distance", "conformal_projection", "warped_projection"])
def test_conformal_tension_matches_direct(entry_id):
    phi = cat.make_map(entry_id)
    for x in _pts(phi, 5):
        d = mp.map_point_data(phi, x)
        assert np.max(np.abs(mp.hc_tension(phi, d) - mp.tension(phi, x))) <= 1e-9


def test_conformal_tension_independent_of_lambda_in_dimension_two():
    cp = cat.make_map("conformal_projection")
    for x in _pts(cp, 5):
        assert np.max(np.abs(mp.hc_tension(cp, mp.map_point_data(cp, x)))) <= 1e-12


def test_conformal_tension_refused_when_nonconformal():
    lin = cat.make_map("linear_map")
    with pytest.raises(InvalidUseError):
        mp.hc_tension(lin, mp.map_point_data(lin, [0, 0, 0]))


@pytest.mark.parametrize("entry_id", ["flat_projection", "heisenberg_submersion", "sphere_product_projection", "conformal_projection", "log_radius"])
def test_harmonic_morphisms_are_conformal_and_harmonic(entry_id):
    phi = cat.make_map(entry_id)
    for x in _pts(phi, 10):
        assert mp.dilatation(phi, mp.map_point_data(phi, x)).conformal
        assert np.max(np.abs(mp.tension(phi, x))) <= 1e-8


@pytest.mark.parametrize("entry_id", ["flat_projection", "sphere_product_projection"])
def test_vanishing_T_and_S_force_vanishing_B(entry_id):
    phi = cat.make_map(entry_id)
    rng = np.random.default_rng(6)
    for x in _pts(phi, 10):
        d = mp.map_point_data(phi, x)
        X = d.horizontal_basis @ rng.normal(size=d.rank)
        xi = rng.normal(size=phi.domain.dim)
        assert np.max(np.abs(mp.second_fundamental_form(phi, X, xi, x))) <= 1e-8


def test_basic_field_identity_heisenberg():
    h = cat.make_map("heisenberg_submersion")
    rng = np.random.default_rng(7)
    for x in _pts(h, 10):
        Z, W = rng.normal(size=(2, 2))
        xi = np.array([0, 0, rng.normal()])
        assert mp.e12_residual(h, Z, W, xi, x) <= 1e-7


def test_basic_field_identity_radial():
    rd = cat.make_map("radial_distance")
    for x in _pts(rd, 5):
        assert mp.e12_residual(rd, [1.0], [1.0], np.array([0.0, 1.0]), x) <= 1e-7


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_lambda_field_is_squared_singular_value(a, b, c):
    phi = cat.make_map("conformal_projection")
    d = mp.map_point_data(phi, [a, b, c])
    assert mp.dilatation(phi, d).value == pytest.approx(np.exp(2 * a), rel=1e-12)


def test_mapjet_custom_map():
    phi = MapJet(cat.flat(2), cat.flat(1), lambda x: [x[0] * x[1]], "product")
    np.testing.assert_allclose(phi.jacobian([1.0, 1.5]), [[1.5, 1.0]])
    np.testing.assert_allclose(phi.hessian([1.0, 1.5])[0], [[0, 1], [1, 0]])
    assert float(phi([1.0, 1.5])[0]) == 1.5


def test_no_warnings_on_regular_points():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        mp.map_point_data(cat.make_map("heisenberg_submersion"), [0.1, 0.2, 0.3])
