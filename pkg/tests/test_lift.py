import numpy as np
import pytest

from cgmorph import catalog as cat
from cgmorph import jets
from cgmorph.bundle import (
    SASAKI,
    BundlePoint,
    CGParams,
    SecondTangent,
    cg_inner,
    connection_map,
    horizontal_lift,
    vertical_lift,
)
from cgmorph.errors import InvalidUseError, RankError
from cgmorph.lift import (
    LiftedMap,
    clmain_residuals,
    kernel_dimension,
    lift_residuals,
    lifted_pushforward,
    lmain_residual,
    l5_residuals,
    split_basis,
    split_residuals,
)
from cgmorph.maps import MapJet, map_point_data, second_fundamental_form
from cgmorph.sampling import sample_bundle

SUBMERSIONS = ["flat_projection", "sphere_product_projection", "heisenberg_submersion", "warped_projection", "conformal_projection"]


def _lifted(entry_id, **params):
    return LiftedMap(cat.make_map(entry_id, **params))


# -- lifted pushforward ---------------------------------------------------------


def test_linear_map_sends_horizontal_to_horizontal():
    Phi = _lifted("linear_map", matrix=[[1, 2, 0], [0, 1, -1]])
    at = BundlePoint(Phi.domain, np.array([0.1, 0.2, 0.3]), np.array([1.0, -1.0, 0.5]))
    X = np.array([0.3, 0.4, -1.0])
    out = lifted_pushforward(Phi, horizontal_lift(X, at))
    np.testing.assert_allclose(out.vector, horizontal_lift(Phi.phi.jacobian(at.x) @ X, out.at).vector, atol=1e-14)


def test_curve_horizontal_push_has_B_as_vertical_part():
    Phi = _lifted("unit_circle_curve")
    at = BundlePoint(Phi.domain, np.array([0.7]), np.array([1.5]))
    out = lifted_pushforward(Phi, horizontal_lift([1.0], at))
    B = second_fundamental_form(Phi.phi, [1.0], at.xi, at.x)
    np.testing.assert_allclose(connection_map(out), B, atol=1e-14)
    np.testing.assert_allclose(B, -1.5 * np.array([np.cos(0.7), np.sin(0.7)]), atol=1e-14)


@pytest.mark.parametrize("entry", cat.catalog(), ids=lambda e: e.id)
def test_lift_identities_on_catalog(entry):
    Phi = LiftedMap(entry.make())
    rng = np.random.default_rng(0)
    for at in sample_bundle(Phi.domain, 20, seed=1):
        X = rng.normal(size=at.dim)
        r = lift_residuals(Phi, at, X, CGParams(1, 1, 1))
        assert max(r.vertical, r.horizontal) <= 1e-8


def test_functoriality_on_flat_maps():
    f = MapJet(cat.flat(3), cat.flat(3, half=20.0), lambda x: [x[0] + x[1] ** 2, jets.sin(x[2]), x[0] * x[2]], "f")
    g = MapJet(cat.flat(3, half=20.0), cat.flat(2, half=1e3), lambda y: [y[0] * y[1], jets.exp(y[2]) + y[0]], "g")
    gf = MapJet(cat.flat(3), cat.flat(2, half=1e3), lambda x: g.value_fn(f.value_fn(x)), "g o f")
    F, G, GF = LiftedMap(f), LiftedMap(g), LiftedMap(gf)
    for at in sample_bundle(f.domain, 20, seed=2):
        A = SecondTangent.from_vector(at, np.random.default_rng(3).normal(size=6))
        two_step = lifted_pushforward(G, lifted_pushforward(F, A))
        one_step = lifted_pushforward(GF, A)
        np.testing.assert_allclose(one_step.vector, two_step.vector, atol=1e-9)
        np.testing.assert_allclose(one_step.at.xi, two_step.at.xi, atol=1e-12)


@pytest.mark.parametrize("entry_id", SUBMERSIONS)
def test_lifted_submersion_has_full_rank(entry_id):
    Phi = _lifted(entry_id)
    n = Phi.codomain.dim
    for at in sample_bundle(Phi.domain, 100, seed=4):
        assert np.linalg.matrix_rank(Phi.differential(at)) == 2 * n


def test_constant_map_lift_has_rank_zero():
    Phi = _lifted("constant_map")
    for at in sample_bundle(Phi.domain, 10, seed=0):
        assert kernel_dimension(Phi, at) == 2 * at.dim


def test_split_needs_submersion():
    Phi = _lifted("constant_map")
    at = sample_bundle(Phi.domain, 1, seed=0)[0]
    with pytest.raises(RankError):
        split_basis(Phi, SASAKI, at)


# -- splitting -------------------------------------------------------------------


def test_projection_split_at_zero_section():
    Phi = _lifted("flat_projection")
    at = BundlePoint(Phi.domain, np.array([0.1, 0.2, 0.3]), np.zeros(3))
    split = split_basis(Phi, SASAKI, at)
    V = np.abs(split.matrix("v"))
    expected = {(0, 0, 1, 0, 0, 0), (0, 0, 0, 0, 0, 1)}
    assert {tuple(np.round(col, 12)) for col in V.T} == expected
    r = split_residuals(Phi, SASAKI, split)
    assert r.annihilation == 0.0 and r.orthogonality <= 1e-15


def test_projection_split_sasaki_orthogonality():
    Phi = _lifted("flat_projection")
    for at in sample_bundle(Phi.domain, 20, seed=5):
        r = split_residuals(Phi, SASAKI, split_basis(Phi, SASAKI, at))
        assert r.orthogonality <= 1e-10


@pytest.mark.parametrize("entry_id", ["flat_projection", "sphere_product_projection", "heisenberg_submersion"])
@pytest.mark.parametrize("params", [SASAKI, CGParams(0, 1, 1), CGParams(1, 0, 1), CGParams(1, 1, 1)])
def test_split_identities(entry_id, params):
    Phi = _lifted(entry_id)
    m, n = Phi.domain.dim, Phi.codomain.dim
    for at in sample_bundle(Phi.domain, 20, seed=6):
        split = split_basis(Phi, params, at)
        r = split_residuals(Phi, params, split)
        assert r.annihilation <= 1e-8
        assert r.orthogonality <= 1e-8
        assert r.kernel_dim == 2 * (m - n) == kernel_dimension(Phi, at)
        assert r.h_dim == 2 * n


def test_horizontal_lifts_of_horizontal_vectors_are_horizontal():
    Phi = _lifted("heisenberg_submersion")
    params = CGParams(1, 2, 0.5)
    for at in sample_bundle(Phi.domain, 10, seed=7):
        data = map_point_data(Phi.phi, at.x)
        split = split_basis(Phi, params, at, data)
        X = data.horizontal_basis[:, 0]
        eta = data.vertical_basis[:, 0]
        assert np.max(np.abs(lifted_pushforward(Phi, vertical_lift(eta, at)).vector)) <= 1e-8
        for v in split.matrix("v").T:
            assert abs(cg_inner(params, horizontal_lift(X, at), SecondTangent.from_vector(at, v))) <= 1e-8


def test_split_notes_record_measured_dimension():
    Phi = _lifted("flat_projection")
    split = split_basis(Phi, SASAKI, sample_bundle(Phi.domain, 1, seed=0)[0])
    assert split.h_dim == 4
    assert any("2 dim N" in note for note in split.notes)


# -- identities for horizontally conformal maps ------------------------------------


def test_horizontal_push_formula_riemannian_submersion():
    Phi = _lifted("sphere_product_projection")
    rng = np.random.default_rng(8)
    for at in sample_bundle(Phi.domain, 10, seed=8):
        data = map_point_data(Phi.phi, at.x)
        X = data.horizontal_basis @ rng.normal(size=2)
        assert lmain_residual(Phi, data, X, at) <= 1e-9


@pytest.mark.parametrize("entry_id", ["heisenberg_submersion", "conformal_projection", "conformal_plane"])
def test_horizontal_push_formula_conformal_maps(entry_id):
    Phi = _lifted(entry_id)
    rng = np.random.default_rng(9)
    for at in sample_bundle(Phi.domain, 20, seed=9):
        data = map_point_data(Phi.phi, at.x)
        X = data.horizontal_basis @ rng.normal(size=data.rank)
        assert lmain_residual(Phi, data, X, at, CGParams(1, 1, 1)) <= 1e-7


def test_horizontal_push_formula_refused_when_nonconformal():
    Phi = _lifted("linear_map")
    at = sample_bundle(Phi.domain, 1, seed=0)[0]
    with pytest.raises(InvalidUseError):
        lmain_residual(Phi, map_point_data(Phi.phi, at.x), [1, 0, 0], at)


def test_conformal_identities_totally_geodesic():
    Phi = _lifted("flat_projection", lam=2.0)
    rng = np.random.default_rng(10)
    for at in sample_bundle(Phi.domain, 10, seed=10):
        data = map_point_data(Phi.phi, at.x)
        X, Y = (data.horizontal_basis @ rng.normal(size=2) for _ in range(2))
        r = clmain_residuals(Phi, data, X, Y, at.xi)
        assert max(r.cme1, r.cme2, r.cme3, r.cme4) <= 1e-9


@pytest.mark.parametrize("entry_id", ["heisenberg_submersion", "conformal_projection", "warped_projection"])
def test_conformal_identities_on_catalog(entry_id):
    Phi = _lifted(entry_id)
    rng = np.random.default_rng(11)
    for at in sample_bundle(Phi.domain, 20, seed=11):
        data = map_point_data(Phi.phi, at.x)
        X, Y = (data.horizontal_basis @ rng.normal(size=2) for _ in range(2))
        xi_v = data.vertical_basis @ rng.normal(size=1)
        r = clmain_residuals(Phi, data, X, Y, at.xi)
        assert max(r.cme1, r.cme2) <= 1e-7
        rv = clmain_residuals(Phi, data, X, Y, xi_v)
        assert max(rv.cme3, rv.cme4) <= 1e-8


def test_norm_identities_sasaki_totally_geodesic():
    Phi = _lifted("flat_projection", lam=2.0)
    rng = np.random.default_rng(12)
    for at in sample_bundle(Phi.domain, 10, seed=12):
        data = map_point_data(Phi.phi, at.x)
        X = data.horizontal_basis @ rng.normal(size=2)
        r = l5_residuals(Phi, SASAKI, SASAKI, X, at, data)
        assert r.Lambda == pytest.approx(2.0, abs=1e-9)
        assert max(r.e13, r.e14) <= 1e-9


def test_norm_identities_at_zero_vector():
    Phi = _lifted("flat_projection", lam=2.0)
    at = BundlePoint(Phi.domain, np.array([0.2, 0.1, -0.3]), np.zeros(3))
    r = l5_residuals(Phi, CGParams(0, 1, 1), CGParams(0, 0.5, 1), [1.0, 0.0, 0.0], at)
    assert r.Lambda == pytest.approx(r.lam, abs=1e-12)
    assert r.e13 <= 1e-12


def test_norm_identities_refused_when_lift_not_conformal():
    Phi = _lifted("flat_projection", lam=2.0)
    at = BundlePoint(Phi.domain, np.zeros(3), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(InvalidUseError):
        l5_residuals(Phi, CGParams(1, 1, 1), SASAKI, [1.0, 0.0, 0.0], at)
