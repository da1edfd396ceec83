"""Single-chart Riemannian manifolds.

Everything is computed from the metric component function of a :class:`Chart`
by jet arithmetic: Christoffel symbols need one derivative of ``g``, the
curvature tensor two. The generic routines :func:`christoffel_from_metric` and
:func:`riemann_from_christoffel` work on any metric jet, which is how the
tangent bundle module reuses them for ``TM``.

Conventions: ``gamma[k, i, j]`` is the symbol with upper index ``k``;
``R[l, i, j, k]`` are the components of
``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``, so the
unit sphere has ``<R(X,Y)Y, X> = |X|^2 |Y|^2 - <X,Y>^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from . import jets
from .errors import DegeneracyError, DomainError, SingularityError, UsageError
from .jets import Jet

SYMMETRY_TOL = 1e-12
EIGEN_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class Chart:
    """One coordinate patch of a Riemannian manifold.

    ``metric_fn`` maps a coordinate sequence to a nested ``dim x dim`` sequence;
    it must be written with :mod:`cgmorph.jets` functions so it accepts jets.
    ``bounds`` are open intervals, one per axis.
    """

    name: str
    dim: int
    bounds: tuple
    metric_fn: Callable

    def contains(self, coords) -> bool:
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (self.dim,):
            return False
        return all(lo < c < hi for c, (lo, hi) in zip(coords, self.bounds))

    def check(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (self.dim,):
            raise DomainError(f"{self.name}: expected {self.dim} coordinates, got shape {coords.shape}")
        if not self.contains(coords):
            raise DomainError(f"{self.name}: point {coords.tolist()} outside {list(self.bounds)}")
        return coords

    def metric(self, coords) -> np.ndarray:
        """Plain float evaluation of the metric matrix (no checks)."""
        g = np.array(self.metric_fn(np.asarray(coords, dtype=float)), dtype=float)
        return np.broadcast_to(g, (self.dim, self.dim)).copy()

    def metric_jet(self, x: Jet) -> Jet:
        g = jets.asjet(self.metric_fn(x), x.space)
        if g.shape != (self.dim, self.dim):
            g = jets.Jet(g.space, np.broadcast_to(g.coeffs, (self.dim, self.dim, g.space.size)).copy())
        return g


@dataclass(frozen=True)
class Point:
    chart: Chart
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", self.chart.check(self.coords))


@dataclass(frozen=True)
class Tangent:
    base: Point
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        if comps.shape != (self.base.chart.dim,):
            raise UsageError("tangent components must match the chart dimension")
        object.__setattr__(self, "components", comps)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.components, dtype=dtype)


@dataclass(frozen=True)
class VectorField:
    """A vector field given by jet-evaluable coordinate components."""

    chart: Chart
    component_fn: Callable

    def __call__(self, coords) -> np.ndarray:
        out = np.array(self.component_fn(np.asarray(coords, dtype=float)), dtype=float)
        return np.broadcast_to(out, (self.chart.dim,)).copy()

    def jet(self, x: Jet) -> Jet:
        v = jets.asjet(self.component_fn(x), x.space)
        if v.shape != (self.chart.dim,):
            v = jets.Jet(v.space, np.broadcast_to(v.coeffs, (self.chart.dim, v.space.size)).copy())
        return v

    @classmethod
    def constant(cls, chart: Chart, components) -> "VectorField":
        comps = [float(c) for c in np.asarray(components, dtype=float)]
        return cls(chart, lambda x: comps)


def coords_of(chart: Chart, x) -> np.ndarray:
    """Validated coordinates from a :class:`Point` or an array."""
    if isinstance(x, Point):
        if x.chart is not chart:
            raise UsageError(f"point belongs to chart {x.chart.name}, not {chart.name}")
        return x.coords
    return chart.check(x)


def vector_of(X) -> np.ndarray:
    return np.asarray(X.components if isinstance(X, Tangent) else X, dtype=float)


# -- generic metric-jet machinery ----------------------------------------


def christoffel_from_metric(G: Jet, dim: int | None = None) -> Jet:
    """Christoffel symbols of a metric jet whose first ``dim`` seed variables are coordinates."""
    dim = G.shape[0] if dim is None else dim
    dG = jets.stack([G.derivative(l) for l in range(dim)], axis=-1)  # dG[i, j, l] = d_l g_ij
    ginv = jets.inv(G.truncate(dG.order))
    lowered = dG.transpose(2, 0, 1) + dG.transpose(0, 2, 1) - dG  # [i, j, l]
    return (ginv[:, None, None, :] * lowered[None]).sum(-1) * 0.5


def riemann_from_christoffel(gamma: Jet, dim: int | None = None) -> np.ndarray:
    """Curvature components ``R[l, i, j, k]`` at the expansion point."""
    dim = gamma.shape[0] if dim is None else dim
    G = gamma.value
    dG = np.stack([gamma.derivative(i).value for i in range(dim)], axis=0)  # dG[i, l, j, k] = d_i Gamma^l_jk
    R = np.einsum("iljk->lijk", dG) - np.einsum("jlik->lijk", dG)
    R += np.einsum("lim,mjk->lijk", G, G) - np.einsum("ljm,mik->lijk", G, G)
    return R


class LocalGeometry(NamedTuple):
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray


@lru_cache(maxsize=8192)
def _local_geometry(chart: Chart, key: tuple) -> LocalGeometry:
    x = Jet.variables(np.array(key), order=2)
    G = chart.metric_jet(x)
    gamma = christoffel_from_metric(G)
    g = G.value
    return LocalGeometry(g, np.linalg.inv(g), gamma.value, riemann_from_christoffel(gamma))


def local_geometry(chart: Chart, x) -> LocalGeometry:
    """Metric, inverse, Christoffels and curvature at ``x`` (cached, validated)."""
    x0 = coords_of(chart, x)
    _check_metric(chart, x0, chart.metric(x0))
    return _local_geometry(chart, tuple(float(c) for c in x0))


def _check_metric(chart: Chart, x0, g: np.ndarray) -> None:
    if np.max(np.abs(g - g.T)) > SYMMETRY_TOL:
        raise SingularityError(f"{chart.name}: metric not symmetric at {x0.tolist()}")
    if np.linalg.eigvalsh(g)[0] <= EIGEN_FLOOR:
        raise SingularityError(f"{chart.name}: metric not positive definite at {x0.tolist()}")


# -- public operations -----------------------------------------------------


def eval_metric(chart: Chart, x) -> np.ndarray:
    x0 = coords_of(chart, x)
    g = chart.metric(x0)
    _check_metric(chart, x0, g)
    return g


def christoffel(chart: Chart, x) -> np.ndarray:
    return local_geometry(chart, x).gamma.copy()


def riemann_tensor(chart: Chart, x) -> np.ndarray:
    return local_geometry(chart, x).riemann.copy()


def riemann(chart: Chart, x, X, Y, Z) -> np.ndarray:
    """``R(X, Y)Z`` at ``x``."""
    R = local_geometry(chart, x).riemann
    return np.einsum("lijk,i,j,k->l", R, vector_of(X), vector_of(Y), vector_of(Z))


def lie_bracket(X: VectorField, Y: VectorField, x) -> np.ndarray:
    if X.chart is not Y.chart:
        raise UsageError("vector fields live on different charts")
    x0 = coords_of(X.chart, x)
    xj = Jet.variables(x0, order=1)
    Xj, Yj = X.jet(xj), Y.jet(xj)
    return Yj.gradient() @ Xj.value - Xj.gradient() @ Yj.value


def covariant_derivative(chart: Chart, X, Y: VectorField, x=None) -> np.ndarray:
    """``nabla_X Y``; ``X`` is a :class:`Tangent` or a vector at ``x``."""
    if isinstance(X, Tangent):
        x = X.base
    if Y.chart is not chart:
        raise UsageError("vector field belongs to another chart")
    x0 = coords_of(chart, x)
    Xv = vector_of(X)
    Yj = Y.jet(Jet.variables(x0, order=1))
    gamma = local_geometry(chart, x0).gamma
    return Yj.gradient() @ Xv + np.einsum("kij,i,j->k", gamma, Xv, Yj.value)


def gram_schmidt(vectors, g: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Orthonormalize columns of ``vectors`` in the inner product ``g``, in input order."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    out = []
    for v in vectors.T:
        w = v.copy()
        for e in out:
            w = w - (e @ g @ w) * e
        # second pass keeps orthogonality at round-off level
        for e in out:
            w = w - (e @ g @ w) * e
        norm_v = np.sqrt(max(v @ g @ v, 0.0))
        norm = np.sqrt(max(w @ g @ w, 0.0))
        if norm_v == 0.0 or norm <= rel_tol * norm_v:
            raise DegeneracyError("frame is linearly dependent")
        out.append(w / norm)
    return np.array(out).T.reshape(vectors.shape[0], len(out))


def orthonormalize(frame, chart: Chart, x=None) -> list[np.ndarray]:
    """Gram-Schmidt of a list of tangents in the chart metric, in input order."""
    frame = list(frame)
    if not frame:
        return []
    if x is None:
        if not isinstance(frame[0], Tangent):
            raise UsageError("base point required when the frame is given as arrays")
        x = frame[0].base
    g = eval_metric(chart, x)
    cols = np.stack([vector_of(v) for v in frame], axis=1)
    out = gram_schmidt(cols, g)
    return [out[:, i] for i in range(out.shape[1])]
