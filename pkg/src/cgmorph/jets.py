"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients of an array-valued function of
``nvars`` seed variables around a point, truncated at a fixed total order.
Coefficients are kept in the last axis of a numpy array, so a ``Jet`` with
shape ``(3, 3)`` is a 3x3 matrix of truncated polynomials and all arithmetic
broadcasts over the leading axes.

Functions written with the elementary functions of this module (``sin``,
``exp``, ``sqrt``, ...) accept both floats and jets, which is how chart
metrics and maps are made differentiable::

    >>> x = Jet.variables([0.3, 1.0], order=2)
    >>> f = sin(x[0]) * x[1] ** 2
    >>> f.gradient()            # doctest: +SKIP
    array([0.95533649, 0.59104041])
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

__all__ = [
    "Jet",
    "JetSpace",
    "jet_space",
    "asjet",
    "stack",
    "block",
    "matmul",
    "inv",
    "value",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "power",
]


class JetSpace:
    """Monomial bookkeeping for polynomials in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        monomials = []
        for degree in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), degree):
                exps = [0] * nvars
                for v in combo:
                    exps[v] += 1
                monomials.append(tuple(exps))
        self.monomials = monomials
        self.size = len(monomials)
        self.index = {m: i for i, m in enumerate(monomials)}
        self.degree = np.array([sum(m) for m in monomials])
        self.factorial = np.array([math.prod(math.factorial(e) for e in m) for m in monomials], dtype=float)

        left, right, target = [], [], []
        for i, a in enumerate(monomials):
            for j, b in enumerate(monomials):
                if self.degree[i] + self.degree[j] <= order:
                    left.append(i)
                    right.append(j)
                    target.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self._left = np.array(left)
        self._right = np.array(right)
        scatter = np.zeros((len(left), self.size))
        scatter[np.arange(len(left)), target] = 1.0
        self._scatter = scatter

    def __repr__(self) -> str:
        return f"JetSpace(nvars={self.nvars}, order={self.order})"

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (a[..., self._left] * b[..., self._right]) @ self._scatter

    @lru_cache(maxsize=None)
    def _derivative_table(self, var: int):
        lower = jet_space(self.nvars, self.order - 1)
        src, dst, fac = [], [], []
        for i, m in enumerate(self.monomials):
            if m[var] >= 1:
                reduced = list(m)
                reduced[var] -= 1
                src.append(i)
                dst.append(lower.index[tuple(reduced)])
                fac.append(float(m[var]))
        return lower, np.array(src, dtype=int), np.array(dst, dtype=int), np.array(fac)

    @lru_cache(maxsize=None)
    def _truncation(self, order: int):
        lower = jet_space(self.nvars, order)
        return lower, np.array([self.index[m] for m in lower.monomials])

    @lru_cache(maxsize=None)
    def _embedding(self, nvars: int, offset: int):
        bigger = jet_space(nvars, self.order)
        idx = []
        for m in self.monomials:
            exps = [0] * nvars
            exps[offset : offset + self.nvars] = m
            idx.append(bigger.index[tuple(exps)])
        return bigger, np.array(idx)


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


class Jet:
    """Array of truncated Taylor polynomials sharing one :class:`JetSpace`.

    ``coeffs[..., k]`` is the coefficient of monomial ``space.monomials[k]``
    (Taylor coefficient, not derivative: ``d^a f = a! * coeffs[a]``).
    """

    __slots__ = ("space", "coeffs")
    __array_priority__ = 1000

    def __init__(self, space: JetSpace, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1:] != (space.size,):
            raise ValueError(f"coefficient axis must have length {space.size}")
        self.space = space
        self.coeffs = coeffs

    # -- construction -------------------------------------------------
    @classmethod
    def variables(cls, point, order: int, nvars: int | None = None, offset: int = 0) -> "Jet":
        """Seed variables ``point + delta`` occupying ``offset..offset+len(point)``."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        n = point.size
        nvars = n + offset if nvars is None else nvars
        if offset + n > nvars:
            raise ValueError("variables do not fit in the jet space")
        space = jet_space(nvars, order)
        c = np.zeros((n, space.size))
        c[:, 0] = point
        if order >= 1:
            c[np.arange(n), 1 + offset + np.arange(n)] = 1.0
        return cls(space, c)

    @classmethod
    def constant(cls, val, space: JetSpace) -> "Jet":
        val = np.asarray(val, dtype=float)
        c = np.zeros(val.shape + (space.size,))
        c[..., 0] = val
        return cls(space, c)

    # -- array protocol on the leading axes --------------------------
    @property
    def shape(self) -> tuple:
        return self.coeffs.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.coeffs.ndim - 1

    @property
    def order(self) -> int:
        return self.space.order

    def __len__(self) -> int:
        return self.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.space, self.coeffs[key + (slice(None),)])

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, nvars={self.space.nvars}, order={self.order}, value={self.value!r})"

    def transpose(self, *axes) -> "Jet":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Jet(self.space, np.transpose(self.coeffs, tuple(axes) + (self.ndim,)))

    @property
    def T(self) -> "Jet":
        return self.transpose()

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Jet(self.space, self.coeffs.reshape(tuple(shape) + (self.space.size,)))

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = axis + self.ndim if axis < 0 else axis
        else:
            axis = tuple(a + self.ndim if a < 0 else a for a in axis)
        return Jet(self.space, self.coeffs.sum(axis=axis))

    # -- Taylor data ---------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.coeffs[..., 0].copy()

    def gradient(self) -> np.ndarray:
        """First partials at the expansion point, stacked in a trailing axis."""
        if self.order < 1:
            raise ValueError("order-0 jet carries no derivatives")
        return self.coeffs[..., 1 : 1 + self.space.nvars].copy()

    def hessian(self) -> np.ndarray:
        if self.order < 2:
            raise ValueError("need an order >= 2 jet for the Hessian")
        n = self.space.nvars
        out = np.empty(self.shape + (n, n))
        for i in range(n):
            for j in range(n):
                exps = [0] * n
                exps[i] += 1
                exps[j] += 1
                k = self.space.index[tuple(exps)]
                out[..., i, j] = self.coeffs[..., k] * (2.0 if i == j else 1.0)
        return out

    def partial(self, multi_index) -> np.ndarray:
        k = self.space.index[tuple(multi_index)]
        return self.coeffs[..., k] * self.space.factorial[k]

    def derivative(self, var: int) -> "Jet":
        """Exact Taylor expansion of the partial in ``var``, one order lower."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        lower, src, dst, fac = self.space._derivative_table(var)
        c = np.zeros(self.shape + (lower.size,))
        c[..., dst] = self.coeffs[..., src] * fac
        return Jet(lower, c)

    def directional(self, direction) -> "Jet":
        """Derivative along a constant direction in the seed variables."""
        direction = np.asarray(direction, dtype=float)
        out = None
        for var, d in enumerate(direction):
            if d == 0.0:
                continue
            term = self.derivative(var) * d
            out = term if out is None else out + term
        if out is None:
            lower = jet_space(self.space.nvars, self.order - 1)
            return Jet(lower, np.zeros(self.shape + (lower.size,)))
        return out

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        lower, idx = self.space._truncation(order)
        return Jet(lower, self.coeffs[..., idx])

    def embed(self, nvars: int, offset: int = 0) -> "Jet":
        """Re-express in a larger variable set; own variables land at ``offset``."""
        bigger, idx = self.space._embedding(nvars, offset)
        c = np.zeros(self.shape + (bigger.size,))
        c[..., idx] = self.coeffs
        return Jet(bigger, c)

    def compose(self, inner: "Jet") -> "Jet":
        """Evaluate this polynomial (in its own increments) at ``inner``.

        ``inner`` is a vector jet of length ``nvars`` whose constant part is the
        expansion point of ``self``; only its increments enter. The result is
        exact up to ``min(self.order, inner.order)``.
        """
        if inner.shape != (self.space.nvars,):
            raise ValueError("inner jet must be a vector with one entry per variable")
        order = min(self.order, inner.order)
        target = jet_space(inner.space.nvars, order)
        u = inner.truncate(order).coeffs.copy()
        u[:, 0] = 0.0
        outer = self.truncate(order)
        powers = np.zeros((outer.space.size, target.size))
        powers[0, 0] = 1.0
        for k, m in enumerate(outer.space.monomials[1:], start=1):
            var = next(i for i, e in enumerate(m) if e)
            prev = list(m)
            prev[var] -= 1
            powers[k] = target.multiply(powers[outer.space.index[tuple(prev)]], u[var])
        return Jet(target, outer.coeffs @ powers)

    # -- arithmetic ----------------------------------------------------
    def _align(self, other):
        if isinstance(other, Jet):
            if other.space is self.space:
                return self, other
            if other.space.nvars != self.space.nvars:
                raise ValueError("jets over different variable sets")
            order = min(self.order, other.order)
            return self.truncate(order), other.truncate(order)
        return self, Jet.constant(other, self.space)

    def __add__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            shape = np.broadcast_shapes(self.shape, other.shape)
            c = np.array(np.broadcast_to(self.coeffs, shape + (self.space.size,)))
            c[..., 0] += other
            return Jet(self.space, c)
        a, b = self._align(other)
        return Jet(a.space, a.coeffs + b.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.space, self.coeffs * other[..., None])
        a, b = self._align(other)
        return Jet(a.space, a.space.multiply(a.coeffs, b.coeffs))

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        c0 = self.coeffs[..., 0]
        return self._compose_series([(-1.0) ** k / c0 ** (k + 1) for k in range(self.order + 1)])

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, (int, np.integer)) and exponent >= 0:
            result = Jet.constant(np.ones(self.shape), self.space)
            base = self
            e = int(exponent)
            while e:
                if e & 1:
                    result = result * base
                e >>= 1
                if e:
                    base = base * base
            return result
        return power(self, exponent)

    def _compose_series(self, coefs) -> "Jet":
        # coefs[k] = f^(k)(c0) / k!
        delta = Jet(self.space, self.coeffs.copy())
        delta.coeffs[..., 0] = 0.0
        out = Jet.constant(coefs[0], self.space)
        term = delta
        for k in range(1, self.order + 1):
            out = out + term * coefs[k]
            if k < self.order:
                term = term * delta
        return out


def value(x):
    """Plain value of a jet or number."""
    return x.value if isinstance(x, Jet) else np.asarray(x, dtype=float)


def asjet(obj, space: JetSpace) -> Jet:
    """Convert nested sequences of jets and numbers into one :class:`Jet`."""
    if isinstance(obj, Jet):
        return obj
    if isinstance(obj, (list, tuple)):
        parts = [asjet(o, space) for o in obj]
        order = min(p.order for p in parts)
        parts = [p.truncate(order) for p in parts]
        shape = np.broadcast_shapes(*(p.shape for p in parts))
        size = parts[0].space.size
        return Jet(parts[0].space, np.stack([np.broadcast_to(p.coeffs, shape + (size,)) for p in parts]))
    return Jet.constant(obj, space)


def stack(jets, axis: int = 0) -> Jet:
    jets = list(jets)
    order = min(j.order for j in jets)
    jets = [j.truncate(order) for j in jets]
    ndim = jets[0].ndim + 1
    axis = axis + ndim if axis < 0 else axis
    return Jet(jets[0].space, np.stack([j.coeffs for j in jets], axis=axis))


def block(rows) -> Jet:
    """Assemble a block matrix of jets (all blocks 2-D, same variable set)."""
    parts = [[b for b in row] for row in rows]
    order = min(b.order for row in parts for b in row)
    coeff_rows = [np.concatenate([b.truncate(order).coeffs for b in row], axis=-2) for row in parts]
    return Jet(parts[0][0].truncate(order).space, np.concatenate(coeff_rows, axis=-3))


def matmul(a, b):
    """Matrix product where either side may be a jet or a plain array."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.matmul(a, b)
    if not isinstance(a, Jet):
        a = np.asarray(a, dtype=float)
        vec = b.ndim == 1
        bc = b.coeffs[:, None, :] if vec else b.coeffs
        out = np.einsum("...ik,...klc->...ilc", a, bc)
        return Jet(b.space, out[..., 0, :] if vec else out)
    if not isinstance(b, Jet):
        b = np.asarray(b, dtype=float)
        vec = b.ndim == 1
        bm = b[:, None] if vec else b
        out = np.einsum("...ikc,...kl->...ilc", a.coeffs, bm)
        return Jet(a.space, out[..., 0, :] if vec else out)
    a, b = a._align(b)
    vec = b.ndim == 1
    bc = b.coeffs[:, None, :] if vec else b.coeffs
    sp = a.space
    prod = a.coeffs[..., :, :, None, sp._left] * bc[..., None, :, :, sp._right]
    out = prod.sum(axis=-3) @ sp._scatter
    return Jet(sp, out[..., 0, :] if vec else out)


def inv(a):
    """Inverse of a square matrix jet by the terminating Neumann series."""
    if not isinstance(a, Jet):
        return np.linalg.inv(a)
    a0inv = np.linalg.inv(a.value)
    nil = Jet(a.space, a.coeffs.copy())
    nil.coeffs[..., 0] = 0.0
    step = matmul(-a0inv, nil)
    term = Jet.constant(a0inv, a.space)
    out = term
    for _ in range(a.order):
        term = matmul(step, term)
        out = out + term
    return out


def _series(x: Jet, derivs) -> Jet:
    return x._compose_series([d / math.factorial(k) for k, d in enumerate(derivs)])


def sin(x):
    if not isinstance(x, Jet):
        return np.sin(x)
    c0 = x.coeffs[..., 0]
    cyc = [np.sin(c0), np.cos(c0), -np.sin(c0), -np.cos(c0)]
    return _series(x, [cyc[k % 4] for k in range(x.order + 1)])


def cos(x):
    if not isinstance(x, Jet):
        return np.cos(x)
    c0 = x.coeffs[..., 0]
    cyc = [np.cos(c0), -np.sin(c0), -np.cos(c0), np.sin(c0)]
    return _series(x, [cyc[k % 4] for k in range(x.order + 1)])


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e = np.exp(x.coeffs[..., 0])
    return _series(x, [e] * (x.order + 1))


def log(x):
    if not isinstance(x, Jet):
        return np.log(x)
    c0 = x.coeffs[..., 0]
    coefs = [np.log(c0)] + [(-1.0) ** (k + 1) / (k * c0**k) for k in range(1, x.order + 1)]
    return x._compose_series(coefs)


def power(x, r):
    """Real power ``x**r`` (base must be positive unless ``r`` is a non-negative integer)."""
    if not isinstance(x, Jet):
        return np.power(x, r)
    if isinstance(r, (int, np.integer)) and r >= 0:
        return x**r
    c0 = x.coeffs[..., 0]
    coefs = []
    binom = 1.0
    for k in range(x.order + 1):
        coefs.append(binom * c0 ** (r - k))
        binom *= (r - k) / (k + 1)
    return x._compose_series(coefs)


def sqrt(x):
    if not isinstance(x, Jet):
        return np.sqrt(x)
    return power(x, 0.5)
