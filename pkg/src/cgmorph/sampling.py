"""Deterministic sampling of base points and fibre vectors."""

from __future__ import annotations

import numpy as np

from .geometry import Chart

FIBER_NORMS = (0.0, 0.5, 1.0, 2.0)
MARGIN = 0.1


def sample_points(chart: Chart, count: int, rng: np.random.Generator, margin: float = MARGIN) -> np.ndarray:
    """Uniform points in the chart box shrunk by ``margin`` of each side length."""
    lo = np.array([b[0] for b in chart.bounds], dtype=float)
    hi = np.array([b[1] for b in chart.bounds], dtype=float)
    width = hi - lo
    return rng.uniform(lo + margin * width, hi - margin * width, size=(count, chart.dim))


def sample_fiber_vectors(chart: Chart, points: np.ndarray, rng: np.random.Generator, norms=FIBER_NORMS) -> np.ndarray:
    """Gaussian directions rescaled to ``|xi|_g = norms[i % len(norms)]``."""
    out = np.empty_like(points)
    for i, x in enumerate(points):
        d = rng.standard_normal(chart.dim)
        g = chart.metric(x)
        out[i] = d * (norms[i % len(norms)] / np.sqrt(d @ g @ d))
    return out


def sample_bundle(chart: Chart, count: int, seed: int, norms=FIBER_NORMS, margin: float = MARGIN):
    """``count`` pairs ``(x, xi)`` from one fixed-seed stream."""
    from .bundle import BundlePoint

    rng = np.random.default_rng(seed)
    points = sample_points(chart, count, rng, margin)
    fibers = sample_fiber_vectors(chart, points, rng, norms)
    return [BundlePoint(chart, x, xi) for x, xi in zip(points, fibers)]
