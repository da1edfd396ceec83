"""Central finite differences with one Richardson step.

These are the independent cross-check for the jet-based derivatives. They only
ever call metric and map functions on plain floats.
"""

from __future__ import annotations

import numpy as np

STEP = 1e-4


def derivative(f, x, step: float = STEP) -> np.ndarray:
    """``d f / d x_i`` stacked in a trailing axis; ``f`` maps an array to an array."""
    x = np.asarray(x, dtype=float)

    def central(h):
        cols = []
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h
            cols.append((np.asarray(f(x + e), dtype=float) - np.asarray(f(x - e), dtype=float)) / (2 * h))
        return np.stack(cols, axis=-1)

    return (4.0 * central(step / 2) - central(step)) / 3.0


def christoffel(chart, x, step: float = STEP) -> np.ndarray:
    dg = derivative(chart.metric, x, step)  # dg[i, j, l] = d_l g_ij
    ginv = np.linalg.inv(chart.metric(x))
    lowered = np.einsum("jli->ijl", dg) + np.einsum("ilj->ijl", dg) - dg
    return 0.5 * np.einsum("kl,ijl->kij", ginv, lowered)


def riemann_tensor(chart, x, step: float = STEP) -> np.ndarray:
    G = christoffel(chart, x, step)
    dG = derivative(lambda y: christoffel(chart, y, step), x, step)  # dG[l, j, k, i]
    R = np.einsum("ljki->lijk", dG) - np.einsum("likj->lijk", dG)
    R += np.einsum("lim,mjk->lijk", G, G) - np.einsum("ljm,mik->lijk", G, G)
    return R


def jacobian(phi, x, step: float = STEP) -> np.ndarray:
    return derivative(phi.value, x, step)


def hessian(phi, x, step: float = STEP) -> np.ndarray:
    return derivative(lambda y: derivative(phi.value, y, step), x, step)


def second_fundamental_form(phi, x, step: float = STEP) -> np.ndarray:
    """``B[c, i, j]`` in codomain coordinates from finite differences only."""
    J = jacobian(phi, x, step)
    H = hessian(phi, x, step)
    gm = christoffel(phi.domain, x, step)
    gn = christoffel(phi.codomain, phi.value(x), step)
    return H + np.einsum("cab,ai,bj->cij", gn, J, J) - np.einsum("ck,kij->cij", J, gm)
