"""Sparse convex QP solver (primal-dual interior point, Mehrotra predictor-corrector).

Solves::

    min  1/2 x'Px + q'x
    s.t. A x  = b
         G x <= h

``P`` must be positive semidefinite and positive definite on the null space of
``A``. Returns primal/dual solutions with the sign convention
``P x + q + A'y + G'z = 0``, ``z >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu


@dataclass
class QPResult:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    status: str  # "optimal", "max_iter", "infeasible", "numerical"
    iterations: int
    residual: float


def _factor(K11, A, reg):
    n = K11.shape[0]
    m = A.shape[0]
    K = sp.bmat(
        [[K11 + reg * sp.identity(n, format="csc"), A.T], [A, -reg * sp.identity(m, format="csc")]],
        format="csc",
    )
    return splu(K)


def solve_qp(P, q, A, b, G, h, tol: float = 1e-10, max_iter: int = 100, accept: float = 1e-8) -> QPResult:
    """Interior-point solve; the best iterate is returned as optimal if its
    scaled residual is below ``accept`` when ``tol`` cannot be reached
    (degenerate complementarity limits attainable accuracy)."""
    P = sp.csc_matrix(P)
    A = sp.csc_matrix(A)
    G = sp.csc_matrix(G)
    q = np.asarray(q, dtype=float)
    b = np.asarray(b, dtype=float)
    h = np.asarray(h, dtype=float)
    n, m, p = q.size, b.size, h.size
    reg = 1e-11

    x = np.zeros(n)
    y = np.zeros(m)
    if p:
        s = np.maximum(h - G @ x, 1.0)
        z = np.ones(p)
    else:
        s = np.zeros(0)
        z = np.zeros(0)

    scale_d = 1.0 + np.max(np.abs(q), initial=0.0)
    scale_p = 1.0 + np.max(np.abs(b), initial=0.0)
    scale_i = 1.0 + np.max(np.abs(h), initial=0.0)
    status = "max_iter"
    res = np.inf
    best = (np.inf, x, y, z)
    it = 0
    for it in range(1, max_iter + 1):
        r_d = P @ x + q + A.T @ y + G.T @ z
        r_p = A @ x - b
        r_i = G @ x + s - h
        mu = float(s @ z) / p if p else 0.0
        res = max(
            np.max(np.abs(r_d), initial=0.0) / scale_d,
            np.max(np.abs(r_p), initial=0.0) / scale_p,
            np.max(np.abs(r_i), initial=0.0) / scale_i,
            mu,
        )
        if res < best[0]:
            best = (res, x.copy(), y.copy(), z.copy())
        if res <= tol:
            status = "optimal"
            break
        # Crude infeasibility test: dual multipliers exploding while primal residual stalls.
        if p and np.max(z) > 1e12:
            status = "infeasible"
            break

        w = z / s if p else np.zeros(0)
        K11 = P + (G.T @ sp.diags(w) @ G if p else sp.csc_matrix((n, n)))
        try:
            lu = _factor(K11, A, reg)
        except RuntimeError:
            status = "numerical"
            break

        def newton(r_c):
            rhs1 = -r_d - (G.T @ ((z * r_i - r_c) / s) if p else 0.0)
            sol = lu.solve(np.concatenate([rhs1, -r_p]))
            dx, dy = sol[:n], sol[n:]
            if p:
                dz = (-r_c + z * r_i + z * (G @ dx)) / s
                ds = -r_i - G @ dx
            else:
                dz = ds = np.zeros(0)
            return dx, dy, dz, ds

        def max_step(v, dv):
            neg = dv < 0
            if not np.any(neg):
                return 1.0
            return min(1.0, float(np.min(-v[neg] / dv[neg])))

        if p:
            # predictor
            dx_a, dy_a, dz_a, ds_a = newton(s * z)
            a_p = max_step(s, ds_a)
            a_d = max_step(z, dz_a)
            mu_aff = float((s + a_p * ds_a) @ (z + a_d * dz_a)) / p
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            r_c = s * z + ds_a * dz_a - sigma * mu
            dx, dy, dz, ds = newton(r_c)
            step = min(1.0, 0.99 * min(max_step(s, ds), max_step(z, dz)))
        else:
            dx, dy, dz, ds = newton(np.zeros(0))
            step = 1.0
        x = x + step * dx
        s = s + step * ds
        y = y + step * dy
        z = z + step * dz
    if status != "optimal" and status != "infeasible" and best[0] <= accept:
        status = "optimal"
    if status != "infeasible":
        res, x, y, z = best
    return QPResult(x=x, y=y, z=z, status=status, iterations=it, residual=float(res))
