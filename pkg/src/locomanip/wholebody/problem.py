"""Direct transcription of the whole-body optimal control problem.

Decision vector ``z = [x_0 .. x_N, u_0 .. u_{N-1}]`` with trapezoidal
collocation defects (the input is held over each interval)::

    x_{i+1} - x_i - dt/2 (f(x_i, u_i) + f(x_{i+1}, u_i)) = 0

Cost: ``sum_i w_t |q_i[track] - ref_i|^2 + sum_i |u_i|^2_W``.

Constraint rows are grouped for reporting:

equalities   initial_position, initial_velocity, dynamics, terminal
inequalities position_bounds, velocity_bounds (nodes 1..N),
             acceleration_bounds, contact_unilateral, friction_cone (nodes 0..N-1)

Inequalities are written ``c(z) <= 0``. The friction cone is written in the
convex form ``sqrt(|f_t|^2 + delta^2) - mu (f.n) <= 0`` with a tiny
``delta`` that keeps it differentiable at ``f_t = 0``; it is slightly tighter
than the exact cone, so any point satisfying it is inside the cone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .. import _kernels
from .dynamics import DynamicsModel

CONE_SMOOTHING = 1e-6  # N

EQ_GROUPS = ("initial_position", "initial_velocity", "dynamics", "terminal")
INEQ_GROUPS = ("position_bounds", "velocity_bounds", "acceleration_bounds", "contact_unilateral", "friction_cone")


class ProblemError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ContactSpec:
    leg: str
    mu: float
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3)
        if not self.mu > 0:
            raise ProblemError(f"contact {self.leg!r}: friction coefficient must be positive")
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ProblemError(f"contact {self.leg!r}: normal must be a unit vector")
        object.__setattr__(self, "normal", n)


def check_friction_cone(contacts, forces) -> np.ndarray:
    """Margin ``mu (f.n) - |f_t|`` per contact; non-negative means inside the cone."""
    forces = np.ascontiguousarray(np.asarray(forces, dtype=float).reshape(-1, 3))
    normals = np.ascontiguousarray([c.normal for c in contacts], dtype=float).reshape(-1, 3)
    mu = np.ascontiguousarray([c.mu for c in contacts], dtype=float)
    if forces.shape[0] != len(contacts):
        raise ValueError("need one force per contact")
    return _kernels.cone_margins(forces, normals, mu)


def _per_node(value, rows, n, default):
    if value is None:
        return np.full((rows, n), default, dtype=float)
    arr = np.asarray(value, dtype=float)
    return np.broadcast_to(arr, (rows, n)).copy()


@dataclass(eq=False)
class OcpProblem:
    dynamics: DynamicsModel
    N: int
    dt: float
    q_init: np.ndarray
    track: np.ndarray | None = None  # coordinate indices tracked by the reference
    reference: np.ndarray | None = None  # (N+1, len(track))
    q_lower: np.ndarray | None = None  # broadcastable to (N+1, n_q)
    q_upper: np.ndarray | None = None
    v_lower: np.ndarray | None = None
    v_upper: np.ndarray | None = None
    a_lower: np.ndarray | None = None  # broadcastable to (N, n_q)
    a_upper: np.ndarray | None = None
    contacts: list[ContactSpec] = field(default_factory=list)
    track_weight: float = 1.0
    input_weight: float | np.ndarray = 1.0
    terminal_q: dict[int, float] | None = None
    terminal_rest: bool = False
    force_min: float = 1.0

    def __post_init__(self):
        dyn = self.dynamics
        if self.N < 2:
            raise ProblemError("need at least N = 2 intervals")
        if not self.dt > 0:
            raise ProblemError("dt must be positive")
        n = dyn.n_q
        self.q_init = np.asarray(self.q_init, dtype=float).reshape(n)
        if self.track is None:
            self.track = np.zeros(0, dtype=np.int64)
        self.track = np.asarray(self.track, dtype=np.int64).reshape(-1)
        if self.reference is None:
            self.reference = np.tile(self.q_init[self.track], (self.N + 1, 1))
        self.reference = np.asarray(self.reference, dtype=float)
        if self.reference.shape != (self.N + 1, self.track.size):
            raise ProblemError(
                f"reference must have shape ({self.N + 1}, {self.track.size}), got {self.reference.shape}"
            )
        if np.any(self.track < 0) or np.any(self.track >= n):
            raise ProblemError("tracked coordinate index out of range")
        self.q_lower = _per_node(self.q_lower, self.N + 1, n, -np.inf)
        self.q_upper = _per_node(self.q_upper, self.N + 1, n, np.inf)
        self.v_lower = _per_node(self.v_lower, self.N + 1, n, -np.inf)
        self.v_upper = _per_node(self.v_upper, self.N + 1, n, np.inf)
        self.a_lower = _per_node(self.a_lower, self.N, n, -np.inf)
        self.a_upper = _per_node(self.a_upper, self.N, n, np.inf)
        for lo, hi, what in (
            (self.q_lower, self.q_upper, "position"),
            (self.v_lower, self.v_upper, "velocity"),
            (self.a_lower, self.a_upper, "acceleration"),
        ):
            if np.any(lo > hi):
                raise ProblemError(f"{what} bounds: lower exceeds upper")
        if len(self.contacts) != dyn.n_contacts:
            raise ProblemError(f"dynamics expects {dyn.n_contacts} contacts, got {len(self.contacts)}")
        w = np.broadcast_to(np.asarray(self.input_weight, dtype=float), (dyn.n_u,)).copy()
        if np.any(w <= 0):
            raise ProblemError("input weights must be positive")
        self.input_weight = w
        if not self.force_min > 0:
            raise ProblemError("force_min must be positive")
        self.terminal_q = dict(self.terminal_q or {})

    @property
    def n_q(self) -> int:
        return self.dynamics.n_q

    @property
    def n_x(self) -> int:
        return self.dynamics.n_x

    @property
    def n_u(self) -> int:
        return self.dynamics.n_u

    @property
    def coordinates(self) -> list[str]:
        return self.dynamics.coordinates


class Transcription:
    """Index bookkeeping and function/Jacobian evaluation for one problem."""

    def __init__(self, problem: OcpProblem):
        self.p = p = problem
        N, nx, nu, nq = p.N, p.n_x, p.n_u, p.n_q
        self.n_var = (N + 1) * nx + N * nu
        self._x0 = 0
        self._u0 = (N + 1) * nx
        self.x_idx = np.arange((N + 1) * nx).reshape(N + 1, nx)
        self.u_idx = self._u0 + np.arange(N * nu).reshape(N, nu) if N * nu else np.zeros((N, 0), dtype=int)
        self.q_idx = self.x_idx[:, :nq]
        self.v_idx = self.x_idx[:, nq:]
        self.fslice = p.dynamics.force_slice
        self._objective_setup()
        self._bounds_setup()
        self._eq_counts()

    # layout -------------------------------------------------------------------

    def unpack(self, z):
        p = self.p
        X = z[: self._u0].reshape(p.N + 1, p.n_x)
        U = z[self._u0:].reshape(p.N, p.n_u)
        return X, U

    def pack(self, X, U):
        return np.concatenate([np.asarray(X, dtype=float).ravel(), np.asarray(U, dtype=float).ravel()])

    def initial_guess(self):
        p = self.p
        X = np.zeros((p.N + 1, p.n_x))
        X[:, : p.n_q] = p.q_init
        U = np.zeros((p.N, p.n_u))
        if p.contacts:
            F = U[:, self.fslice].reshape(p.N, len(p.contacts), 3)
            for c, spec in enumerate(p.contacts):
                F[:, c, :] = 2.0 * p.force_min * spec.normal
            U[:, self.fslice] = F.reshape(p.N, -1)
        return self.pack(X, U)

    # objective ----------------------------------------------------------------

    def _objective_setup(self):
        p = self.p
        diag = np.zeros(self.n_var)
        if p.track.size:
            diag[self.q_idx[:, p.track].ravel()] += 2.0 * p.track_weight
        diag[self.u_idx.ravel()] += np.tile(2.0 * p.input_weight, p.N)
        self.obj_diag = diag

    def objective(self, z) -> float:
        p = self.p
        X, U = self.unpack(z)
        err = X[:, : p.n_q][:, p.track] - p.reference
        return float(p.track_weight * np.sum(err * err) + np.sum(U * U * p.input_weight))

    def gradient(self, z):
        p = self.p
        X, U = self.unpack(z)
        g = np.zeros(self.n_var)
        if p.track.size:
            err = X[:, : p.n_q][:, p.track] - p.reference
            g[self.q_idx[:, p.track].ravel()] = 2.0 * p.track_weight * err.ravel()
        g[self._u0:] = (2.0 * U * p.input_weight).ravel()
        return g

    # equalities ---------------------------------------------------------------

    def _eq_counts(self):
        p = self.p
        self.terminal_keys = np.array(sorted(p.terminal_q), dtype=np.int64)
        counts = {
            "initial_position": p.n_q,
            "initial_velocity": p.n_q,
            "dynamics": p.N * p.n_x,
            "terminal": len(self.terminal_keys) + (p.n_q if p.terminal_rest else 0),
        }
        self.eq_slices = {}
        start = 0
        for g in EQ_GROUPS:
            self.eq_slices[g] = slice(start, start + counts[g])
            start += counts[g]
        self.n_eq = start

    def _node_f(self, X, U):
        dyn = self.p.dynamics
        Fa = np.atleast_2d(dyn.f(X[:-1], U))
        Fb = np.atleast_2d(dyn.f(X[1:], U))
        return Fa, Fb

    def defects(self, z):
        p = self.p
        X, U = self.unpack(z)
        Fa, Fb = self._node_f(X, U)
        return _kernels.trapezoid_defects(
            np.ascontiguousarray(X), np.ascontiguousarray(Fa), np.ascontiguousarray(Fb), p.dt
        )

    def eq(self, z):
        p = self.p
        X, _ = self.unpack(z)
        parts = [
            X[0, : p.n_q] - p.q_init,
            X[0, p.n_q:],
            self.defects(z).ravel(),
        ]
        term = [X[-1, self.terminal_keys] - np.array([p.terminal_q[k] for k in self.terminal_keys])]
        if p.terminal_rest:
            term.append(X[-1, p.n_q:])
        parts.extend(term)
        return np.concatenate(parts)

    def _node_jacobians(self, X, U):
        dyn = self.p.dynamics
        if dyn.linear:
            A, B = dyn.jacobians(X[0], U[0])
            return [A] * len(U), [B] * len(U), [A] * len(U), [B] * len(U)
        Aa, Ba, Ab, Bb = [], [], [], []
        for i in range(len(U)):
            A1, B1 = dyn.jacobians(X[i], U[i])
            A2, B2 = dyn.jacobians(X[i + 1], U[i])
            Aa.append(A1)
            Ba.append(B1)
            Ab.append(A2)
            Bb.append(B2)
        return Aa, Ba, Ab, Bb

    def eq_jac(self, z):
        p = self.p
        N, nx, nq = p.N, p.n_x, p.n_q
        X, U = self.unpack(z)
        rows, cols, vals = [], [], []

        def block(r0, c_idx, M):
            M = np.asarray(M)
            rr, cc = np.nonzero(M)
            rows.append(r0 + rr)
            cols.append(np.asarray(c_idx)[cc])
            vals.append(M[rr, cc])

        block(0, self.x_idx[0], np.eye(nq, nx))
        block(nq, self.x_idx[0], np.eye(nq, nx, k=nq))
        Aa, Ba, Ab, Bb = self._node_jacobians(X, U)
        eye = np.eye(nx)
        h = 0.5 * p.dt
        base = self.eq_slices["dynamics"].start
        for i in range(N):
            r0 = base + i * nx
            block(r0, self.x_idx[i], -eye - h * Aa[i])
            block(r0, self.x_idx[i + 1], eye - h * Ab[i])
            if p.n_u:
                block(r0, self.u_idx[i], -h * (Ba[i] + Bb[i]))
        r0 = self.eq_slices["terminal"].start
        for k, j in enumerate(self.terminal_keys):
            rows.append(np.array([r0 + k]))
            cols.append(np.array([self.x_idx[N, j]]))
            vals.append(np.array([1.0]))
        if p.terminal_rest:
            r1 = r0 + len(self.terminal_keys)
            block(r1, self.x_idx[N], np.eye(nq, nx, k=nq))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n_eq, self.n_var)
        )

    # inequalities ---------------------------------------------------------------

    def _bounds_setup(self):
        p = self.p
        var, coef, const, groups = [], [], [], []

        def add(idx, lo, hi, group):
            idx, lo, hi = idx.ravel(), lo.ravel(), hi.ravel()
            up = np.isfinite(hi)
            dn = np.isfinite(lo)
            var.extend([idx[up], idx[dn]])
            coef.extend([np.ones(up.sum()), -np.ones(dn.sum())])
            const.extend([-hi[up], lo[dn]])
            groups.extend([group] * 2)
            return int(up.sum() + dn.sum())

        n_pos = add(self.q_idx[1:], p.q_lower[1:], p.q_upper[1:], "position_bounds")
        n_vel = add(self.v_idx[1:], p.v_lower[1:], p.v_upper[1:], "velocity_bounds")
        self.simple_var = np.concatenate(var).astype(np.int64)
        self.simple_coef = np.concatenate(coef)
        self.simple_const = np.concatenate(const)

        # acceleration rows: (node, coordinate, sign, bound)
        nodes, coords, signs, bounds = [], [], [], []
        for sign, arr in ((1.0, p.a_upper), (-1.0, p.a_lower)):
            k, j = np.nonzero(np.isfinite(arr))
            nodes.append(k)
            coords.append(j)
            signs.append(np.full(k.size, sign))
            bounds.append(arr[k, j])
        self.acc_node = np.concatenate(nodes)
        self.acc_coord = np.concatenate(coords)
        self.acc_sign = np.concatenate(signs)
        self.acc_bound = np.concatenate(bounds)
        n_acc = self.acc_node.size
        nc = len(p.contacts)
        counts = {
            "position_bounds": n_pos,
            "velocity_bounds": n_vel,
            "acceleration_bounds": n_acc,
            "contact_unilateral": p.N * nc,
            "friction_cone": p.N * nc,
        }
        self.ineq_slices = {}
        start = 0
        for g in INEQ_GROUPS:
            self.ineq_slices[g] = slice(start, start + counts[g])
            start += counts[g]
        self.n_ineq = start
        if nc:
            self.normals = np.array([c.normal for c in p.contacts])
            self.mus = np.array([c.mu for c in p.contacts])

    def forces(self, z):
        _, U = self.unpack(z)
        return U[:, self.fslice].reshape(self.p.N, len(self.p.contacts), 3)

    def accelerations(self, z):
        """``v'`` rows of ``f(x_k, u_k)`` for k = 0..N-1, shape (N, n_q)."""
        p = self.p
        X, U = self.unpack(z)
        return np.atleast_2d(p.dynamics.f(X[:-1], U))[:, p.n_q:]

    def ineq(self, z):
        p = self.p
        parts = [self.simple_coef * z[self.simple_var] + self.simple_const]
        acc = self.accelerations(z)
        parts.append(self.acc_sign * (acc[self.acc_node, self.acc_coord] - self.acc_bound))
        if p.contacts:
            F = self.forces(z)
            fn = np.einsum("kcj,cj->kc", F, self.normals)
            ft = F - fn[..., None] * self.normals[None]
            parts.append((p.force_min - fn).ravel())
            norm_t = np.sqrt(np.sum(ft * ft, axis=2) + CONE_SMOOTHING ** 2)
            parts.append((norm_t - self.mus * fn).ravel())
        return np.concatenate(parts)

    def ineq_jac(self, z):
        p = self.p
        nq = p.n_q
        X, U = self.unpack(z)
        n_simple = self.simple_var.size
        rows = [np.arange(n_simple)]
        cols = [self.simple_var]
        vals = [self.simple_coef]
        r0 = self.ineq_slices["acceleration_bounds"].start
        if self.acc_node.size:
            Aa, Ba, _, _ = self._node_jacobians(X, U)
            for r, (k, j, s) in enumerate(zip(self.acc_node, self.acc_coord, self.acc_sign)):
                ax = Aa[k][nq + j]
                bu = Ba[k][nq + j]
                nzx = np.nonzero(ax)[0]
                nzu = np.nonzero(bu)[0]
                rows.append(np.full(nzx.size + nzu.size, r0 + r))
                cols.append(np.concatenate([self.x_idx[k][nzx], self.u_idx[k][nzu]]))
                vals.append(s * np.concatenate([ax[nzx], bu[nzu]]))
        if p.contacts:
            F = self.forces(z)
            nc = len(p.contacts)
            uni0 = self.ineq_slices["contact_unilateral"].start
            cone0 = self.ineq_slices["friction_cone"].start
            for k in range(p.N):
                fcols = self.u_idx[k][self.fslice].reshape(nc, 3)
                for c in range(nc):
                    n = self.normals[c]
                    f = F[k, c]
                    fn = f @ n
                    ft = f - fn * n
                    grad = ft / np.sqrt(ft @ ft + CONE_SMOOTHING ** 2) - self.mus[c] * n
                    row = k * nc + c
                    rows += [np.full(3, uni0 + row), np.full(3, cone0 + row)]
                    cols += [fcols[c], fcols[c]]
                    vals += [-n, grad]
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n_ineq, self.n_var)
        )

    # Lagrangian Hessian --------------------------------------------------------

    def hessian(self, z, mu_ineq):
        """Lagrangian Hessian: objective plus friction-cone curvature.

        Both terms are positive semidefinite (the cone constraint is convex);
        dynamics curvature is not included because the shipped models are linear.
        """
        p = self.p
        H = sp.diags(self.obj_diag)
        if not p.contacts:
            return sp.csc_matrix(H)
        nc = len(p.contacts)
        mu_cone = np.maximum(mu_ineq[self.ineq_slices["friction_cone"]], 0.0).reshape(p.N, nc)
        F = self.forces(z)
        rows, cols, vals = [], [], []
        for k, c in zip(*np.nonzero(mu_cone)):
            n = self.normals[c]
            proj = np.eye(3) - np.outer(n, n)
            ft = proj @ F[k, c]
            s_ = np.sqrt(ft @ ft + CONE_SMOOTHING ** 2)
            B = mu_cone[k, c] * (proj / s_ - np.outer(ft, ft) / s_ ** 3)
            fcols = self.u_idx[k][self.fslice].reshape(nc, 3)[c]
            rr, cc = np.meshgrid(fcols, fcols, indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(B.ravel())
        if rows:
            H = H + sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n_var, self.n_var)
            )
        return sp.csc_matrix(H)

    # reporting ----------------------------------------------------------------

    def violations(self, z) -> dict[str, float]:
        """Max violation per constraint group, in natural units."""
        out = {}
        c_e = self.eq(z)
        for g, s in self.eq_slices.items():
            out[g] = float(np.max(np.abs(c_e[s]), initial=0.0))
        c_i = self.ineq(z)
        for g, s in self.ineq_slices.items():
            if g == "friction_cone":
                continue
            out[g] = float(np.max(np.maximum(c_i[s], 0.0), initial=0.0))
        if self.p.contacts:
            F = self.forces(z)
            margins = np.array([check_friction_cone(self.p.contacts, F[k]) for k in range(self.p.N)])
            out["friction_cone"] = float(np.max(np.maximum(-margins, 0.0), initial=0.0))
        else:
            out["friction_cone"] = 0.0
        return out
