"""SQP solver for transcribed whole-body problems.

Each iteration solves a convex QP (Lagrangian Hessian, which is positive
semidefinite for the shipped linear dynamics and convex cone) with the interior-point solver in :mod:`.qp`, then
runs a backtracking line search on the exact-penalty merit
``phi(z) = J(z) + nu * (|c_E|_1 + |max(c_I, 0)|_1)``. When the linearized
constraints are inconsistent, an elastic feasibility QP is solved instead;
if the constraint violation cannot be pushed below ``10 * tol`` the problem is
declared infeasible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .problem import OcpProblem, Transcription
from .qp import solve_qp


class SolveStatus(enum.Enum):
    Converged = "Converged"
    MaxIter = "MaxIter"
    Infeasible = "Infeasible"


@dataclass
class KktReport:
    stationarity: float
    primal: dict[str, float]
    complementarity: float
    dual_infeasibility: float

    @property
    def primal_infeasibility(self) -> float:
        return max(self.primal.values(), default=0.0)

    @property
    def dynamics_defect(self) -> float:
        return self.primal.get("dynamics", 0.0)

    @property
    def total(self) -> float:
        return max(self.stationarity, self.primal_infeasibility, self.complementarity, self.dual_infeasibility)

    def as_dict(self) -> dict:
        return {
            "stationarity": self.stationarity,
            "primal": dict(self.primal),
            "complementarity": self.complementarity,
            "dual_infeasibility": self.dual_infeasibility,
            "total": self.total,
        }


@dataclass(eq=False)
class OcpSolution:
    X: np.ndarray
    U: np.ndarray
    objective: float
    kkt: float
    iterations: int
    status: SolveStatus
    eq_multipliers: np.ndarray | None = None
    ineq_multipliers: np.ndarray | None = None
    report: KktReport | None = None
    history: list[dict] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.Converged


def _kkt(tr: Transcription, z, lam, mu) -> KktReport:
    g = tr.gradient(z)
    grad_l = g + tr.eq_jac(z).T @ lam + tr.ineq_jac(z).T @ mu
    c_i = tr.ineq(z)
    return KktReport(
        stationarity=float(np.max(np.abs(grad_l), initial=0.0)),
        primal=tr.violations(z),
        complementarity=float(np.max(np.abs(np.maximum(mu, 0.0) * np.minimum(c_i, 0.0)), initial=0.0)),
        dual_infeasibility=float(np.max(np.maximum(-mu, 0.0), initial=0.0)),
    )


def evaluate_kkt(problem: OcpProblem, solution: OcpSolution) -> KktReport:
    """Residual report for ``solution``; multipliers missing from the solution
    are taken as the least-squares fit to the stationarity condition."""
    tr = Transcription(problem)
    z = tr.pack(solution.X, solution.U)
    lam = solution.eq_multipliers
    mu = solution.ineq_multipliers
    if lam is None or mu is None or lam.size != tr.n_eq or mu.size != tr.n_ineq:
        lam, mu = _ls_multipliers(tr, z)
    return _kkt(tr, z, lam, mu)


def _ls_multipliers(tr: Transcription, z):
    c_i = tr.ineq(z)
    active = np.nonzero(c_i > -1e-8)[0]
    J = sp.vstack([tr.eq_jac(z), tr.ineq_jac(z)[active]]).T.toarray()
    sol, *_ = np.linalg.lstsq(J, -tr.gradient(z), rcond=None)
    lam = sol[: tr.n_eq]
    mu = np.zeros(tr.n_ineq)
    mu[active] = np.maximum(sol[tr.n_eq:], 0.0)
    return lam, mu


def _violation1(c_e, c_i) -> float:
    return float(np.sum(np.abs(c_e)) + np.sum(np.maximum(c_i, 0.0)))


def _violation_inf(c_e, c_i) -> float:
    return float(max(np.max(np.abs(c_e), initial=0.0), np.max(np.maximum(c_i, 0.0), initial=0.0)))


def _elastic_step(tr, z, c_e, c_i, JE, JI, rho=1e-6):
    """Step minimizing the l1 norm of the linearized violation."""
    n, me, mi = tr.n_var, tr.n_eq, tr.n_ineq
    nt = 2 * me + mi
    P = sp.block_diag([rho * sp.identity(n), 1e-10 * sp.identity(nt)], format="csc")
    q = np.concatenate([np.zeros(n), np.ones(nt)])
    I_e = sp.identity(me)
    A = sp.hstack([JE, -I_e, I_e, sp.csr_matrix((me, mi))], format="csc")
    G = sp.vstack(
        [
            sp.hstack([JI, sp.csr_matrix((mi, 2 * me)), -sp.identity(mi)]),
            sp.hstack([sp.csr_matrix((nt, n)), -sp.identity(nt)]),
        ],
        format="csc",
    )
    h = np.concatenate([-c_i, np.zeros(nt)])
    res = solve_qp(P, q, A, -c_e, G, h)
    return res.x[:n], float(np.sum(res.x[n:])), res.status


def solve(
    problem: OcpProblem,
    tol: float = 1e-6,
    max_iter: int = 200,
    warm_start: OcpSolution | None = None,
) -> OcpSolution:
    tr = Transcription(problem)
    z = tr.initial_guess()
    lam = np.zeros(tr.n_eq)
    mu = np.zeros(tr.n_ineq)
    if warm_start is not None:
        z = tr.pack(warm_start.X, warm_start.U)
        if warm_start.eq_multipliers is not None and warm_start.eq_multipliers.size == tr.n_eq:
            lam = warm_start.eq_multipliers.copy()
        if warm_start.ineq_multipliers is not None and warm_start.ineq_multipliers.size == tr.n_ineq:
            mu = np.maximum(warm_start.ineq_multipliers, 0.0)

    nu = 1.0
    history: list[dict] = []
    best = None
    status = SolveStatus.MaxIter
    iterations = 0
    qp_failures = 0

    def finish(z, lam, mu, status, report):
        X, U = tr.unpack(z)
        return OcpSolution(
            X=X.copy(),
            U=U.copy(),
            objective=tr.objective(z),
            kkt=report.total,
            iterations=iterations,
            status=status,
            eq_multipliers=lam.copy(),
            ineq_multipliers=mu.copy(),
            report=report,
            history=history,
        )

    while True:
        report = _kkt(tr, z, lam, mu)
        if best is None or report.total < best[0]:
            best = (report.total, z.copy(), lam.copy(), mu.copy(), report)
        if report.total <= tol:
            return finish(z, lam, mu, SolveStatus.Converged, report)
        if iterations >= max_iter:
            break
        iterations += 1

        c_e, c_i = tr.eq(z), tr.ineq(z)
        JE, JI = tr.eq_jac(z), tr.ineq_jac(z)
        g = tr.gradient(z)
        W = tr.hessian(z, mu)
        qp = solve_qp(W, g, JE, -c_e, JI, -c_i)
        if qp.status != "optimal":
            qp_failures += 1
            d, lin_viol, _ = _elastic_step(tr, z, c_e, c_i, JE, JI)
            v1 = _violation1(c_e, c_i)
            if lin_viol >= v1 * (1.0 - 1e-6) or qp_failures > 20:
                if _violation_inf(c_e, c_i) > 10.0 * tol:
                    status = SolveStatus.Infeasible
                    history.append({"iteration": iterations, "restoration": True, "violation": v1})
                    return finish(z, lam, mu, status, report)
                break
            alpha = 1.0
            while alpha > 1e-10:
                zt = z + alpha * d
                if _violation1(tr.eq(zt), tr.ineq(zt)) <= v1 - 1e-4 * alpha * (v1 - lin_viol):
                    break
                alpha *= 0.5
            z = z + alpha * d
            history.append({"iteration": iterations, "restoration": True, "violation": _violation1(tr.eq(z), tr.ineq(z))})
            continue
        qp_failures = 0

        d, lam_qp, mu_qp = qp.x, qp.y, np.maximum(qp.z, 0.0)
        nu = max(nu, float(max(np.max(np.abs(lam_qp), initial=0.0), np.max(mu_qp, initial=0.0))) + 1.0)
        v1 = _violation1(c_e, c_i)
        phi0 = tr.objective(z) + nu * v1
        slope = float(g @ d) - nu * v1
        alpha = 1.0
        accepted = False
        while alpha > 1e-12:
            zt = z + alpha * d
            phi = tr.objective(zt) + nu * _violation1(tr.eq(zt), tr.ineq(zt))
            if phi <= phi0 + 1e-4 * alpha * min(slope, 0.0):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # Merit is flat to machine precision along d; take the tiny step
            # only if it does not increase the merit.
            zt = z + alpha * d
            phi = tr.objective(zt) + nu * _violation1(tr.eq(zt), tr.ineq(zt))
            if phi > phi0:
                break
        z = zt
        lam = lam + alpha * (lam_qp - lam)
        mu = mu + alpha * (mu_qp - mu)
        history.append(
            {
                "iteration": iterations,
                "restoration": False,
                "step": alpha,
                "penalty": nu,
                "merit_before": phi0,
                "merit_after": phi,
                "objective": tr.objective(z),
                "violation": _violation1(tr.eq(z), tr.ineq(z)),
            }
        )

    _, zb, lb, mb, rb = best
    return finish(zb, lb, mb, status, rb)
