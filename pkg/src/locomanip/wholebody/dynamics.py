"""Dynamics callbacks for the transcribed OCP.

State ``x = [q, v]`` (``n_x = 2 n_q``); input ``u = [accelerations, contact
forces]`` with three force components per contact. Every model evaluates
``f(x, u)`` on single samples or on batches (leading axis).
"""

from __future__ import annotations

import numpy as np


def fd_jacobians(f, x, u, eps: float = 1e-6):
    """Central-difference Jacobians of ``f`` at a single sample."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    fx = f(x, u)
    A = np.empty((fx.size, x.size))
    B = np.empty((fx.size, u.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        A[:, i] = (f(x + e, u) - f(x - e, u)) / (2 * eps)
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = eps
        B[:, i] = (f(x, u + e) - f(x, u - e)) / (2 * eps)
    return A, B


class DynamicsModel:
    """Base class. Subclasses set ``coordinates``, ``n_accel`` and ``n_contacts``
    and implement ``f``; ``jacobians`` falls back to finite differences."""

    coordinates: list[str]
    n_accel: int
    n_contacts: int = 0
    linear: bool = False

    @property
    def n_q(self) -> int:
        return len(self.coordinates)

    @property
    def n_x(self) -> int:
        return 2 * self.n_q

    @property
    def n_u(self) -> int:
        return self.n_accel + 3 * self.n_contacts

    @property
    def force_slice(self) -> slice:
        return slice(self.n_accel, self.n_accel + 3 * self.n_contacts)

    def f(self, x, u):
        raise NotImplementedError

    def jacobians(self, x, u):
        return fd_jacobians(self.f, x, u)


class DoubleIntegrator(DynamicsModel):
    """Every coordinate (joints and floating-base coordinates alike) is an
    independent double integrator driven by its acceleration input.

    Contact forces, when present, are decision variables constrained only by
    the contact conditions; they do not enter the motion.
    """

    linear = True

    def __init__(self, coordinates, n_contacts: int = 0):
        self.coordinates = list(coordinates)
        self.n_accel = len(self.coordinates)
        self.n_contacts = n_contacts

    def f(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        n = self.n_q
        return np.concatenate([x[..., n:], u[..., :n]], axis=-1)

    def jacobians(self, x, u):
        n = self.n_q
        A = np.zeros((2 * n, 2 * n))
        A[:n, n:] = np.eye(n)
        B = np.zeros((2 * n, self.n_u))
        B[n:, :n] = np.eye(n)
        return A, B


class PlanarFloatingBase(DynamicsModel):
    """Planar floating base (x, z, pitch) supported by point contacts, plus
    double-integrator joints.

    Base accelerations follow from the force balance on the trunk::

        m x''     = sum f_x
        m z''     = sum f_z - m g
        I pitch'' = sum (r_z f_x - r_x f_z)

    with ``r`` the fixed lever arm of each contact relative to the base origin.
    The lateral component ``f_y`` only enters the contact conditions.
    """

    linear = True
    BASE = ("base_x", "base_z", "base_pitch")

    def __init__(self, joints=(), levers=((0.0, 0.0, -0.5),), mass: float = 1.0, inertia: float = 0.1, gravity: float = 9.81):
        self.joints = list(joints)
        self.coordinates = list(self.BASE) + self.joints
        self.n_accel = len(self.joints)
        self.levers = np.asarray(levers, dtype=float).reshape(-1, 3)
        self.n_contacts = len(self.levers)
        if mass <= 0 or inertia <= 0:
            raise ValueError("mass and inertia must be positive")
        self.mass = float(mass)
        self.inertia = float(inertia)
        self.gravity = float(gravity)
        self._build()

    def _build(self):
        n, nj, nc = self.n_q, len(self.joints), self.n_contacts
        A = np.zeros((2 * n, 2 * n))
        A[:n, n:] = np.eye(n)
        B = np.zeros((2 * n, self.n_u))
        B[n + 3:, :nj] = np.eye(nj)
        for c in range(nc):
            rx, _, rz = self.levers[c]
            col = nj + 3 * c
            B[n + 0, col + 0] = 1.0 / self.mass
            B[n + 1, col + 2] = 1.0 / self.mass
            B[n + 2, col + 0] = rz / self.inertia
            B[n + 2, col + 2] = -rx / self.inertia
        drift = np.zeros(2 * n)
        drift[n + 1] = -self.gravity
        self._A, self._B, self._drift = A, B, drift

    def f(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return x @ self._A.T + u @ self._B.T + self._drift

    def jacobians(self, x, u):
        return self._A.copy(), self._B.copy()
