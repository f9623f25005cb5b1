# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, floor, fabs

cnp.import_array()


def total_reward_batch(double[::1] alpha, double beta,
                       double[::1] d_l, double[::1] d_r,
                       double[::1] d_x, double[::1] d_z,
                       double[::1] d_t, double[::1] d_b,
                       double[::1] r_task, double[::1] act_sq):
    cdef Py_ssize_t n = d_l.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double a, b, rl, rr
    with nogil:
        for i in range(n):
            a = 1.0 / (1.0 + d_l[i] * d_l[i])
            b = 1.0 / (1.0 + d_r[i] * d_r[i])
            rl = a * a
            rr = b * b
            o[i] = (alpha[0] * rl
                    + alpha[1] * rr
                    + alpha[2] * (d_x[i] * fabs(d_x[i]) + d_z[i] * fabs(d_z[i]))
                    + alpha[3] * (beta - (d_t[i] + d_b[i]))
                    + alpha[4] * r_task[i]
                    - alpha[5] * act_sq[i])
    return out


def voxel_indices(const double[:, ::1] points, const double[::1] origin, double cell):
    cdef Py_ssize_t n = points.shape[0], i, c
    out = np.empty((n, 3), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] o = out
    with nogil:
        for i in range(n):
            for c in range(3):
                o[i, c] = <cnp.int64_t>floor((points[i, c] - origin[c]) / cell)
    return out


cdef void _matmul3(double* A, double* B, double* C) nogil:
    # C = A @ B, row-major 3x3
    cdef int r, c, k
    cdef double acc
    for r in range(3):
        for c in range(3):
            acc = 0.0
            for k in range(3):
                acc += A[3 * r + k] * B[3 * k + c]
            C[3 * r + c] = acc


def chain_fk_batch(const double[:, ::1] q, const double[:, ::1] seg_t,
                   const double[:, :, ::1] seg_R, const cnp.int64_t[::1] seg_joint,
                   const cnp.int64_t[::1] seg_type, const double[:, ::1] seg_axis,
                   const double[::1] seg_scale):
    cdef Py_ssize_t k = q.shape[0], m = seg_t.shape[0], row, s, r, c
    out = np.zeros((k, 4, 4))
    cdef double[:, :, ::1] o = out
    cdef double R[9]
    cdef double T[9]
    cdef double M[9]
    cdef double p[3]
    cdef double ax, ay, az, th, sn, cs, v
    cdef cnp.int64_t j
    with nogil:
        for row in range(k):
            for r in range(9):
                R[r] = 0.0
            R[0] = 1.0; R[4] = 1.0; R[8] = 1.0
            p[0] = 0.0; p[1] = 0.0; p[2] = 0.0
            for s in range(m):
                for r in range(3):
                    p[r] += R[3 * r] * seg_t[s, 0] + R[3 * r + 1] * seg_t[s, 1] + R[3 * r + 2] * seg_t[s, 2]
                for r in range(3):
                    for c in range(3):
                        M[3 * r + c] = seg_R[s, r, c]
                _matmul3(R, M, T)
                for r in range(9):
                    R[r] = T[r]
                j = seg_joint[s]
                if j < 0:
                    continue
                v = seg_scale[s] * q[row, j]
                ax = seg_axis[s, 0]; ay = seg_axis[s, 1]; az = seg_axis[s, 2]
                if seg_type[s] == 0:
                    sn = sin(v)
                    cs = 1.0 - cos(v)
                    # Rodrigues: I + sin K + (1 - cos) K^2
                    M[0] = 1.0 - cs * (ay * ay + az * az)
                    M[1] = -sn * az + cs * ax * ay
                    M[2] = sn * ay + cs * ax * az
                    M[3] = sn * az + cs * ax * ay
                    M[4] = 1.0 - cs * (ax * ax + az * az)
                    M[5] = -sn * ax + cs * ay * az
                    M[6] = -sn * ay + cs * ax * az
                    M[7] = sn * ax + cs * ay * az
                    M[8] = 1.0 - cs * (ax * ax + ay * ay)
                    _matmul3(R, M, T)
                    for r in range(9):
                        R[r] = T[r]
                else:
                    for r in range(3):
                        p[r] += v * (R[3 * r] * ax + R[3 * r + 1] * ay + R[3 * r + 2] * az)
            for r in range(3):
                for c in range(3):
                    o[row, r, c] = R[3 * r + c]
                o[row, r, 3] = p[r]
            o[row, 3, 3] = 1.0
    return out


def cone_margins(const double[:, ::1] forces, const double[:, ::1] normals, const double[::1] mu):
    cdef Py_ssize_t k = forces.shape[0], i, c
    out = np.empty(k)
    cdef double[::1] o = out
    cdef double fn, tx, ty, tz
    with nogil:
        for i in range(k):
            fn = 0.0
            for c in range(3):
                fn += forces[i, c] * normals[i, c]
            tx = forces[i, 0] - fn * normals[i, 0]
            ty = forces[i, 1] - fn * normals[i, 1]
            tz = forces[i, 2] - fn * normals[i, 2]
            o[i] = mu[i] * fn - sqrt(tx * tx + ty * ty + tz * tz)
    return out


def trapezoid_defects(const double[:, ::1] X, const double[:, ::1] Fa,
                      const double[:, ::1] Fb, double dt):
    cdef Py_ssize_t n = Fa.shape[0], nx = Fa.shape[1], i, c
    out = np.empty((n, nx))
    cdef double[:, ::1] o = out
    cdef double h = 0.5 * dt
    with nogil:
        for i in range(n):
            for c in range(nx):
                o[i, c] = X[i + 1, c] - X[i, c] - h * (Fa[i, c] + Fb[i, c])
    return out
