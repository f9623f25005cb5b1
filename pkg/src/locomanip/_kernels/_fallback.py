"""Numpy implementations of the hot kernels.

Signatures mirror ``_ckernels``; inputs are assumed validated by the callers
(finite, float64, contiguous shapes as documented).
"""

import numpy as np


def total_reward_batch(alpha, beta, d_l, d_r, d_x, d_z, d_t, d_b, r_task, act_sq):
    """Weighted reward over a batch. ``alpha`` holds the six term weights."""
    r_l = (1.0 / (1.0 + d_l * d_l)) ** 2
    r_r = (1.0 / (1.0 + d_r * d_r)) ** 2
    r_rot = np.sign(d_x) * d_x * d_x + np.sign(d_z) * d_z * d_z
    r_finger = beta - (d_t + d_b)
    return (
        alpha[0] * r_l
        + alpha[1] * r_r
        + alpha[2] * r_rot
        + alpha[3] * r_finger
        + alpha[4] * r_task
        - alpha[5] * act_sq
    )


def voxel_indices(points, origin, cell):
    return np.floor((points - origin) / cell).astype(np.int64)


def _axis_rotation(axis, angle):
    k = np.array(
        [[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def chain_fk_batch(q, seg_t, seg_R, seg_joint, seg_type, seg_axis, seg_scale):
    """Homogeneous end transforms of a segment chain for each row of ``q``."""
    k = q.shape[0]
    out = np.empty((k, 4, 4))
    for row in range(k):
        R = np.eye(3)
        p = np.zeros(3)
        for s in range(seg_t.shape[0]):
            p = p + R @ seg_t[s]
            R = R @ seg_R[s]
            j = seg_joint[s]
            if j < 0:
                continue
            value = seg_scale[s] * q[row, j]
            if seg_type[s] == 0:
                R = R @ _axis_rotation(seg_axis[s], value)
            else:
                p = p + R @ (seg_axis[s] * value)
        out[row] = np.eye(4)
        out[row, :3, :3] = R
        out[row, :3, 3] = p
    return out


def cone_margins(forces, normals, mu):
    fn = np.einsum("ij,ij->i", forces, normals)
    tangential = forces - fn[:, None] * normals
    return mu * fn - np.linalg.norm(tangential, axis=1)


def trapezoid_defects(X, Fa, Fb, dt):
    return X[1:] - X[:-1] - 0.5 * dt * (Fa + Fb)
