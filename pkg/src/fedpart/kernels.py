"""Local-step kernels, written so numba can compile the same source.

These are the hot loops: K simultaneous SGD steps on (u, v) for one client.
All randomness is pre-drawn by the caller (noise rows / minibatch indices),
which keeps the kernels pure and lets the numba and numpy paths consume
identical streams. `corr_u` is the control-variate correction c_i - c
(zeros for the uncorrected algorithm); the u-direction is g - corr_u.

The quadratic kernel is purely elementwise, so the compiled and plain paths
produce bitwise-identical iterates. The logistic kernel uses dot products;
backends agree there to roundoff (~1e-12 relative), not bitwise.
"""

from __future__ import annotations

import math

import numpy as np


def quad_local_steps(u0, v0, a_i, b_i, gamma_u, gamma_v, noise_u, noise_v, corr_u):
    """K steps of u -= gamma_u*(u - a_i + noise - corr), v -= gamma_v*(v - b_i + noise)."""
    u = u0.copy()
    v = v0.copy()
    for k in range(noise_u.shape[0]):
        g_u = (u - a_i) + noise_u[k] - corr_u
        g_v = (v - b_i) + noise_v[k]
        u = u - gamma_u * g_u
        v = v - gamma_v * g_v
    return u, v


def logistic_local_steps(u0, v0, A, B, y, rho, gamma_u, gamma_v, idx, corr_u):
    """K minibatch steps on the regularized logistic loss of one shard.

    idx has shape (K, batch); row k holds the shard rows of step k's batch.
    Loss per row: log(1 + exp(-y * (a.u + b.v))); the smooth non-convex
    regularizer rho * (|u|^2/(1+|u|^2) + |v|^2/(1+|v|^2)) is added per step.
    """
    u = u0.copy()
    v = v0.copy()
    K, batch = idx.shape
    for k in range(K):
        g_u = np.zeros(u.shape[0])
        g_v = np.zeros(v.shape[0])
        for j in range(batch):
            r = idx[k, j]
            margin = y[r] * (np.dot(A[r], u) + np.dot(B[r], v))
            # sigmoid(-margin), overflow-safe in both branches
            if margin <= 0.0:
                sig = 1.0 / (1.0 + math.exp(margin))
            else:
                t = math.exp(-margin)
                sig = t / (1.0 + t)
            w = -y[r] * sig
            g_u = g_u + w * A[r]
            g_v = g_v + w * B[r]
        su = np.dot(u, u)
        sv = np.dot(v, v)
        cu = 2.0 * rho / ((1.0 + su) * (1.0 + su))
        cv = 2.0 * rho / ((1.0 + sv) * (1.0 + sv))
        g_u = g_u / batch + cu * u - corr_u
        g_v = g_v / batch + cv * v
        u = u - gamma_u * g_u
        v = v - gamma_v * g_v
    return u, v
