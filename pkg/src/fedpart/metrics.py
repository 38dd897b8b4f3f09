"""Reported quantities and constant estimation.

Per-round metrics (all from exact full-batch gradients over every client,
sampled or not):

    G_u  = |(1/n) sum_i grad_u f_i(u, v_i)|^2
    G_v  = (1/n) sum_i |grad_v f_i(u, v_i)|^2
    G_v_hat = (m/n) * G_v

These are per-run sample-path values of the theory's expectations; tests
average over seeds where variance matters. Constant estimation recovers the
smoothness L, the gradient dissimilarity b^2 (pointwise slack, a variance,
hence nonnegative) and the initial gap F0 feeding the step-size formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConstantEstimates:
    L_hat: float
    b2_hat: float
    F0: float


def function_value(oracle, u, v_all) -> float:
    """f(u, v) = (1/n) sum_i f_i(u, v_i)."""
    vals = np.array([oracle.value(i, u, v_all[i]) for i in range(oracle.n)])
    return float(vals.mean())


def grad_norm_shared(oracle, u, v_all) -> float:
    """|grad_u f(u, v)|^2 with grad_u f = (1/n) sum_i grad_u f_i."""
    g = np.stack([oracle.grad_u(i, u, v_all[i]) for i in range(oracle.n)])
    gbar = g.mean(axis=0)
    return float(gbar @ gbar)


def grad_norm_personal(oracle, u, v_all, m: int, n: int):
    """(G_v, G_v_hat): mean squared per-client v-gradient norm and its m/n scaling."""
    sq = np.array(
        [float(np.square(oracle.grad_v(i, u, v_all[i])).sum()) for i in range(oracle.n)]
    )
    g_v = float(sq.mean())
    return g_v, (m / n) * g_v


def estimate_dissimilarity(oracle, u, v_all) -> float:
    """Pointwise dissimilarity slack (1/n) sum_i |grad_u f_i|^2 - |grad_u f|^2.

    By the variance identity this is nonnegative (up to roundoff); for the
    synthetic quadratic it equals (1/n) sum_i |a_i - abar|^2 at every point.
    """
    g = np.stack([oracle.grad_u(i, u, v_all[i]) for i in range(oracle.n)])
    gbar = g.mean(axis=0)
    return float(np.square(g).sum(axis=1).mean() - gbar @ gbar)


def estimate_smoothness(oracle, probe_points: int, radius: float, rng) -> float:
    """Empirical lower bound on the joint smoothness constant L.

    Samples base points x = (u, v) within `radius` of the origin and short
    displacements delta, and maximizes |grad f_i(x+delta) - grad f_i(x)| /
    |delta| over probes and clients. The probe step is radius/1000, small
    enough to read local curvature.
    """
    if probe_points < 2:
        raise ValueError("need at least 2 probe points")
    d_u, d_v = oracle.d_u, oracle.d_v
    step = radius * 1e-3
    best = 0.0
    for p in range(probe_points):
        i = p % oracle.n
        x = rng.standard_normal(d_u + d_v) * radius
        delta = rng.standard_normal(d_u + d_v)
        delta *= step / float(np.sqrt(delta @ delta))
        u0, v0 = x[:d_u], x[d_u:]
        u1, v1 = u0 + delta[:d_u], v0 + delta[d_u:]
        g0u, g0v = oracle.grads(i, u0, v0)
        g1u, g1v = oracle.grads(i, u1, v1)
        diff = np.concatenate([g1u - g0u, g1v - g0v])
        ratio = float(np.sqrt(diff @ diff)) / step
        if ratio > best:
            best = ratio
    return best


def estimate_initial_gap(oracle, u0, v_all0, iters: int = 500, lr: float | None = None) -> float:
    """F0 = f(u0, v0) - inf f.

    Uses the objective's exact infimum when it exposes one; otherwise runs a
    deterministic full-gradient descent and reports f(u0, v0) minus the best
    value seen, an upper-bound proxy on the true gap.
    """
    f0 = function_value(oracle, u0, v_all0)
    if hasattr(oracle, "infimum"):
        return f0 - float(oracle.infimum())
    if lr is None:
        lr = 0.5 / max(estimate_smoothness(oracle, 30, 1.0, np.random.default_rng(0)), 1e-12)
    u = u0.copy()
    v = [v_all0[i].copy() for i in range(oracle.n)]
    best = f0
    for _ in range(iters):
        g = np.stack([oracle.grad_u(i, u, v[i]) for i in range(oracle.n)])
        u = u - lr * g.mean(axis=0)
        for i in range(oracle.n):
            v[i] = v[i] - lr * oracle.grad_v(i, u, v[i])
        best = min(best, function_value(oracle, u, v))
    return f0 - best


def estimate_constants(oracle, u0, v_all0, rng, probe_points: int = 120, radius: float = 1.0):
    """Bundle (L_hat, b2_hat, F0) at the given initial point."""
    return ConstantEstimates(
        L_hat=estimate_smoothness(oracle, probe_points, radius, rng),
        b2_hat=estimate_dissimilarity(oracle, u0, v_all0),
        F0=estimate_initial_gap(oracle, u0, v_all0),
    )
