"""Objectives over a shared variable u and per-client personal variables v_i.

The global objective is f(u, v) = (1/n) * sum_i f_i(u, v_i). An oracle
exposes, per client i: exact value and gradients, and a stochastic gradient
realizing one draw of (grad_u F, grad_v F)(u, v_i; xi). Two concrete
objectives are provided:

- QuadraticObjective: f_i = 0.5*|u - a_i|^2 + 0.5*|v_i - b_i|^2 with
  Gaussian gradient noise of exactly controllable second moment. Its
  curvature (L = 1), gradient dissimilarity b^2 and infimum are known in
  closed form, which makes step-size theory testable against ground truth.
- LogisticObjective: per-shard mean of log(1 + exp(-c * (a.u + b.v)))
  plus a smooth non-convex regularizer
  rho * (|u|^2/(1+|u|^2) + |v|^2/(1+|v|^2)).

Oracles are immutable after construction; every stochastic evaluation takes
its generator as an explicit argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import expit

from . import backend

if TYPE_CHECKING:
    from .dataio import ClientShard


def _check_dims(u: np.ndarray, v: np.ndarray, d_u: int, d_v: int) -> None:
    if u.shape != (d_u,):
        raise ValueError(f"u has shape {u.shape}, expected ({d_u},)")
    if v.shape != (d_v,):
        raise ValueError(f"v has shape {v.shape}, expected ({d_v},)")


class ObjectiveOracle:
    """Oracle contract plus a generic reference implementation of local steps.

    Subclasses must provide n, d_u, d_v and the four evaluation methods.
    `local_steps` here is the straightforward per-step loop over stoch_grad;
    concrete objectives override it with batched kernel calls that consume
    the generator in exactly the same order, so both paths draw identical
    randomness.
    """

    n: int
    d_u: int
    d_v: int

    def value(self, i: int, u: np.ndarray, v: np.ndarray) -> float:
        raise NotImplementedError

    def grads(self, i: int, u: np.ndarray, v: np.ndarray):
        raise NotImplementedError

    def grad_u(self, i: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.grads(i, u, v)[0]

    def grad_v(self, i: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.grads(i, u, v)[1]

    def stoch_grad(self, i: int, u: np.ndarray, v: np.ndarray, rng: np.random.Generator):
        raise NotImplementedError

    def local_steps(
        self,
        i: int,
        u0: np.ndarray,
        v0: np.ndarray,
        K: int,
        gamma_u: float,
        gamma_v: float,
        rng: np.random.Generator,
        corr_u: np.ndarray | None = None,
    ):
        """K simultaneous SGD steps on (u, v) for client i.

        Both gradients of each step are evaluated at the same (u_k, v_k)
        and the same draw. The u-direction is g_u - corr_u when a
        control-variate correction is given.
        """
        u = u0.copy()
        v = v0.copy()
        for _ in range(K):
            g_u, g_v = self.stoch_grad(i, u, v, rng)
            if corr_u is not None:
                g_u = g_u - corr_u
            u = u - gamma_u * g_u
            v = v - gamma_v * g_v
        return u, v


@dataclass(frozen=True)
class QuadraticObjective(ObjectiveOracle):
    """f_i(u, v_i) = 0.5*|u - a_i|^2 + 0.5*|v_i - b_i|^2.

    stoch_grad adds independent zero-mean Gaussian noise with per-coordinate
    std sigma_u/sqrt(d_u) (resp. sigma_v/sqrt(d_v)), so the total noise
    second moment is exactly sigma_u^2 (sigma_v^2). The generator is
    consumed identically whether sigma is zero or not.
    """

    centers_u: np.ndarray  # (n, d_u) rows a_i
    centers_v: np.ndarray  # (n, d_v) rows b_i
    sigma_u: float = 0.0
    sigma_v: float = 0.0

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.centers_u, dtype=np.float64))
        b = np.ascontiguousarray(np.asarray(self.centers_v, dtype=np.float64))
        if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0] or a.shape[0] < 1:
            raise ValueError("centers_u and centers_v must be (n, d) arrays with equal n >= 1")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("centers must be finite")
        if self.sigma_u < 0 or self.sigma_v < 0:
            raise ValueError("noise levels must be >= 0")
        object.__setattr__(self, "centers_u", a)
        object.__setattr__(self, "centers_v", b)

    @property
    def n(self) -> int:
        return self.centers_u.shape[0]

    @property
    def d_u(self) -> int:
        return self.centers_u.shape[1]

    @property
    def d_v(self) -> int:
        return self.centers_v.shape[1]

    def value(self, i, u, v):
        _check_dims(u, v, self.d_u, self.d_v)
        du = u - self.centers_u[i]
        dv = v - self.centers_v[i]
        return 0.5 * float(du @ du) + 0.5 * float(dv @ dv)

    def grads(self, i, u, v):
        _check_dims(u, v, self.d_u, self.d_v)
        return u - self.centers_u[i], v - self.centers_v[i]

    def stoch_grad(self, i, u, v, rng):
        g_u, g_v = self.grads(i, u, v)
        z_u = rng.standard_normal(self.d_u)
        z_v = rng.standard_normal(self.d_v)
        g_u = g_u + (self.sigma_u / math.sqrt(self.d_u)) * z_u
        g_v = g_v + (self.sigma_v / math.sqrt(self.d_v)) * z_v
        return g_u, g_v

    def local_steps(self, i, u0, v0, K, gamma_u, gamma_v, rng, corr_u=None):
        _check_dims(u0, v0, self.d_u, self.d_v)
        # one batched draw, value-for-value identical to K per-step draws
        z = rng.standard_normal((K, self.d_u + self.d_v))
        noise_u = z[:, : self.d_u] * (self.sigma_u / math.sqrt(self.d_u))
        noise_v = z[:, self.d_u :] * (self.sigma_v / math.sqrt(self.d_v))
        if corr_u is None:
            corr_u = np.zeros(self.d_u)
        return backend.quad_local_steps(
            u0, v0, self.centers_u[i], self.centers_v[i],
            gamma_u, gamma_v, noise_u, noise_v, corr_u,
        )

    def dissimilarity_b2(self) -> float:
        """Exact b^2 = (1/n) sum_i |a_i - abar|^2, constant in (u, v)."""
        centered = self.centers_u - self.centers_u.mean(axis=0)
        return float((centered * centered).sum(axis=1).mean())

    def infimum(self) -> float:
        """inf f: attained at u = abar, v_i = b_i; equals b^2 / 2."""
        return 0.5 * self.dissimilarity_b2()


def _reg_value(u: np.ndarray, v: np.ndarray) -> float:
    su = float(u @ u)
    sv = float(v @ v)
    return su / (1.0 + su) + sv / (1.0 + sv)


def _reg_coeffs(u: np.ndarray, v: np.ndarray):
    # gradient of s/(1+s) at s=|x|^2 is 2x/(1+|x|^2)^2
    su = float(u @ u)
    sv = float(v @ v)
    return 2.0 / ((1.0 + su) * (1.0 + su)), 2.0 / ((1.0 + sv) * (1.0 + sv))


class LogisticObjective(ObjectiveOracle):
    """Per-shard regularized binary logistic loss.

    f_i(u, v_i) = (1/N_i) * sum_l log(1 + exp(-c_l * (a_l.u + b_l.v_i)))
                  + rho * (|u|^2/(1+|u|^2) + |v_i|^2/(1+|v_i|^2))

    Minibatches are drawn uniformly with replacement, batch_size rows per
    step.
    """

    def __init__(self, shards: "list[ClientShard]", rho: float = 0.01, batch_size: int = 1):
        if not shards:
            raise ValueError("need at least one shard")
        if rho < 0:
            raise ValueError("rho must be >= 0")
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        d_u = shards[0].A.shape[1]
        d_v = shards[0].B.shape[1]
        for s in shards:
            if s.A.shape[0] == 0:
                raise ValueError(f"shard {s.client_id} is empty")
            if s.A.shape[1] != d_u or s.B.shape[1] != d_v:
                raise ValueError("all shards must share (d_u, d_v)")
        self.shards = list(shards)
        self.rho = float(rho)
        self.batch_size = int(batch_size)
        self.n = len(shards)
        self.d_u = d_u
        self.d_v = d_v

    def value(self, i, u, v):
        _check_dims(u, v, self.d_u, self.d_v)
        s = self.shards[i]
        margins = s.y * (s.A @ u + s.B @ v)
        loss = float(np.logaddexp(0.0, -margins).mean())
        return loss + self.rho * _reg_value(u, v)

    def grads(self, i, u, v):
        _check_dims(u, v, self.d_u, self.d_v)
        s = self.shards[i]
        margins = s.y * (s.A @ u + s.B @ v)
        w = -s.y * expit(-margins)
        inv_n = 1.0 / s.y.shape[0]
        cu, cv = _reg_coeffs(u, v)
        g_u = inv_n * (s.A.T @ w) + (self.rho * cu) * u
        g_v = inv_n * (s.B.T @ w) + (self.rho * cv) * v
        return g_u, g_v

    def stoch_grad(self, i, u, v, rng):
        _check_dims(u, v, self.d_u, self.d_v)
        s = self.shards[i]
        rows = rng.integers(0, s.y.shape[0], size=self.batch_size)
        A = s.A[rows]
        B = s.B[rows]
        y = s.y[rows]
        margins = y * (A @ u + B @ v)
        w = -y * expit(-margins)
        cu, cv = _reg_coeffs(u, v)
        g_u = (A.T @ w) / self.batch_size + (self.rho * cu) * u
        g_v = (B.T @ w) / self.batch_size + (self.rho * cv) * v
        return g_u, g_v

    def local_steps(self, i, u0, v0, K, gamma_u, gamma_v, rng, corr_u=None):
        _check_dims(u0, v0, self.d_u, self.d_v)
        s = self.shards[i]
        idx = rng.integers(0, s.y.shape[0], size=(K, self.batch_size))
        if corr_u is None:
            corr_u = np.zeros(self.d_u)
        return backend.logistic_local_steps(
            u0, v0, s.A, s.B, s.y, self.rho, gamma_u, gamma_v, idx, corr_u
        )
