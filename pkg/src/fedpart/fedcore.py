"""The two federated algorithms over (u, v_1..v_n).

Both run T outer rounds. Each round samples m of n clients; every sampled
client takes K simultaneous stochastic gradient steps on its copies of
(u, v_i), then personal variables merge with outer step eta_v and the
server averages returned u's with outer step eta_u. The control-variate
variant additionally corrects each local u-direction by c - c_i and
refreshes (c_i, c) from the realized local progress, which removes the
client-drift bias caused by gradient dissimilarity.

Determinism: every draw comes from a stream keyed by (seed, tag, t, i), so
a run is a pure function of (inputs, seed) and per-client results do not
depend on execution order. Results for sampled clients are accumulated in
ascending client order before any reduction.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import metrics
from .rng import stream

FEDAVG_P = "fedavg_p"
SCAFFOLD_P = "scaffold_p"
ALGORITHMS = (FEDAVG_P, SCAFFOLD_P)


@dataclass(frozen=True)
class HyperParams:
    gamma_u: float
    gamma_v: float
    eta_u: float
    eta_v: float
    K: int
    T: int
    m: int

    def __post_init__(self):
        # zero is allowed (a zero step is the identity); the corrected
        # algorithm's control update still demands gamma_u > 0 at use site
        for name in ("gamma_u", "gamma_v", "eta_u", "eta_v"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @property
    def gamma_eff_u(self) -> float:
        return self.gamma_u * self.eta_u

    @property
    def gamma_eff_v(self) -> float:
        return self.gamma_v * self.eta_v

    @property
    def coupling_warning(self) -> bool:
        """True when gamma_u*eta_u != gamma_v*eta_v.

        The convergence theory assumes the two effective steps are equal;
        the algorithms are well defined without it, so this is a flag, not
        an error.
        """
        return self.gamma_eff_u != self.gamma_eff_v


@dataclass
class ServerState:
    u: np.ndarray
    c: np.ndarray | None = None  # control-variate mean, corrected variant only
    round: int = 0


@dataclass
class ClientState:
    v: np.ndarray
    c_i: np.ndarray | None = None
    shard: object | None = None


@dataclass(frozen=True)
class RoundTrace:
    t: int
    f_value: float
    grad_norm_u: float
    grad_norm_v: float
    grad_norm_v_hat: float
    sampled: tuple[int, ...]  # ascending, 1-based
    wall_ms: float


@dataclass(frozen=True)
class TrainingResult:
    traces: list[RoundTrace]
    server: ServerState
    clients: list[ClientState]

    @property
    def u(self) -> np.ndarray:
        return self.server.u

    @property
    def v_all(self) -> list[np.ndarray]:
        return [c.v for c in self.clients]


def sample_clients(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random m-subset of {0..n-1}, returned ascending.

    Partial Fisher-Yates: m swaps into the prefix, first m entries taken.
    """
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    idx = np.arange(n)
    for j in range(m):
        r = int(rng.integers(j, n))
        idx[j], idx[r] = idx[r], idx[j]
    out = idx[:m]
    out.sort()
    return out


def local_steps_fedavgp(u_init, v_init, oracle, i, hp: HyperParams, rng):
    """K local steps, lines 5-8: plain stochastic gradients on u and v."""
    return oracle.local_steps(i, u_init, v_init, hp.K, hp.gamma_u, hp.gamma_v, rng)


def local_steps_scaffoldp(u_init, v_init, c_i, c, oracle, i, hp: HyperParams, rng):
    """K local steps with the u-direction corrected to g - c_i + c."""
    return oracle.local_steps(
        i, u_init, v_init, hp.K, hp.gamma_u, hp.gamma_v, rng, corr_u=c_i - c
    )


def merge_personal(v_old, v_K, eta_v: float):
    """v^{t+1} = (1 - eta_v) v^t + eta_v v_K (eta_v may exceed 1)."""
    if v_old.shape != v_K.shape:
        raise ValueError("v_old and v_K must have equal shape")
    return (1.0 - eta_v) * v_old + eta_v * v_K


def aggregate_shared(u_old, returned, eta_u: float, m: int):
    """u^{t+1} = (1 - eta_u) u^t + (eta_u/m) sum of returned u_i."""
    returned = np.asarray(returned)
    if returned.shape[0] != m:
        raise ValueError(f"expected {m} returned vectors, got {returned.shape[0]}")
    return (1.0 - eta_u) * u_old + (eta_u / m) * returned.sum(axis=0)


def init_control_variates(u0, v0_all, oracle, K: int, seed: int):
    """c_i = (1/K) sum of K fresh stochastic u-gradients at (u0, v0_i); c = mean c_i.

    Each client draws from its own ("cv_init", i) stream, consuming one
    stoch_grad draw per averaged gradient.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    c_list = []
    for i in range(oracle.n):
        g = stream(seed, "cv_init", i)
        acc = np.zeros(oracle.d_u)
        for _ in range(K):
            g_u, _ = oracle.stoch_grad(i, u0, v0_all[i], g)
            acc = acc + g_u
        c_list.append(acc / K)
    c = np.stack(c_list).mean(axis=0)
    return c_list, c


def update_client_control(c_i, c, u_t, u_i_next, K: int, gamma_u: float):
    """c_i^{t+1} = c_i - c + (u^t - u_i^{t+1}) / (K gamma_u)."""
    if gamma_u <= 0:
        raise ValueError("gamma_u must be > 0")
    if K < 1:
        raise ValueError("K must be >= 1")
    return c_i - c + (1.0 / (K * gamma_u)) * (u_t - u_i_next)


def update_server_control(c, deltas, n: int):
    """c^{t+1} = c + (1/n) sum over sampled clients of (c_i^{t+1} - c_i^t)."""
    deltas = np.asarray(deltas)
    return c + deltas.sum(axis=0) / n


def run_round(algorithm: str, server: ServerState, clients: list[ClientState],
              oracle, hp: HyperParams, seed: int, t: int) -> RoundTrace:
    """One outer round, mutating server and sampled clients in place.

    Metrics are computed on the post-round state over all n clients.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    corrected = algorithm == SCAFFOLD_P
    t0 = time.perf_counter()
    n = oracle.n
    ids = sample_clients(n, hp.m, stream(seed, "sample", t))

    returned_u = np.empty((hp.m, oracle.d_u))
    deltas = np.empty((hp.m, oracle.d_u)) if corrected else None
    for pos, i in enumerate(ids):
        i = int(i)
        g = stream(seed, "local", t, i)
        cl = clients[i]
        if corrected:
            u_K, v_K = local_steps_scaffoldp(
                server.u, cl.v, cl.c_i, server.c, oracle, i, hp, g
            )
            c_i_next = update_client_control(
                cl.c_i, server.c, server.u, u_K, hp.K, hp.gamma_u
            )
            deltas[pos] = c_i_next - cl.c_i
            cl.c_i = c_i_next
        else:
            u_K, v_K = local_steps_fedavgp(server.u, cl.v, oracle, i, hp, g)
        returned_u[pos] = u_K
        cl.v = merge_personal(cl.v, v_K, hp.eta_v)

    server.u = aggregate_shared(server.u, returned_u, hp.eta_u, hp.m)
    if corrected:
        server.c = update_server_control(server.c, deltas, n)
    server.round = t + 1

    v_all = [c.v for c in clients]
    f = metrics.function_value(oracle, server.u, v_all)
    g_u = metrics.grad_norm_shared(oracle, server.u, v_all)
    g_v, g_v_hat = metrics.grad_norm_personal(oracle, server.u, v_all, hp.m, n)
    if not (math.isfinite(f) and np.isfinite(server.u).all()):
        raise FloatingPointError(f"non-finite state after round {t}; step sizes too large?")
    wall_ms = (time.perf_counter() - t0) * 1e3
    return RoundTrace(
        t=t, f_value=f, grad_norm_u=g_u, grad_norm_v=g_v, grad_norm_v_hat=g_v_hat,
        sampled=tuple(int(i) + 1 for i in ids), wall_ms=wall_ms,
    )


def init_states(algorithm: str, oracle, hp: HyperParams, seed: int,
                u0=None, v0_all=None, shards=None):
    """Fresh (server, clients) at the standard all-zeros initial point."""
    u0 = np.zeros(oracle.d_u) if u0 is None else np.asarray(u0, dtype=np.float64).copy()
    if v0_all is None:
        v0_all = [np.zeros(oracle.d_v) for _ in range(oracle.n)]
    else:
        v0_all = [np.asarray(v, dtype=np.float64).copy() for v in v0_all]
    shards = shards if shards is not None else getattr(oracle, "shards", None)
    clients = [
        ClientState(v=v0_all[i], shard=shards[i] if shards else None)
        for i in range(oracle.n)
    ]
    server = ServerState(u=u0)
    if algorithm == SCAFFOLD_P:
        c_list, c = init_control_variates(u0, v0_all, oracle, hp.K, seed)
        for cl, c_i in zip(clients, c_list):
            cl.c_i = c_i
        server.c = c
    return server, clients


def run_training(algorithm: str, oracle, hp: HyperParams, seed: int,
                 u0=None, v0_all=None) -> TrainingResult:
    """T rounds from the given (default all-zeros) start; deterministic in seed."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if hp.m > oracle.n:
        raise ValueError(f"m={hp.m} exceeds n={oracle.n}")
    server, clients = init_states(algorithm, oracle, hp, seed, u0, v0_all)
    traces = [
        run_round(algorithm, server, clients, oracle, hp, seed, t)
        for t in range(hp.T)
    ]
    return TrainingResult(traces=traces, server=server, clients=clients)


VARIANTS = ("fedavgp_partial", "fedavgp_full", "scaffoldp")


def recommended_step_sizes(variant: str, L: float, K: int, T: int, F0: float,
                           sigma_u: float, sigma_v: float, b: float,
                           m: int, n: int):
    """Theory-prescribed effective step gamma and outer-step lower bounds.

    Returns (gamma, eta_u_min, eta_v_min) with gamma = gamma_u*eta_u =
    gamma_v*eta_v. Variants:

    - fedavgp_partial: gamma = 1 / (32LK + sqrt((3LKT/F0) * (4(n-m)K b^2/(mn)
      + sigma_u^2/m + m sigma_v^2/n))); eta_u >= max(sqrt(m),
      sqrt(b^2 T/(L F0))), eta_v >= sqrt(n/m).
    - fedavgp_full (requires m == n): gamma = 1 / (84LK + sqrt((11LKT/F0) *
      (sigma_u^2/n + sigma_v^2))); eta_u >= max(T, sqrt(n)), eta_v >= 1.
      (The theory's eta_u bound also carries a term in the initial client
      spread; with all clients starting at u^0 it is dominated by these, so
      the returned bound assumes that standard initialization.)
    - scaffoldp: gamma = 1 / (72LK max(n^(2/3)/m, 1) + sqrt((37LKT/F0) *
      (sigma_u^2/m + m sigma_v^2/n))); eta_u >= sqrt(m), eta_v >= sqrt(n/m).
    """
    if L <= 0 or K < 1 or T < 1 or F0 <= 0:
        raise ValueError("L, K, T, F0 must be positive")
    if sigma_u < 0 or sigma_v < 0 or b < 0:
        raise ValueError("sigma_u, sigma_v, b must be >= 0")
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if variant == "fedavgp_partial":
        rad = (3.0 * L * K * T / F0) * (
            4.0 * (n - m) * K * b * b / (m * n)
            + sigma_u * sigma_u / m
            + m * sigma_v * sigma_v / n
        )
        gamma = 1.0 / (32.0 * L * K + math.sqrt(rad))
        eta_u = max(math.sqrt(m), math.sqrt(b * b * T / (L * F0)))
        eta_v = math.sqrt(n / m)
    elif variant == "fedavgp_full":
        if m != n:
            raise ValueError("fedavgp_full requires m == n")
        rad = (11.0 * L * K * T / F0) * (sigma_u * sigma_u / n + sigma_v * sigma_v)
        gamma = 1.0 / (84.0 * L * K + math.sqrt(rad))
        eta_u = max(float(T), math.sqrt(n))
        eta_v = 1.0
    elif variant == "scaffoldp":
        fac = max(float(np.cbrt(float(n))) ** 2 / m, 1.0)
        rad = (37.0 * L * K * T / F0) * (
            sigma_u * sigma_u / m + m * sigma_v * sigma_v / n
        )
        gamma = 1.0 / (72.0 * L * K * fac + math.sqrt(rad))
        eta_u = math.sqrt(m)
        eta_v = math.sqrt(n / m)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return gamma, eta_u, eta_v
