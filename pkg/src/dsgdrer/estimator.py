"""Online estimators of the transition matrix.

DSGD-RER runs buffered reverse-order SGD at every agent with a gossip step
after each inner update; the baselines are the single-agent SGD-RER, forward
(vanilla) distributed SGD and offline least squares.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve

from . import _kernels
from .diagnostics import error_metric
from .exceptions import DivergenceError
from .lti import LtiSystem, RngStream, Trajectory, initial_state, simulate
from .matlib import cholesky, singular_values
from .network import Topology, gossip_mix
from .trace import ErrorTrace

RECORD_MODES = ("per_buffer", "final")
PAIR_ORDERS = ("causal", "literal")
ENGINES = ("compiled", "reference")
OLS_MAX_COND = 1e12


@dataclass(frozen=True)
class BufferLayout:
    T: int
    B: int
    u: int

    @property
    def S(self) -> int:
        return self.B + self.u

    @property
    def N(self) -> int:
        return self.T // self.S

    def block(self, t: int) -> slice:
        return slice(self.S * t, self.S * (t + 1))


def plan_buffers(T: int, B: int, u: int) -> BufferLayout:
    if B < 1 or u < 0:
        raise ValueError(f"need B >= 1 and u >= 0, got B={B}, u={u}")
    if B + u < 2:
        raise ValueError("buffer block B + u must be at least 2")
    if T < B + u:
        raise ValueError(f"horizon too short: T={T} < B + u = {B + u}")
    return BufferLayout(T=int(T), B=int(B), u=int(u))


def recipe_buffer_params(T: int, b_multiplier: int = 10) -> tuple:
    """Gap ``u = floor(sqrt(T / ln T))`` and buffer size ``B = b_multiplier * u``."""
    u = int(math.floor(math.sqrt(T / math.log(T))))
    return b_multiplier * u, u


def radius_window(T: int) -> int:
    return int(math.floor(2.0 * math.log(T)))


def estimate_radius(traj, T: int) -> float:
    """Sum of the norms of the first ``floor(2 ln T)`` states."""
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    if states.ndim == 1:
        states = states[:, None]
    n = radius_window(T)
    if states.shape[0] < n:
        raise ValueError(f"trajectory has {states.shape[0]} states, radius window needs {n}")
    return float(np.linalg.norm(states[:n], axis=1).sum())


@dataclass(frozen=True)
class StepSizePolicy:
    """``global`` uses one ``gamma`` everywhere; ``per_agent`` sets 1 / (2 R_k).

    With ``per_agent`` and no ``radii`` the radii are estimated from the
    agents' own trajectories when the run starts.
    """

    mode: str = "per_agent"
    gamma: Optional[float] = None
    radii: Optional[tuple] = None

    def __post_init__(self):
        if self.mode not in ("global", "per_agent"):
            raise ValueError(f"unknown step-size mode {self.mode!r}")
        if self.mode == "global" and (self.gamma is None or self.gamma < 0):
            raise ValueError("global step size needs gamma >= 0")

    def gammas(self, states: np.ndarray, T: int) -> np.ndarray:
        m = states.shape[0]
        if self.mode == "global":
            return np.full(m, float(self.gamma))
        radii = self.radii
        if radii is None:
            radii = [estimate_radius(states[k], T) for k in range(m)]
        radii = np.asarray(radii, dtype=np.float64)
        if radii.shape != (m,):
            raise ValueError(f"expected {m} radii, got {radii.size}")
        if np.any(radii <= 0):
            raise ValueError("estimated radius is zero; cannot set gamma = 1/(2R)")
        return 1.0 / (2.0 * radii)


def reverse_sgd_step(estimate, feature, target, gamma):
    """``estimate - 2 gamma (estimate @ feature - target) feature^T``.

    Broadcasts over a leading agent axis (estimate (m, d, d), feature and
    target (m, d), gamma (m,)). The matrix-vector product is accumulated
    column by column so the arithmetic matches the compiled kernels bit for bit.
    """
    est = np.asarray(estimate, dtype=np.float64)
    f = np.asarray(feature, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    two_g = 2.0 * np.asarray(gamma, dtype=np.float64)
    if two_g.ndim:
        two_g = two_g[..., None, None]
    d = est.shape[-1]
    r = est[..., :, 0] * f[..., None, 0]
    for b in range(1, d):
        r = r + est[..., :, b] * f[..., None, b]
    return est - two_g * ((r - y)[..., :, None] * f[..., None, :])


@dataclass
class AgentEstimates:
    current: np.ndarray
    tail_sum: np.ndarray
    buffers_done: int = 0
    burn_in: int = 0

    @classmethod
    def zeros(cls, m: int, d: int, burn_in: int = 0) -> "AgentEstimates":
        return cls(np.zeros((m, d, d)), np.zeros((m, d, d)), 0, burn_in)

    def close_buffer(self) -> None:
        if self.buffers_done >= self.burn_in:
            self.tail_sum += self.current
        self.buffers_done += 1

    @property
    def averaged_count(self) -> int:
        return max(self.buffers_done - self.burn_in, 0)

    @property
    def tail_average(self) -> np.ndarray:
        n = self.averaged_count
        if n == 0:
            return self.current.copy()
        return self.tail_sum / n


class RerRun(NamedTuple):
    trace: ErrorTrace
    estimates: AgentEstimates
    end_iterates: Optional[np.ndarray]  # (N, m, d, d) when kept


def _require_gap(layout: BufferLayout) -> None:
    # B reverse steps read B + 1 consecutive states of the block
    if layout.u < 1:
        raise ValueError("reverse replay needs u >= 1 so each block holds B + 1 states")


def _check_finite(est: np.ndarray, buffer: int, step: int) -> None:
    if not np.all(np.abs(est) <= _kernels.DIVERGENCE_LIMIT):
        raise DivergenceError(f"divergence at buffer {buffer}, step {step}", buffer=buffer, step=step)


def _reference_buffer(est, block, gammas, top: Topology, n_steps: int, causal: bool, buffer: int):
    s_len = block.shape[1]
    for i in range(n_steps):
        fi, ti = (s_len - 2 - i, s_len - 1 - i) if causal else (s_len - 1 - i, s_len - 2 - i)
        local = reverse_sgd_step(est, block[:, fi], block[:, ti], gammas)
        est = np.stack(gossip_mix(top, list(local)))
        _check_finite(est, buffer, i)
    return est


def dsgd_rer(states, topology: Topology, layout: BufferLayout, gammas, truth=None, *,
             record: str = "per_buffer", burn_in: int = 0, engine: str = "compiled",
             pair_order: str = "causal", keep_iterates: bool = False,
             algo: str = "dsgd_rer", seed: int = 0) -> RerRun:
    """Run DSGD-RER on pre-generated agent data ``states`` of shape (m, T+1, d).

    Within buffer t (block offsets 0..S-1) step i regresses x[S-1-i] on
    x[S-2-i], walking backwards from the end of the block; the first u-1
    block states are never touched. After every step each agent mixes its
    neighbours' estimates. The end-of-buffer iterates are tail-averaged.
    """
    states = np.asarray(states, dtype=np.float64)
    m, n_states, d = states.shape
    if m != topology.m:
        raise ValueError(f"{m} agent trajectories for a {topology.m}-agent topology")
    if n_states - 1 < layout.N * layout.S:
        raise ValueError("trajectories shorter than the buffer layout")
    if record not in RECORD_MODES:
        raise ValueError(f"record must be one of {RECORD_MODES}")
    _require_gap(layout)
    if pair_order not in PAIR_ORDERS:
        raise ValueError(f"pair_order must be one of {PAIR_ORDERS}")
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}")
    if not 0 <= burn_in < layout.N:
        raise ValueError(f"burn_in must lie in [0, {layout.N})")
    gammas = np.ascontiguousarray(gammas, dtype=np.float64)
    causal = pair_order == "causal"
    ptr, idx, wts = topology.csc

    state = AgentEstimates.zeros(m, d, burn_in)
    iterates = np.empty((layout.N, m, d, d)) if keep_iterates else None
    rows_b, rows_s, rows_e = [], [], []
    for t in range(layout.N):
        block = np.ascontiguousarray(states[:, layout.block(t)])
        if engine == "compiled":
            bad = _kernels.rer_buffer_pass(state.current, block, gammas, ptr, idx, wts, layout.B, causal)
            if bad >= 0:
                raise DivergenceError(f"divergence at buffer {t}, step {bad}", buffer=t, step=int(bad))
        else:
            state.current = _reference_buffer(state.current, block, gammas, topology, layout.B, causal, t)
        state.close_buffer()
        if keep_iterates:
            iterates[t] = state.current
        if truth is not None and (record == "per_buffer" or t == layout.N - 1):
            avg = state.tail_average
            rows_b.append(t)
            rows_s.append((t + 1) * layout.S)
            rows_e.append([error_metric(avg[k], truth) for k in range(m)])
    trace = ErrorTrace(algo=algo, seed=seed, buffers=np.asarray(rows_b, dtype=np.int64),
                       samples=np.asarray(rows_s, dtype=np.int64),
                       errors=np.asarray(rows_e, dtype=np.float64).reshape(len(rows_b), m),
                       meta={"estimates": state.tail_average})
    return RerRun(trace, state, iterates)


def sgd_rer(states, layout: BufferLayout, gamma: float, truth=None, *, record: str = "per_buffer",
            seed: int = 0) -> ErrorTrace:
    """Single-agent SGD-RER on one trajectory ``states`` of shape (T+1, d).

    Written directly in time indices: buffer t starts at S*t and its
    updates use features at times S*t+S-2 down to S*t+u-1.
    """
    _require_gap(layout)
    x = np.asarray(states, dtype=np.float64)
    d = x.shape[1]
    est = np.zeros((d, d))
    tail = np.zeros((d, d))
    rows_b, rows_s, rows_e = [], [], []
    for t in range(layout.N):
        start = layout.S * t
        for s in range(start + layout.S - 2, start + layout.u - 2, -1):
            est = reverse_sgd_step(est, x[s], x[s + 1], gamma)
        _check_finite(est, t, layout.B - 1)
        tail += est
        if truth is not None and (record == "per_buffer" or t == layout.N - 1):
            rows_b.append(t)
            rows_s.append((t + 1) * layout.S)
            rows_e.append([error_metric(tail / (t + 1), truth)])
    return ErrorTrace(algo="sgd_rer", seed=seed, buffers=np.asarray(rows_b, dtype=np.int64),
                      samples=np.asarray(rows_s, dtype=np.int64),
                      errors=np.asarray(rows_e, dtype=np.float64).reshape(len(rows_b), 1),
                      meta={"estimates": tail / layout.N})


def simulate_agents(system: LtiSystem, m: int, horizon: int, seed: int, noise: str = "gaussian",
                    x0: str = "zero") -> np.ndarray:
    """States of m agents, shape (m, horizon+1, d); agent k uses streams keyed (seed, k)."""
    out = np.empty((m, horizon + 1, system.d))
    for k in range(m):
        out[k] = agent_trajectory(system, k, horizon, seed, noise, x0).states
    return out


def agent_trajectory(system: LtiSystem, agent: int, horizon: int, seed: int, noise: str = "gaussian",
                     x0: str = "zero") -> Trajectory:
    start = initial_state(system, x0, RngStream(seed, agent, "x0"))
    return simulate(system, agent, horizon, start, RngStream(seed, agent, "noise"), noise)


def run_dsgd_rer(system: LtiSystem, topology: Topology, layout: BufferLayout, policy: StepSizePolicy,
                 seed: int, record: str = "per_buffer", *, noise: str = "gaussian", x0: str = "zero",
                 burn_in: int = 0, engine: str = "compiled", pair_order: str = "causal",
                 states=None) -> ErrorTrace:
    if states is None:
        states = simulate_agents(system, topology.m, layout.T, seed, noise, x0)
    gammas = policy.gammas(states, layout.T)
    run = dsgd_rer(states, topology, layout, gammas, system.a, record=record, burn_in=burn_in,
                   engine=engine, pair_order=pair_order, seed=seed)
    run.trace.meta["gammas"] = gammas
    return run.trace


def run_sgd_rer(system: LtiSystem, layout: BufferLayout, policy: StepSizePolicy, seed: int,
                record: str = "per_buffer", *, noise: str = "gaussian", x0: str = "zero") -> ErrorTrace:
    """Centralised SGD-RER on agent 0's stream."""
    states = agent_trajectory(system, 0, layout.T, seed, noise, x0).states
    gamma = float(policy.gammas(states[None], layout.T)[0])
    trace = sgd_rer(states, layout, gamma, system.a, record=record, seed=seed)
    trace.meta["gammas"] = np.array([gamma])
    return trace


def run_vanilla_dsgd(system: LtiSystem, topology: Topology, horizon: int, policy: StepSizePolicy,
                     seed: int, record: str = "per_buffer", *, checkpoint: Optional[int] = None,
                     noise: str = "gaussian", x0: str = "zero", states=None) -> ErrorTrace:
    """Forward distributed SGD on the raw streams, gossip after every step.

    The output is the running average of all post-gossip iterates; errors
    are recorded every ``checkpoint`` steps (default horizon // 100).
    """
    if states is None:
        states = simulate_agents(system, topology.m, horizon, seed, noise, x0)
    states = np.ascontiguousarray(states, dtype=np.float64)
    m, _, d = states.shape
    gammas = np.ascontiguousarray(policy.gammas(states, horizon))
    every = checkpoint or max(1, horizon // 100)
    ptr, idx, wts = topology.csc
    est = np.zeros((m, d, d))
    tail = np.zeros((m, d, d))
    rows_b, rows_s, rows_e = [], [], []
    done = 0
    while done < horizon:
        stop = min(done + every, horizon)
        bad = _kernels.forward_pass(est, tail, states, done, stop, gammas, ptr, idx, wts)
        if bad >= 0:
            raise DivergenceError(f"divergence at step {bad}", step=int(bad))
        done = stop
        if record == "per_buffer" or done == horizon:
            avg = tail / done
            rows_b.append(len(rows_b) if record == "per_buffer" else 0)
            rows_s.append(done)
            rows_e.append([error_metric(avg[k], system.a) for k in range(m)])
    return ErrorTrace(algo="vanilla_dsgd", seed=seed, buffers=np.asarray(rows_b, dtype=np.int64),
                      samples=np.asarray(rows_s, dtype=np.int64),
                      errors=np.asarray(rows_e, dtype=np.float64).reshape(len(rows_b), m),
                      meta={"estimates": tail / horizon, "gammas": gammas})


def ols_estimate(data) -> np.ndarray:
    """Least-squares transition matrix from one or several trajectories.

    Accepts a (T+1, d) array, a :class:`Trajectory`, or a sequence / 3-D
    array of them (pooled over agents). Solves the normal equations
    A C = Y with C = sum x_t x_t^T, Y = sum x_{t+1} x_t^T via Cholesky.
    """
    if isinstance(data, (list, tuple)) and data and np.isscalar(data[0]):
        data = np.asarray(data, dtype=np.float64)
    if isinstance(data, Trajectory):
        seqs = [data.states]
    else:
        arr = data if isinstance(data, np.ndarray) else None
        if arr is not None and arr.ndim == 2:
            seqs = [arr]
        elif arr is not None and arr.ndim == 1:
            seqs = [arr[:, None]]
        else:
            seqs = [s.states if isinstance(s, Trajectory) else np.asarray(s, dtype=np.float64) for s in data]
            seqs = [s[:, None] if s.ndim == 1 else s for s in seqs]
    d = seqs[0].shape[1]
    cov = np.zeros((d, d))
    cross = np.zeros((d, d))
    for x in seqs:
        cov += x[:-1].T @ x[:-1]
        cross += x[1:].T @ x[:-1]
    sv = singular_values(cov)
    if sv[-1] <= 0 or sv[0] / sv[-1] >= OLS_MAX_COND:
        raise np.linalg.LinAlgError("singular covariance: sum x_t x_t^T is not invertible")
    chol = cholesky(0.5 * (cov + cov.T))
    return cho_solve((chol, True), cross.T).T


def pooled_ols(system: LtiSystem, m: int, horizon: int, seed: int, noise: str = "gaussian",
               x0: str = "zero", states=None) -> np.ndarray:
    if states is None:
        states = simulate_agents(system, m, horizon, seed, noise, x0)
    return ols_estimate(list(states))
