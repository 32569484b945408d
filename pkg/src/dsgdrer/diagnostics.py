"""Numerical checks of the structural facts behind the error analysis.

* the product of per-step contraction factors is sandwiched between two
  explicit PSD bounds;
* the reverse-order noise term has zero mean while the forward one need not;
* the coupled process approaches the actual one at rate ||A^i||.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .lti import LtiSystem, RngStream, sample_stationary
from .matlib import as_matrix, min_eigenvalue_symmetric, spectral_norm

PSD_TOL = -1e-9


def error_metric(estimate, truth, frobenius: bool = False) -> float:
    """Spectral-norm distance (Frobenius with ``frobenius=True``)."""
    est = np.asarray(estimate, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {tru.shape}")
    diff = est - tru
    if frobenius:
        return float(np.linalg.norm(diff))
    return spectral_norm(diff)


@dataclass
class Check:
    passed: bool
    margin: float
    hard: bool = True  # informational checks never fail a report


@dataclass
class McReport:
    replicas: int
    mean: np.ndarray
    stderr: np.ndarray
    checks: dict = field(default_factory=dict)
    discarded: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values() if c.hard)


def h_factors(vectors, gamma: float) -> np.ndarray:
    """Factors I - (2 gamma / m) sum_k x_k x_k^T, one per step.

    ``vectors`` has shape (m, B, d); factor s uses vectors[:, s].
    """
    x = np.asarray(vectors, dtype=np.float64)
    m, n_steps, d = x.shape
    outer = np.einsum("ksa,ksb->sab", x, x)
    return np.eye(d)[None] - (2.0 * gamma / m) * outer


def h_product(factors, i: int, j: int) -> np.ndarray:
    """factors[i] @ factors[i+1] @ ... @ factors[j]; identity when i > j."""
    d = factors.shape[-1]
    out = np.eye(d)
    for s in range(i, j + 1):
        out = out @ factors[s]
    return out


def contraction_bounds(vectors, gamma: float, B: int, R: float):
    """Lower and upper PSD bounds on H^T H for one buffer of vectors (m, B, d)."""
    x = np.asarray(vectors, dtype=np.float64)
    m = x.shape[0]
    d = x.shape[2]
    total = np.einsum("ksa,ksb->ab", x, x)
    slack = 2.0 * gamma * B * R / (1.0 - 4.0 * gamma * B * R)
    eye = np.eye(d)
    lower = eye - (4.0 * gamma / m) * (1.0 + slack) * total
    upper = eye - (4.0 * gamma / m) * (1.0 - slack) * total
    return lower, upper


def _coupled_buffer_vectors(system: LtiSystem, m: int, S: int, B: int, rng: RngStream) -> np.ndarray:
    """Reverse-indexed states x[S-1-i], i < B, of m stationary-start chains."""
    out = np.empty((m, B, system.d))
    for k in range(m):
        start = sample_stationary(system, rng)
        noise = _kernels.apply_factor(system.sigma_chol, rng.normal((S - 1, system.d)))
        chain = _kernels.propagate(system.a, noise, start)
        out[k] = chain[::-1][:B]
    return out


def contraction_check(system: LtiSystem, layout, gamma: float, R: float, seed: int, replicas: int,
                      m: int = 1, max_attempts: int = None) -> McReport:
    """Check both PSD orderings of H^T H on replicas where every squared norm is at most R.

    Replicas violating the norm event are discarded and counted; drawing stops
    once ``replicas`` have been retained or ``max_attempts`` (default
    20 * replicas) were made.
    """
    B, S = layout.B, layout.S
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if not gamma * B * R < 0.25:
        raise ValueError(f"need gamma*B*R < 1/4, got {gamma * B * R:.4g}")
    max_attempts = max_attempts or 20 * replicas
    worst_lo = worst_hi = np.inf
    kept, discarded = [], 0
    for attempt in range(max_attempts):
        if len(kept) == replicas:
            break
        x = _coupled_buffer_vectors(system, m, S, B, RngStream(seed, attempt, "contraction"))
        if np.max(np.einsum("ksa,ksa->ks", x, x)) > R:
            discarded += 1
            continue
        h = h_product(h_factors(x, gamma), 0, B - 1)
        hth = h.T @ h
        lower, upper = contraction_bounds(x, gamma, B, R)
        worst_lo = min(worst_lo, min_eigenvalue_symmetric(hth - lower))
        worst_hi = min(worst_hi, min_eigenvalue_symmetric(upper - hth))
        kept.append(hth)
    if not kept:
        raise RuntimeError("event D~ never held; raise R")
    stack = np.asarray(kept)
    n = len(kept)
    stderr = stack.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(stack[0])
    return McReport(
        replicas=n, mean=stack.mean(axis=0), stderr=stderr, discarded=discarded,
        checks={"lower": Check(worst_lo >= PSD_TOL, float(worst_lo)),
                "upper": Check(worst_hi >= PSD_TOL, float(worst_hi))},
    )


def noise_terms(states, noises, gamma: float):
    """Noise-coupling terms of forward and reverse-order SGD for a batch of chains.

    ``states`` (n, B+1, d), ``noises`` (n, B, d) with
    states[:, s+1] = A states[:, s] + noises[:, s]. Both run the error
    recursion D <- D (I - 2 gamma x_s x_s^T) + 2 gamma w_s x_s^T from D = 0,
    over s ascending (forward) or descending (reverse).
    """
    x = np.asarray(states)[:, :-1]
    w = np.asarray(noises)
    n, n_steps, d = w.shape

    def run(order):
        acc = np.zeros((n, d, d))
        for s in order:
            xs, ws = x[:, s], w[:, s]
            acc_x = np.einsum("nab,nb->na", acc, xs)
            acc = acc - 2.0 * gamma * acc_x[:, :, None] * xs[:, None, :] + 2.0 * gamma * ws[:, :, None] * xs[:, None, :]
        return acc

    return run(range(n_steps)), run(range(n_steps - 1, -1, -1))


def unbiasedness_mc(system: LtiSystem, B: int, gamma: float, replicas: int, seed: int,
                    n_se: float = 3.0) -> McReport:
    """Monte Carlo means of the forward and reverse noise terms over stationary chains.

    The reverse mean must sit within ``n_se`` standard errors of zero in every
    entry; the forward comparison is reported but not enforced.
    """
    if replicas < 100:
        raise ValueError("unbiasedness_mc needs at least 100 replicas")
    rng = RngStream(seed, 0, "unbiasedness")
    d = system.d
    x0 = sample_stationary(system, rng, size=replicas)
    noises = np.empty((replicas, B, d))
    states = np.empty((replicas, B + 1, d))
    for r in range(replicas):
        noises[r] = _kernels.apply_factor(system.sigma_chol, rng.normal((B, d)))
        states[r] = _kernels.propagate(system.a, noises[r], x0[r])
    fwd, rev = noise_terms(states, noises, gamma)

    def summary(terms):
        mean = terms.mean(axis=0)
        se = terms.std(axis=0, ddof=1) / np.sqrt(replicas)
        z = np.where(se > 0, np.abs(mean) / np.where(se > 0, se, 1.0), np.where(mean == 0, 0.0, np.inf))
        return mean, se, float(z.max())

    rev_mean, rev_se, rev_z = summary(rev)
    fwd_mean, fwd_se, fwd_z = summary(fwd)
    return McReport(
        replicas=replicas, mean=rev_mean, stderr=rev_se,
        checks={"reverse_zero_mean": Check(rev_z <= n_se, n_se - rev_z),
                "forward_zero_mean": Check(fwd_z <= n_se, n_se - fwd_z, hard=False)},
        extra={"forward_mean": fwd_mean, "forward_stderr": fwd_se, "reverse_z": rev_z, "forward_z": fwd_z},
    )


def power_norms(a, n: int) -> np.ndarray:
    """||A^i|| for i = 0..n-1."""
    a = as_matrix(a)
    out = np.empty(n)
    power = np.eye(a.shape[0])
    for i in range(n):
        out[i] = spectral_norm(power)
        power = power @ a
    return out


def coupled_gap(system: LtiSystem, traj, coupled, layout, eps: float = 1e-12) -> float:
    """Worst ratio ||x_i - x~_i|| / (||A^i|| ||x_0 - x~_0|| + eps) over buffers and offsets."""
    S, N = layout.S, layout.N
    actual = traj.states[: N * S].reshape(N, S, -1)
    diffs = np.linalg.norm(actual - coupled.buffers, axis=2)
    bound = power_norms(system.a, S)[None, :] * diffs[:, :1] + eps
    return float((diffs / bound).max())
