"""Compiled inner loops.

Every reduction runs in a fixed ascending order, so results are bitwise
reproducible and agree with the numpy reference path in ``estimator`` and
``network``. No fastmath: contraction into FMA would break that agreement.
"""
import numpy as np
from numba import njit

DIVERGENCE_LIMIT = 1e12


@njit(cache=True)
def apply_factor(chol, z):
    """Rows of ``z`` mapped through ``chol``: out[t] = chol @ z[t]."""
    n, d = z.shape
    out = np.empty((n, d))
    for t in range(n):
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += chol[i, j] * z[t, j]
            out[t, i] = acc
    return out


@njit(cache=True)
def propagate(a, noises, x0):
    """states[t+1] = a @ states[t] + noises[t]."""
    n, d = noises.shape
    states = np.empty((n + 1, d))
    states[0] = x0
    for t in range(n):
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += a[i, j] * states[t, j]
            states[t + 1, i] = acc + noises[t, i]
    return states


@njit(cache=True)
def _local_step(est, scratch, r, k, feat, targ, two_g):
    d = est.shape[1]
    for a in range(d):
        acc = est[k, a, 0] * feat[0]
        for b in range(1, d):
            acc += est[k, a, b] * feat[b]
        r[a] = acc - targ[a]
    for a in range(d):
        for b in range(d):
            scratch[k, a, b] = est[k, a, b] - two_g * (r[a] * feat[b])


@njit(cache=True)
def _mix(est, scratch, ptr, idx, wts):
    """est[k] = sum over neighbours j (ascending) of P[j, k] * scratch[j].

    Returns False if any mixed entry is non-finite or above the guard.
    """
    m, d, _ = est.shape
    ok = True
    for k in range(m):
        for a in range(d):
            for b in range(d):
                acc = 0.0
                for p in range(ptr[k], ptr[k + 1]):
                    acc += wts[p] * scratch[idx[p], a, b]
                est[k, a, b] = acc
                if not (abs(acc) <= DIVERGENCE_LIMIT):
                    ok = False
    return ok


@njit(cache=True)
def rer_buffer_pass(est, block, gammas, ptr, idx, wts, n_steps, causal):
    """One buffer of reverse-order updates followed by gossip, in place.

    ``block`` is (m, S, d). Step i uses the pair ending at reverse index i:
    feature x[S-2-i], target x[S-1-i] when ``causal``; the swapped pair
    otherwise. Returns the step index at which the guard tripped, or -1.
    """
    m, d, _ = est.shape
    s_len = block.shape[1]
    scratch = np.empty_like(est)
    r = np.empty(d)
    for i in range(n_steps):
        if causal:
            fi = s_len - 2 - i
            ti = s_len - 1 - i
        else:
            fi = s_len - 1 - i
            ti = s_len - 2 - i
        for k in range(m):
            _local_step(est, scratch, r, k, block[k, fi], block[k, ti], 2.0 * gammas[k])
        if not _mix(est, scratch, ptr, idx, wts):
            return i
    return -1


@njit(cache=True)
def forward_pass(est, tail_sum, states, t0, t1, gammas, ptr, idx, wts):
    """Forward-order updates on pairs (x[t], x[t+1]) for t in [t0, t1).

    Gossip after every step; each post-gossip iterate is added to
    ``tail_sum``. Returns the failing time index, or -1.
    """
    m, d, _ = est.shape
    scratch = np.empty_like(est)
    r = np.empty(d)
    for t in range(t0, t1):
        for k in range(m):
            _local_step(est, scratch, r, k, states[k, t], states[k, t + 1], 2.0 * gammas[k])
        if not _mix(est, scratch, ptr, idx, wts):
            return t
        for k in range(m):
            for a in range(d):
                for b in range(d):
                    tail_sum[k, a, b] += est[k, a, b]
    return -1
