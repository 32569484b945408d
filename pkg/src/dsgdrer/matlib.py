"""Small dense linear-algebra kernel.

Matrices are plain 2-D ``float64`` numpy arrays. The routines here are meant
for the modest sizes used in the simulations (d and m up to a few dozen), so
clarity wins over speed.
"""
from __future__ import annotations

import numpy as np

from .exceptions import ConvergenceError, NotPositiveDefiniteError, UnstableSystemError

POWER_RTOL = 1e-10
POWER_MAX_ITER = 10_000
JACOBI_MAX_SWEEPS = 100
LYAPUNOV_RTOL = 1e-14
LYAPUNOV_MAX_ITER = 200


def as_matrix(m, name="matrix") -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def _power_start(n: int) -> np.ndarray:
    # all-ones plus a fixed, non-symmetric perturbation
    v = np.ones(n) + 0.1 * np.sin(np.arange(1, n + 1) * 1.7)
    return v / np.linalg.norm(v)


def spectral_norm(m, rtol: float = POWER_RTOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Largest singular value by power iteration on ``m.T @ m``.

    Stops when the Rayleigh quotient changes by less than ``rtol`` relative.
    Raises :class:`ConvergenceError` (carrying the last relative gap) if the
    cap is hit.
    """
    a = as_matrix(m)
    if not a.any():
        return 0.0
    gram = a.T @ a
    v = _power_start(gram.shape[0])
    w = gram @ v
    lam = float(v @ w)
    gap = np.inf
    for _ in range(max_iter):
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        w = gram @ v
        new = float(v @ w)
        gap = abs(new - lam) / new if new > 0 else 0.0
        lam = new
        if gap <= rtol:
            return float(np.sqrt(lam))
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations", gap=gap)


def singular_values(m, max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """All singular values, sorted descending.

    One-sided (Hestenes) cyclic Jacobi: each rotation diagonalises a 2x2
    block of ``m.T @ m`` without forming it, so tiny singular values keep
    absolute accuracy near machine epsilon.
    """
    u = as_matrix(m).copy()
    n = u.shape[1]
    eps = np.finfo(np.float64).eps
    tol = eps * max(u.shape)
    # columns whose norms fall to rounding level of the whole matrix are treated as zero
    floor = (eps * np.linalg.norm(u)) ** 2
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                up, uq = u[:, p], u[:, q]
                alpha = up @ up
                beta = uq @ uq
                gamma = up @ uq
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta) or min(alpha, beta) <= floor:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                if not np.isfinite(zeta):
                    continue
                rotated = True
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                new_p = c * up - s * uq
                new_q = s * up + c * uq
                u[:, p] = new_p
                u[:, q] = new_q
        if not rotated:
            return np.sort(np.linalg.norm(u, axis=0))[::-1][: min(u.shape)]
    raise ConvergenceError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")


def min_eigenvalue_symmetric(m) -> float:
    """Smallest eigenvalue of a symmetric matrix (symmetrised first).

    Shifts to a PSD matrix and reads the eigenvalues off the Jacobi singular
    values, which then coincide with the shifted eigenvalues.
    """
    a = as_matrix(m)
    a = 0.5 * (a + a.T)
    shift = np.abs(a).sum(axis=1).max()  # Gershgorin bound on |eigenvalues|
    sv = singular_values(a + shift * np.eye(a.shape[0]))
    return float(sv[-1] - shift)


def cholesky(m) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"cholesky needs a square matrix, got {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("not positive definite") from exc


def solve_lyapunov(a, sigma) -> np.ndarray:
    """Stationary covariance G = sum_t A^t Sigma (A^t)^T, i.e. G = A G A^T + Sigma.

    Doubling iteration: G <- G + M G M^T, M <- M^2, starting from G = Sigma,
    M = A, which adds 2^k new series terms per step.
    """
    a = as_matrix(a, "a")
    sigma = as_matrix(sigma, "sigma")
    if a.shape[0] != a.shape[1] or sigma.shape != a.shape:
        raise ValueError(f"shape mismatch: a {a.shape}, sigma {sigma.shape}")
    # the power iteration approaches ||A|| from below, so leave room for its tolerance
    if spectral_norm(a) >= 1.0 - 10 * POWER_RTOL:
        raise UnstableSystemError("unstable system: ||A|| >= 1")
    g = sigma.copy()
    mk = a.copy()
    for _ in range(LYAPUNOV_MAX_ITER):
        update = mk @ g @ mk.T
        g = g + update
        mk = mk @ mk
        if np.linalg.norm(update) <= LYAPUNOV_RTOL * np.linalg.norm(g):
            return 0.5 * (g + g.T)
    raise ConvergenceError("Lyapunov doubling did not converge")
