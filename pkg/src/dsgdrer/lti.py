"""Linear time-invariant systems, trajectories and the coupled process."""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .exceptions import NotPositiveDefiniteError, UnstableSystemError
from .matlib import POWER_RTOL, as_matrix, cholesky, solve_lyapunov, spectral_norm

NOISE_KINDS = ("gaussian", "bounded")
TRAJ_MAGIC = b"LTITRAJ1"


class RngStream:
    """Counter-based random stream keyed by ``(seed, agent, purpose)``.

    Backed by numpy's Philox generator; the key is a hash of the triple, so
    distinct triples give independent streams and a repeated triple replays
    exactly.
    """

    def __init__(self, seed: int, agent: int = 0, purpose: str = "noise"):
        self.seed = int(seed)
        self.agent = int(agent)
        self.purpose = str(purpose)
        digest = hashlib.sha256(f"{self.seed}:{self.agent}:{self.purpose}".encode()).digest()
        key = np.frombuffer(digest[:16], dtype="<u8").copy()
        self._bitgen = np.random.Philox(key=key)
        self.generator = np.random.Generator(self._bitgen)

    @property
    def counter(self) -> int:
        words = self._bitgen.state["state"]["counter"]
        return int(words[0]) | (int(words[1]) << 64)

    def normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)

    def rademacher(self, size) -> np.ndarray:
        return self.generator.integers(0, 2, size=size).astype(np.float64) * 2.0 - 1.0

    def __repr__(self):
        return f"RngStream(seed={self.seed}, agent={self.agent}, purpose={self.purpose!r})"


@dataclass(frozen=True, eq=False)
class LtiSystem:
    a: np.ndarray
    sigma: np.ndarray
    g: np.ndarray
    sigma_chol: np.ndarray
    g_chol: np.ndarray

    @property
    def d(self) -> int:
        return self.a.shape[0]

    @classmethod
    def from_matrices(cls, a, sigma, allow_singular_noise: bool = False) -> "LtiSystem":
        """Validate ``a`` and ``sigma`` and derive the stationary covariance.

        ``allow_singular_noise`` skips the positive-definiteness requirement
        on sigma (test rigs with zero noise); factors then come from an
        eigendecomposition instead of Cholesky.
        """
        a = as_matrix(a, "a")
        sigma = as_matrix(sigma, "sigma")
        d = a.shape[0]
        if a.shape != (d, d) or sigma.shape != (d, d):
            raise ValueError(f"a and sigma must both be {d}x{d}")
        if spectral_norm(a) >= 1.0 - 10 * POWER_RTOL:
            raise UnstableSystemError("unstable system: ||A|| >= 1")
        if allow_singular_noise:
            sigma_chol = _psd_factor(sigma)
            g = solve_lyapunov(a, sigma)
            g_chol = _psd_factor(g)
        else:
            sigma_chol = cholesky(sigma)
            g = solve_lyapunov(a, sigma)
            g_chol = cholesky(g)
        return cls(a=a, sigma=sigma, g=g, sigma_chol=sigma_chol, g_chol=g_chol)


def _psd_factor(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    if w.min() < -1e-12 * max(1.0, abs(w).max()):
        raise NotPositiveDefiniteError("not positive semi-definite")
    return v * np.sqrt(np.clip(w, 0.0, None))


def two_level_spectrum(d: int, high: float = 0.9, low: float = 0.3) -> list:
    """``ceil(d/2)`` copies of ``high`` followed by ``floor(d/2)`` of ``low``."""
    n_high = math.ceil(d / 2)
    return [high] * n_high + [low] * (d - n_high)


def random_orthogonal(d: int, rng: RngStream) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal((d, d)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def make_system(d: int, eigenvalues: Sequence[float], sigma=None, seed: int = 0) -> LtiSystem:
    """A = U diag(eigenvalues) U^T with U a seeded random orthogonal matrix."""
    eig = np.asarray(eigenvalues, dtype=np.float64)
    if eig.shape != (d,):
        raise ValueError(f"need {d} eigenvalues, got {eig.size}")
    if np.any(np.abs(eig) >= 1.0):
        raise UnstableSystemError("unstable levels: eigenvalue magnitude >= 1")
    sigma = np.eye(d) if sigma is None else as_matrix(sigma, "sigma")
    u = random_orthogonal(d, RngStream(seed, -1, "system"))
    a = (u * eig) @ u.T
    a = 0.5 * (a + a.T)
    return LtiSystem.from_matrices(a, sigma)


@dataclass(frozen=True, eq=False)
class Trajectory:
    agent: int
    states: np.ndarray  # (T+1, d)
    noises: Optional[np.ndarray] = None  # (T, d)

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1


def draw_noise(system: LtiSystem, n: int, rng: RngStream, kind: str = "gaussian") -> np.ndarray:
    if kind == "gaussian":
        z = rng.normal((n, system.d))
    elif kind == "bounded":
        z = rng.rademacher((n, system.d))
    else:
        raise ValueError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")
    return _kernels.apply_factor(system.sigma_chol, z)


def simulate(system: LtiSystem, agent: int, horizon: int, x0, rng: RngStream,
             noise: str = "gaussian") -> Trajectory:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (system.d,):
        raise ValueError(f"x0 must have shape ({system.d},)")
    noises = draw_noise(system, horizon, rng, noise)
    states = _kernels.propagate(system.a, noises, x0)
    return Trajectory(agent=agent, states=states, noises=noises)


def sample_stationary(system: LtiSystem, rng: RngStream, size: Optional[int] = None) -> np.ndarray:
    """Draw from N(0, G); one d-vector, or ``size`` rows of them."""
    n = 1 if size is None else size
    out = _kernels.apply_factor(system.g_chol, rng.normal((n, system.d)))
    return out[0] if size is None else out


def initial_state(system: LtiSystem, mode: str, rng: Optional[RngStream] = None) -> np.ndarray:
    if mode == "zero":
        return np.zeros(system.d)
    if mode == "stationary":
        return sample_stationary(system, rng)
    raise ValueError(f"unknown x0 mode {mode!r}; expected 'zero' or 'stationary'")


@dataclass(frozen=True, eq=False)
class CoupledTrajectory:
    agent: int
    buffers: np.ndarray  # (N, S, d); buffers[t, i] is the coupled state at block offset i


def make_coupled(system: LtiSystem, traj: Trajectory, layout, rng: RngStream) -> CoupledTrajectory:
    """Restart every buffer from a fresh stationary draw, driven by the real noise.

    Buffer t covers actual states x[S*t + i], i = 0..S-1, so coupled step i
    reuses noise w[S*t + i].
    """
    if traj.noises is None:
        raise ValueError("trajectory carries no noise realisations")
    s, n = layout.S, layout.N
    if traj.horizon < n * s:
        raise ValueError(f"trajectory horizon {traj.horizon} shorter than layout span {n * s}")
    out = np.empty((n, s, system.d))
    for t in range(n):
        start = sample_stationary(system, rng)
        out[t] = _kernels.propagate(system.a, traj.noises[s * t: s * t + s - 1], start)
    return CoupledTrajectory(agent=traj.agent, buffers=out)


def save_trajectory(path, traj: Trajectory) -> None:
    """Flat binary: magic, then d, T, agent as little-endian int64, then states."""
    horizon, d = traj.horizon, traj.states.shape[1]
    with open(path, "wb") as fh:
        fh.write(TRAJ_MAGIC)
        fh.write(struct.pack("<qqq", d, horizon, traj.agent))
        fh.write(np.ascontiguousarray(traj.states, dtype="<f8").tobytes())


def load_trajectory(path) -> Trajectory:
    raw = Path(path).read_bytes()
    if raw[:8] != TRAJ_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}")
    d, horizon, agent = struct.unpack("<qqq", raw[8:32])
    body = raw[32:]
    expected = (horizon + 1) * d * 8
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, found {len(body)}")
    states = np.frombuffer(body, dtype="<f8").reshape(horizon + 1, d).astype(np.float64)
    return Trajectory(agent=agent, states=states)
