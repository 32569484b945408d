"""Property suite behind the ``verify`` subcommand."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .. import estimator as est
from ..diagnostics import coupled_gap, contraction_check, unbiasedness_mc
from ..lti import LtiSystem, RngStream, make_coupled, make_system
from ..matlib import cholesky, singular_values, solve_lyapunov, spectral_norm
from ..network import gossip_mix, make_topology, mixing_bound_check, validate_mixing_matrix

DESK_EIGS = (0.9, 0.9, 0.9, 0.3, 0.3)
TOL = 1e-8


@dataclass
class VerifyItem:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def desk_system(seed: int = 0) -> LtiSystem:
    return make_system(5, DESK_EIGS, np.eye(5), seed)


def check_topologies(m: int = 5, k_max: int = 20) -> VerifyItem:
    worst, names = 0.0, []
    for kind in ("identity", "cyclic", "complete"):
        top = make_topology(kind, m)
        validate_mixing_matrix(top.p, require_connected=kind != "identity")
        ratio = mixing_bound_check(top, k_max)
        worst = max(worst, ratio)
        names.append(f"{kind} beta={top.beta:.4f} ratio={ratio:.3f}")
    return VerifyItem("mixing", worst <= 1.0 + 1e-9, "; ".join(names))


def check_gossip(n_inputs: int = 100, seed: int = 0) -> VerifyItem:
    rng = RngStream(seed, 0, "verify-gossip").generator
    worst = 0.0
    for i in range(n_inputs):
        kind = ("identity", "cyclic", "complete")[i % 3]
        top = make_topology(kind, int(rng.integers(3, 21)))
        est_in = [rng.normal(size=(5, 5)) * 10.0 ** rng.uniform(-2, 2) for _ in range(top.m)]
        before = np.mean(est_in, axis=0)
        after = np.mean(gossip_mix(top, est_in), axis=0)
        worst = max(worst, float(np.abs(after - before).max()))
    return VerifyItem("gossip_average", worst <= 1e-12, f"max drift {worst:.2e} over {n_inputs} inputs")


def check_contraction(replicas: int = 200, seed: int = 0) -> VerifyItem:
    system = desk_system()
    B, u, m = 20, 20, 3
    layout = est.plan_buffers(B + u, B, u)
    R = 4.0 * float(np.trace(system.g))  # bound on squared norms
    gamma = 0.2 / (B * R)
    rep = contraction_check(system, layout, gamma, R, seed, replicas, m=m)
    ok = rep.passed and rep.replicas == replicas
    detail = (f"{rep.replicas} kept, {rep.discarded} discarded, margins lower={rep.checks['lower'].margin:.3e} "
              f"upper={rep.checks['upper'].margin:.3e}")
    return VerifyItem("contraction", ok, detail)


def check_unbiasedness(replicas: int = 10_000, seed: int = 0) -> VerifyItem:
    system = LtiSystem.from_matrices([[0.9]], [[1.0]])
    rep = unbiasedness_mc(system, 50, 0.01, replicas, seed)
    detail = (f"reverse |mean|/se={rep.extra['reverse_z']:.2f}, forward |mean|/se={rep.extra['forward_z']:.2f} "
              f"(forward mean {float(rep.extra['forward_mean'].ravel()[0]):.3e})")
    return VerifyItem("unbiasedness", rep.passed, detail)


def check_coupling(n_buffers: int = 20, seed: int = 0) -> VerifyItem:
    system = desk_system()
    layout = est.plan_buffers(n_buffers * 45, 40, 5)
    traj = est.agent_trajectory(system, 0, layout.T, seed, x0="stationary")
    coupled = make_coupled(system, traj, layout, RngStream(seed, 0, "coupled"))
    gap = coupled_gap(system, traj, coupled, layout)
    return VerifyItem("coupling", gap <= 1.0 + 1e-9, f"worst ratio {gap:.12f} over {layout.N} buffers")


def check_linear_algebra(n_mats: int = 20, seed: int = 0) -> VerifyItem:
    system = desk_system()
    g = solve_lyapunov(system.a, system.sigma)
    resid = np.linalg.norm(g - system.a @ g @ system.a.T - system.sigma) / np.linalg.norm(g)
    ref = np.linalg.norm(g - scipy.linalg.solve_discrete_lyapunov(system.a, system.sigma)) / np.linalg.norm(g)
    l = cholesky(g)
    chol = np.linalg.norm(l @ l.T - g) / np.linalg.norm(g)
    rng = RngStream(seed, 0, "verify-linalg").generator
    sv = 0.0
    for _ in range(n_mats):
        a = rng.normal(size=tuple(rng.integers(1, 8, size=2)))
        top = np.linalg.svd(a, compute_uv=False)
        sv = max(sv, abs(spectral_norm(a) - top[0]) / top[0],
                 float(np.abs(singular_values(a) - top).max() / top[0]))
    worst = max(resid, ref, chol, sv)
    return VerifyItem("linear_algebra", worst <= TOL,
                      f"lyapunov {resid:.1e} (vs scipy {ref:.1e}), cholesky {chol:.1e}, svd {sv:.1e}")


def run_verification(quick: bool = False, seed: int = 0) -> list:
    """Run every property check; ``quick`` shrinks the Monte Carlo sizes."""
    steps = [
        lambda: check_topologies(),
        lambda: check_gossip(20 if quick else 100, seed),
        lambda: check_contraction(50 if quick else 200, seed),
        lambda: check_unbiasedness(1000 if quick else 10_000, seed),
        lambda: check_coupling(20, seed),
        lambda: check_linear_algebra(20, seed),
    ]
    items = []
    for step in steps:
        t0 = time.perf_counter()
        item = step()
        item.seconds = time.perf_counter() - t0
        items.append(item)
    return items
