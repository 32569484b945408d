"""Communication topologies: doubly stochastic mixing matrices and gossip."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import InvalidTopologyError
from .matlib import as_matrix, singular_values

TOL = 1e-12
KINDS = ("identity", "cyclic", "complete", "custom")


@dataclass(frozen=True, eq=False)
class Topology:
    p: np.ndarray
    beta: float
    neighbors: tuple  # neighbors[k] = sorted j with P[j, k] > 0
    name: str = "custom"
    # compressed column layout of P consumed by the compiled kernels
    _ptr: np.ndarray = field(repr=False, default=None)
    _idx: np.ndarray = field(repr=False, default=None)
    _wts: np.ndarray = field(repr=False, default=None)

    @property
    def m(self) -> int:
        return self.p.shape[0]

    @property
    def csc(self):
        return self._ptr, self._idx, self._wts


def validate_mixing_matrix(p, require_connected: bool = True) -> np.ndarray:
    """Raise :class:`InvalidTopologyError` naming the first failed check.

    ``require_connected=False`` admits disconnected matrices such as the
    no-communication baseline P = I.
    """
    try:
        p = as_matrix(p, "P")
    except ValueError as exc:
        raise InvalidTopologyError("finite", str(exc)) from exc
    m = p.shape[0]
    if p.shape != (m, m):
        raise InvalidTopologyError("square", f"P has shape {p.shape}")
    if np.abs(p - p.T).max() > TOL:
        raise InvalidTopologyError("symmetric", f"max |P - P^T| = {np.abs(p - p.T).max():.3g}")
    if p.min() < 0:
        raise InvalidTopologyError("nonnegative", f"min entry {p.min():.3g}")
    rows = np.abs(p.sum(axis=1) - 1).max()
    cols = np.abs(p.sum(axis=0) - 1).max()
    if rows > TOL or cols > TOL:
        raise InvalidTopologyError("doubly_stochastic", f"row/column sums off by {max(rows, cols):.3g}")
    if np.any(np.diag(p) <= 0):
        raise InvalidTopologyError("positive_diagonal", "P has a non-positive diagonal entry")
    if not require_connected:
        return p
    reach = np.zeros_like(p)
    power = np.eye(m)
    for _ in range(m):
        power = power @ p
        reach += power
    if np.any(reach <= 0):
        raise InvalidTopologyError("connected", "P + P^2 + ... + P^m has a zero entry")
    return p


def from_matrix(p, name: str = "custom", require_connected: bool = True) -> Topology:
    p = validate_mixing_matrix(p, require_connected)
    m = p.shape[0]
    sv = singular_values(p)
    beta = float(sv[1]) if m > 1 else 0.0
    neighbors = tuple(tuple(int(j) for j in np.flatnonzero(p[:, k] > 0)) for k in range(m))
    ptr = np.zeros(m + 1, dtype=np.int64)
    idx, wts = [], []
    for k, nbrs in enumerate(neighbors):
        idx.extend(nbrs)
        wts.extend(p[j, k] for j in nbrs)
        ptr[k + 1] = len(idx)
    return Topology(p=p, beta=min(beta, 1.0), neighbors=neighbors, name=name,
                    _ptr=ptr, _idx=np.asarray(idx, dtype=np.int64), _wts=np.asarray(wts, dtype=np.float64))


def cyclic_matrix(m: int, degree: int = 2, self_weight: float = 0.3) -> np.ndarray:
    """Ring lattice: each agent links to degree/2 neighbours on either side."""
    if m < 3:
        raise ValueError("cyclic topology needs m >= 3")
    if degree < 2 or degree % 2 or degree >= m:
        raise ValueError(f"degree must be even, >= 2 and < m; got {degree}")
    if not 0 < self_weight < 1:
        raise ValueError("self_weight must lie in (0, 1)")
    w = (1.0 - self_weight) / degree
    p = np.zeros((m, m))
    for k in range(m):
        p[k, k] = self_weight
        for h in range(1, degree // 2 + 1):
            p[k, (k + h) % m] += w
            p[k, (k - h) % m] += w
    return p


def make_topology(kind: str, m: int, degree: int = 2, self_weight: float = 0.3, matrix=None) -> Topology:
    if m < 1:
        raise ValueError("m must be >= 1")
    if kind == "identity":
        return from_matrix(np.eye(m), "identity", require_connected=False)
    if kind == "complete":
        return from_matrix(np.full((m, m), 1.0 / m), "complete")
    if kind == "cyclic":
        return from_matrix(cyclic_matrix(m, degree, self_weight), "cyclic")
    if kind == "custom":
        if matrix is None:
            raise ValueError("custom topology needs a matrix")
        top = from_matrix(matrix, "custom")
        if top.m != m:
            raise ValueError(f"custom matrix is {top.m}x{top.m}, expected m={m}")
        return top
    raise ValueError(f"unknown topology kind {kind!r}; expected one of {KINDS}")


def read_matrix_file(path) -> np.ndarray:
    """Plain-text matrix: first line m, then m whitespace-separated rows."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    m = int(lines[0].strip())
    rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
    if len(rows) != m or any(len(r) != m for r in rows):
        raise ValueError(f"{path}: expected {m} rows of {m} values")
    return np.array(rows)


def write_matrix_file(path, p) -> None:
    p = np.asarray(p)
    body = "\n".join(" ".join(repr(float(v)) for v in row) for row in p)
    Path(path).write_text(f"{p.shape[0]}\n{body}\n")


def mixing_bound_check(top: Topology, k_max: int) -> float:
    """Worst ratio of sum_j |[P^k]_ji - 1/m| to sqrt(m) beta^k over 1 <= k <= k_max.

    A numerically zero beta with zero deviation (complete graph) counts as 0.
    """
    m = top.m
    worst = 0.0
    power = np.eye(m)
    for k in range(1, k_max + 1):
        power = power @ top.p
        dev = np.abs(power - 1.0 / m).sum(axis=0).max()
        bound = np.sqrt(m) * top.beta ** k
        if dev <= TOL:
            continue
        if bound <= 0:
            return float("inf")
        worst = max(worst, dev / bound)
    return float(worst)


def gossip_mix(top: Topology, estimates: Sequence[np.ndarray]) -> list:
    """output[k] = sum_j P[j, k] estimates[j], j ascending over neighbours of k."""
    if len(estimates) != top.m:
        raise ValueError(f"expected {top.m} estimates, got {len(estimates)}")
    shape = np.shape(estimates[0])
    if any(np.shape(e) != shape for e in estimates):
        raise ValueError("estimates differ in shape")
    out = []
    for k, nbrs in enumerate(top.neighbors):
        acc = np.zeros(shape)
        for j in nbrs:
            acc = acc + top.p[j, k] * estimates[j]
        out.append(acc)
    return out
