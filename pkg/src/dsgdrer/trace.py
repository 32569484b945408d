"""Per-buffer, per-agent error records and their CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_HEADER = ("algo", "seed", "buffer", "samples", "agent", "error")


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(eq=False)
class ErrorTrace:
    """Errors of the running estimate of every agent at recorded checkpoints.

    ``errors[r, k]`` belongs to checkpoint ``buffers[r]`` (after ``samples[r]``
    samples per agent) and agent ``k``.
    """

    algo: str
    seed: int
    buffers: np.ndarray
    samples: np.ndarray
    errors: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_agents(self) -> int:
        return self.errors.shape[1]

    def agent_mean(self) -> np.ndarray:
        return self.errors.mean(axis=1)

    @property
    def final_error(self) -> float:
        """Agent-averaged error at the last checkpoint."""
        return float(self.errors[-1].mean())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r, (b, s) in enumerate(zip(self.buffers, self.samples)):
            for k in range(self.n_agents):
                writer.writerow([self.algo, self.seed, int(b), int(s), k, fmt_float(self.errors[r, k])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, meta=None) -> "ErrorTrace":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != CSV_HEADER:
            raise ValueError(f"bad trace header: {rows[0] if rows else None}")
        body = rows[1:]
        if not body:
            raise ValueError("trace has no rows")
        algos = {r[0] for r in body}
        seeds = {int(r[1]) for r in body}
        if len(algos) != 1 or len(seeds) != 1:
            raise ValueError("a trace file must hold a single algo and seed")
        buffers = sorted({int(r[2]) for r in body})
        agents = sorted({int(r[4]) for r in body})
        pos = {b: i for i, b in enumerate(buffers)}
        errors = np.full((len(buffers), len(agents)), np.nan)
        samples = np.zeros(len(buffers), dtype=np.int64)
        for r in body:
            i = pos[int(r[2])]
            errors[i, int(r[4])] = float(r[5])
            samples[i] = int(r[3])
        if np.isnan(errors).any():
            raise ValueError("trace is missing (buffer, agent) rows")
        return cls(algo=algos.pop(), seed=seeds.pop(), buffers=np.asarray(buffers, dtype=np.int64),
                   samples=samples, errors=errors, meta=dict(meta or {}))

    @classmethod
    def read(cls, path) -> "ErrorTrace":
        path = Path(path)
        return cls.from_csv(path.read_text(), meta={"path": str(path), "group": group_from_filename(path)})


def group_from_filename(path) -> str:
    """Trace files are named ``<group>__<algo>__seed<N>.csv``."""
    stem = Path(path).stem
    parts = stem.split("__")
    return parts[0] if len(parts) >= 3 else stem
