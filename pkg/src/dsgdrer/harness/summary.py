"""Final-error tables across seeds, one row per (group, algorithm)."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..trace import fmt_float
from .plotting import curve_key


@dataclass(frozen=True)
class SummaryRow:
    group: str
    n_seeds: int
    final_samples: int
    mean: float
    std: float
    ratio: Optional[float]


def summarize(traces, reference: str = None) -> list:
    """Final agent-averaged error per group: mean and std over seeds.

    ``ratio`` divides each mean by the reference group's mean (the first
    group unless ``reference`` names another) and is None with a single group.
    Groups of one algorithm must end at the same sample count, otherwise
    their configs differ in more than the swept variable.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("summarize needs at least one trace")
    order, finals, ends, algo_of = [], {}, {}, {}
    for t in traces:
        key = curve_key(t)
        if key not in finals:
            order.append(key)
            finals[key] = []
            ends[key] = set()
            algo_of[key] = t.algo
        finals[key].append(t.final_error)
        ends[key].add(int(t.samples[-1]))
    for key in order:
        if len(ends[key]) != 1:
            raise ValueError(f"group {key!r} mixes horizons {sorted(ends[key])}")
    by_algo = {}
    for k in order:
        by_algo.setdefault(algo_of[k], set()).add(next(iter(ends[k])))
    for algo, horizons in by_algo.items():
        if len(horizons) != 1:
            raise ValueError(f"{algo} groups end at different sample counts {sorted(horizons)}; configs mismatch")

    ref = reference if reference is not None else order[0]
    if ref not in finals:
        raise ValueError(f"unknown reference group {ref!r}")
    ref_mean = float(np.mean(finals[ref]))
    rows = []
    for key in order:
        vals = np.asarray(finals[key])
        mean = float(vals.mean())
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        ratio = None if len(order) == 1 else mean / ref_mean
        rows.append(SummaryRow(key, int(vals.size), next(iter(ends[key])), mean, std, ratio))
    return rows


def _has_ratio(rows) -> bool:
    return any(r.ratio is not None for r in rows)


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["group", "n_seeds", "samples", "final_mean", "final_std"]
    ratio = _has_ratio(rows)
    w.writerow(head + (["ratio"] if ratio else []))
    for r in rows:
        line = [r.group, r.n_seeds, r.final_samples, fmt_float(r.mean), fmt_float(r.std)]
        w.writerow(line + ([fmt_float(r.ratio)] if ratio else []))
    return buf.getvalue()


def summary_text(rows) -> str:
    ratio = _has_ratio(rows)
    width = max(5, max(len(r.group) for r in rows))
    head = f"{'group':<{width}}  {'seeds':>5}  {'samples':>9}  {'final mean':>11}  {'std':>10}"
    if ratio:
        head += f"  {'ratio':>7}"
    lines = [head, "-" * len(head)]
    for r in rows:
        line = f"{r.group:<{width}}  {r.n_seeds:>5}  {r.final_samples:>9}  {r.mean:>11.4e}  {r.std:>10.3e}"
        if ratio:
            line += f"  {r.ratio:>7.3f}"
        lines.append(line)
    return "\n".join(lines) + "\n"
