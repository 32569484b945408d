"""Pass/fail rules applied to sweep results."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Verdict:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def final_means(traces, algo: str = "dsgd_rer") -> dict:
    """Seed-averaged final error per setting label, for one algorithm."""
    acc = {}
    for t in traces:
        if t.algo == algo:
            acc.setdefault(t.meta["group"], []).append(t.final_error)
    return {g: float(np.mean(v)) for g, v in acc.items()}


def _by_m(traces, algo="dsgd_rer") -> list:
    means = final_means(traces, algo)
    m_of = {t.meta["group"]: t.meta["m"] for t in traces if t.algo == algo}
    return sorted((m_of[g], v) for g, v in means.items())


def size_scaling(traces, band=(0.3, 0.8)) -> Verdict:
    """Errors strictly decrease in m; the ratio of the two largest m lies in ``band``."""
    pairs = _by_m(traces)
    if len(pairs) < 2:
        return Verdict("size_scaling", False, "need at least two network sizes")
    errs = [v for _, v in pairs]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    (m_a, e_a), (m_b, e_b) = pairs[-2], pairs[-1]
    ratio = e_b / e_a
    ok = decreasing and band[0] <= ratio <= band[1]
    listing = ", ".join(f"m={m}: {v:.4g}" for m, v in pairs)
    return Verdict("size_scaling", ok, f"{listing}; ratio m={m_b}/m={m_a} = {ratio:.3f} (band {band[0]}..{band[1]})")


def topology_ordering(traces, m: int = 5, min_ratio: float = 1.2) -> Verdict:
    """identity >= cyclic >= complete at size m, identity/complete above ``min_ratio``."""
    means = final_means(traces)
    keys = [f"m{m}-identity", f"m{m}-cyclic", f"m{m}-complete"]
    missing = [k for k in keys if k not in means]
    if missing:
        return Verdict("topology_ordering", False, f"missing groups {missing}")
    a, b, c = (means[k] for k in keys)
    ok = a >= b >= c and a / c > min_ratio
    return Verdict("topology_ordering", ok,
                   f"identity {a:.4g} >= cyclic {b:.4g} >= complete {c:.4g}; identity/complete = {a / c:.3f}")


def last_quartile_change(y) -> float:
    """Relative change of an error curve across its last quarter of checkpoints."""
    y = np.asarray(y)
    start = (3 * len(y)) // 4
    return float((y[-1] - y[start]) / y[start])


def bias_separation(traces, m: int = 5, factor: float = 2.0, min_slope: float = -0.10) -> Verdict:
    group = f"m{m}-complete"
    rer = [t for t in traces if t.algo == "dsgd_rer" and t.meta["group"] == group]
    van = [t for t in traces if t.algo == "vanilla_dsgd" and t.meta["group"] == group]
    if not rer or not van:
        return Verdict("bias_separation", False, f"need dsgd_rer and vanilla_dsgd runs on {group}")
    e_rer = float(np.mean([t.final_error for t in rer]))
    e_van = float(np.mean([t.final_error for t in van]))
    slope = last_quartile_change(np.mean([t.agent_mean() for t in van], axis=0))
    ok = e_van >= factor * e_rer and slope >= min_slope
    return Verdict("bias_separation", ok,
                   f"vanilla {e_van:.4g} vs dsgd_rer {e_rer:.4g} (x{e_van / e_rer:.2f}); "
                   f"vanilla last-quartile change {slope:+.3f}")
