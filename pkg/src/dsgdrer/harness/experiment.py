"""Seeded experiment sweeps with CSV and manifest output."""
from __future__ import annotations

import functools
import json
import os
import platform
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .. import estimator as est
from ..diagnostics import error_metric
from ..lti import LtiSystem, make_system
from ..network import make_topology, read_matrix_file
from ..trace import ErrorTrace, fmt_float
from .config import ExperimentConfig, parse_config

OUTPUT_ENV = "DSGDRER_OUTPUT_DIR"


@dataclass(frozen=True)
class Setting:
    m: int
    topology: str

    @property
    def label(self) -> str:
        return f"m{self.m}-{self.topology}"


@dataclass(frozen=True)
class Entry:
    setting: Setting
    algo: str
    seed: int

    @property
    def group(self) -> str:
        return "central" if self.algo == "sgd_rer" else self.setting.label

    @property
    def filename(self) -> str:
        return f"{self.group}__{self.algo}__seed{self.seed}.csv"


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: list
    manifest: dict
    output_dir: Optional[Path]


def settings(config: ExperimentConfig) -> list:
    out = []
    for m in config.m:
        for top in config.topologies:
            s = Setting(m, "identity" if m == 1 else top)
            if s not in out:
                out.append(s)
    return out


def plan_entries(config: ExperimentConfig) -> list:
    entries = []
    names = [a.name for a in config.algorithms]
    if "sgd_rer" in names:
        entries += [Entry(Setting(1, "identity"), "sgd_rer", seed) for seed in config.seeds]
    for s in settings(config):
        for algo in config.algorithms:
            if algo.name == "sgd_rer":
                continue
            if algo.only_topology is not None and algo.only_topology != s.topology:
                continue
            entries += [Entry(s, algo.name, seed) for seed in config.seeds]
    return entries


@functools.lru_cache(maxsize=8)
def _system(config_text: str) -> LtiSystem:
    cfg = parse_config(config_text)
    sigma = cfg.sigma_scale * np.eye(cfg.d)
    return make_system(cfg.d, cfg.eigenvalues(), sigma, cfg.system_seed)


def build_topology(config: ExperimentConfig, setting: Setting):
    matrix = read_matrix_file(config.matrix_file) if setting.topology == "custom" else None
    return make_topology(setting.topology, setting.m, config.degree, config.self_weight, matrix)


def run_entry(config: ExperimentConfig, entry: Entry) -> ErrorTrace:
    system = _system(config.to_ini())
    B, u = config.buffer_params()
    layout = est.plan_buffers(config.horizon, B, u)
    policy = est.StepSizePolicy(config.step_mode, config.gamma)
    seed = entry.seed
    common = dict(noise=config.noise, x0=config.x0)
    if entry.algo == "sgd_rer":
        trace = est.run_sgd_rer(system, layout, policy, seed, config.record, **common)
        beta = 0.0
    else:
        top = build_topology(config, entry.setting)
        beta = top.beta
        if entry.algo == "dsgd_rer":
            trace = est.run_dsgd_rer(system, top, layout, policy, seed, config.record,
                                     burn_in=config.burn_in, pair_order=config.pair_order, **common)
        elif entry.algo == "vanilla_dsgd":
            trace = est.run_vanilla_dsgd(system, top, config.horizon, policy, seed, config.record,
                                         checkpoint=layout.S, **common)
        elif entry.algo == "ols":
            states = est.simulate_agents(system, top.m, config.horizon, seed, **common)
            a_hat = est.ols_estimate(list(states))
            trace = ErrorTrace("ols", seed, np.array([0]), np.array([config.horizon]),
                               np.array([[error_metric(a_hat, system.a)]]), meta={"estimates": a_hat})
        else:
            raise ValueError(f"unknown algorithm {entry.algo!r}")
    trace.meta.update(group=entry.group, m=entry.setting.m, topology=entry.setting.topology,
                      beta=beta, file=entry.filename)
    return trace


def _worker(args):
    config_text, entry = args
    trace = run_entry(parse_config(config_text), entry)
    keep = {k: trace.meta[k] for k in ("group", "m", "topology", "beta", "file")}
    return ErrorTrace(trace.algo, trace.seed, trace.buffers, trace.samples, trace.errors, keep)


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def environment() -> dict:
    import numba
    import scipy

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "platform": platform.platform()}


def run_experiment(config: ExperimentConfig, workers: int = 1, output_dir=None,
                   write: bool = True) -> ExperimentResult:
    """Run every (setting, algorithm, seed) entry of ``config``.

    Entries are independent and own their random streams, so results do not
    depend on ``workers``. With ``write`` each trace lands in its own CSV
    under the output directory next to ``manifest.json``.
    """
    entries = plan_entries(config)
    text = config.to_ini()
    jobs = [(text, e) for e in entries]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_worker, jobs, chunksize=1))
    else:
        traces = [_worker(j) for j in jobs]

    manifest = {
        "name": config.name,
        "config": text,
        "config_hash": config.digest,
        "entries": [
            {"file": e.filename, "group": e.group, "algo": e.algo, "seed": e.seed, "m": e.setting.m,
             "topology": e.setting.topology, "beta": fmt_float(t.meta["beta"]),
             "final_error": fmt_float(t.final_error)}
            for e, t in zip(entries, traces)
        ],
        "environment": environment(),
    }
    out = None
    if write:
        out = Path(output_dir if output_dir is not None else config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for t in traces:
            _write_atomic(out / t.meta["file"], t.to_csv())
        _write_atomic(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return ExperimentResult(config, traces, manifest, out)
