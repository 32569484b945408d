"""Experiment configuration: a sectioned key-value text file (INI syntax)."""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from ..exceptions import ConfigError
from ..network import KINDS as TOPOLOGY_KINDS

ALGORITHMS = ("dsgd_rer", "sgd_rer", "vanilla_dsgd", "ols")


def _list(raw: str, conv=str) -> list:
    items = [s.strip() for s in raw.replace("\n", ",").split(",")]
    try:
        return [conv(s) for s in items if s]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {raw!r}: {exc}") from None


@dataclass(frozen=True)
class AlgoSpec:
    """An algorithm, optionally restricted to one topology (``name@topology``)."""

    name: str
    only_topology: Optional[str] = None

    def __str__(self):
        return self.name if self.only_topology is None else f"{self.name}@{self.only_topology}"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    algorithms: tuple = (AlgoSpec("dsgd_rer"),)
    seeds: tuple = (0,)
    record: str = "per_buffer"
    # system
    d: int = 5
    levels: tuple = (0.9, 0.3)
    sigma_scale: float = 1.0
    system_seed: int = 0
    noise: str = "gaussian"
    x0: str = "zero"
    # buffers
    horizon: int = 200_000
    u: Optional[int] = None  # None: floor(sqrt(T / ln T))
    b_multiplier: int = 10
    b: Optional[int] = None
    # network
    m: tuple = (5,)
    topologies: tuple = ("cyclic",)
    degree: int = 2
    self_weight: float = 0.3
    matrix_file: Optional[str] = None
    # step size
    step_mode: str = "per_agent"
    gamma: Optional[float] = None
    burn_in: int = 0
    pair_order: str = "causal"
    output_dir: str = "runs/experiment"
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("duplicate seeds")
        for algo in self.algorithms:
            if algo.name not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {algo.name!r}; expected one of {ALGORITHMS}")
        for top in self.topologies:
            if top not in TOPOLOGY_KINDS:
                raise ConfigError(f"unknown topology {top!r}")
        if "custom" in self.topologies and not self.matrix_file:
            raise ConfigError("custom topology needs network.matrix_file")
        if self.record not in ("per_buffer", "final"):
            raise ConfigError(f"record must be per_buffer or final, got {self.record!r}")
        if self.step_mode not in ("per_agent", "global"):
            raise ConfigError(f"step_size.mode must be per_agent or global, got {self.step_mode!r}")
        if self.step_mode == "global" and self.gamma is None:
            raise ConfigError("global step size needs step_size.gamma")
        if self.noise not in ("gaussian", "bounded"):
            raise ConfigError(f"unknown noise kind {self.noise!r}")
        if self.x0 not in ("zero", "stationary"):
            raise ConfigError(f"unknown x0 mode {self.x0!r}")
        if self.pair_order not in ("causal", "literal"):
            raise ConfigError(f"unknown pair_order {self.pair_order!r}")
        if self.d < 1 or self.horizon < 2 or not self.m or min(self.m) < 1:
            raise ConfigError("d, horizon and m must be positive")
        if not self.levels:
            raise ConfigError("system.levels is empty")

    def eigenvalues(self) -> list:
        """Spread the levels over d slots; the first level takes any remainder."""
        n = len(self.levels)
        counts = [self.d // n] * n
        for i in range(self.d % n):
            counts[i] += 1
        out = []
        for level, c in zip(self.levels, counts):
            out += [level] * c
        return out

    def buffer_params(self) -> tuple:
        from ..estimator import recipe_buffer_params

        if self.u is None:
            b_auto, u = recipe_buffer_params(self.horizon, self.b_multiplier)
        else:
            u = self.u
            b_auto = self.b_multiplier * u
        return (self.b if self.b is not None else b_auto), u

    def to_ini(self) -> str:
        """Canonical text; parsing it back yields an equal config."""
        def opt(v):
            return "" if v is None else str(v)

        def join(vs):
            return ", ".join(str(v) for v in vs)

        return "\n".join([
            "[experiment]",
            f"name = {self.name}",
            f"algorithms = {join(self.algorithms)}",
            f"seeds = {join(self.seeds)}",
            f"record = {self.record}",
            "",
            "[system]",
            f"d = {self.d}",
            f"levels = {join(self.levels)}",
            f"sigma = {self.sigma_scale!r}",
            f"seed = {self.system_seed}",
            f"noise = {self.noise}",
            f"x0 = {self.x0}",
            "",
            "[buffers]",
            f"horizon = {self.horizon}",
            f"u = {'auto' if self.u is None else self.u}",
            f"b_multiplier = {self.b_multiplier}",
            f"b = {opt(self.b)}",
            "",
            "[network]",
            f"m = {join(self.m)}",
            f"topology = {join(self.topologies)}",
            f"degree = {self.degree}",
            f"self_weight = {self.self_weight!r}",
            f"matrix_file = {opt(self.matrix_file)}",
            "",
            "[step_size]",
            f"mode = {self.step_mode}",
            f"gamma = {opt(self.gamma if self.gamma is None else repr(self.gamma))}",
            f"burn_in = {self.burn_in}",
            f"pair_order = {self.pair_order}",
            "",
            "[output]",
            f"directory = {self.output_dir}",
            "",
        ])

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def _algo(raw: str) -> AlgoSpec:
    name, _, top = raw.partition("@")
    return AlgoSpec(name.strip(), top.strip() or None)


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {"experiment", "system", "buffers", "network", "step_size", "output"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    def get(section, key, conv=str, default=None):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key).strip()
        if raw == "":
            return default
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from None

    def sigma(raw):
        return 1.0 if raw == "identity" else float(raw)

    def u_value(raw):
        return None if raw == "auto" else int(raw)

    defaults = ExperimentConfig()
    kw = dict(
        name=get("experiment", "name", str, defaults.name),
        algorithms=tuple(_algo(a) for a in _list(get("experiment", "algorithms", str, "dsgd_rer"))),
        seeds=tuple(_list(get("experiment", "seeds", str, ""), int)),
        record=get("experiment", "record", str, defaults.record),
        d=get("system", "d", int, defaults.d),
        levels=tuple(_list(get("system", "levels", str, "0.9, 0.3"), float)),
        sigma_scale=get("system", "sigma", sigma, 1.0),
        system_seed=get("system", "seed", int, 0),
        noise=get("system", "noise", str, defaults.noise),
        x0=get("system", "x0", str, defaults.x0),
        horizon=get("buffers", "horizon", int, defaults.horizon),
        u=get("buffers", "u", u_value, None),
        b_multiplier=get("buffers", "b_multiplier", int, defaults.b_multiplier),
        b=get("buffers", "b", int, None),
        m=tuple(_list(get("network", "m", str, "5"), int)),
        topologies=tuple(_list(get("network", "topology", str, "cyclic"))),
        degree=get("network", "degree", int, defaults.degree),
        self_weight=get("network", "self_weight", float, defaults.self_weight),
        matrix_file=get("network", "matrix_file", str, None),
        step_mode=get("step_size", "mode", str, defaults.step_mode),
        gamma=get("step_size", "gamma", float, None),
        burn_in=get("step_size", "burn_in", int, 0),
        pair_order=get("step_size", "pair_order", str, defaults.pair_order),
        output_dir=get("output", "directory", str, defaults.output_dir),
    )
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        import json

        try:
            text = json.loads(text)["config"]
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{path}: not a run manifest ({exc})") from None
    return parse_config(text)
