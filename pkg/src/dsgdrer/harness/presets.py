"""Built-in experiment configurations.

The ``*-desk`` presets shrink the horizon to 2e5 samples (buffer sizes follow
the same formulas) so a full sweep finishes in about a minute; the ``*-full``
presets use the original horizon of 1e7 and are slow.
"""
from ..exceptions import ConfigError
from .config import ExperimentConfig, parse_config

_SYSTEM = """
[system]
d = 5
levels = 0.9, 0.3
sigma = identity
seed = 0
noise = gaussian
x0 = zero
"""

_STEP = """
[step_size]
mode = per_agent
burn_in = 0
pair_order = causal
"""

PRESETS = {
    "paper-fig2-desk": f"""
[experiment]
name = paper-fig2-desk
algorithms = dsgd_rer
seeds = 0, 1, 2, 3, 4
{_SYSTEM}
[buffers]
horizon = 200000
u = auto
b_multiplier = 10
[network]
m = 1, 5, 20
topology = cyclic
{_STEP}
[output]
directory = runs/paper-fig2-desk
""",
    "paper-fig3-desk": f"""
[experiment]
name = paper-fig3-desk
algorithms = dsgd_rer, vanilla_dsgd@complete
seeds = 0, 1, 2, 3, 4
{_SYSTEM}
[buffers]
horizon = 200000
u = auto
b_multiplier = 10
[network]
m = 5
topology = identity, cyclic, complete
{_STEP}
[output]
directory = runs/paper-fig3-desk
""",
    "paper-fig2-full": f"""
[experiment]
name = paper-fig2-full
algorithms = dsgd_rer, sgd_rer
seeds = 0
record = per_buffer
{_SYSTEM}
[buffers]
horizon = 10000000
u = auto
b_multiplier = 10
[network]
m = 5, 30, 50
topology = cyclic
{_STEP}
[output]
directory = runs/paper-fig2-full
""",
    "paper-fig3-full": f"""
[experiment]
name = paper-fig3-full
algorithms = dsgd_rer, vanilla_dsgd@complete
seeds = 0
{_SYSTEM}
[buffers]
horizon = 10000000
u = auto
b_multiplier = 10
[network]
m = 5
topology = identity, cyclic, complete
{_STEP}
[output]
directory = runs/paper-fig3-full
""",
    "smoke": f"""
[experiment]
name = smoke
algorithms = dsgd_rer, sgd_rer, vanilla_dsgd@complete, ols
seeds = 0, 1
{_SYSTEM}
[buffers]
horizon = 20000
u = auto
b_multiplier = 10
[network]
m = 1, 3
topology = complete
{_STEP}
[output]
directory = runs/smoke
""",
}


def preset(name: str) -> ExperimentConfig:
    try:
        return parse_config(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
