"""Decentralised identification of linear systems with reverse experience replay."""
from .estimator import (BufferLayout, StepSizePolicy, dsgd_rer, ols_estimate, plan_buffers, pooled_ols,
                        run_dsgd_rer, run_sgd_rer, run_vanilla_dsgd, sgd_rer)
from .lti import LtiSystem, RngStream, make_system, simulate
from .network import Topology, gossip_mix, make_topology
from .trace import ErrorTrace

__version__ = "0.1.0"

__all__ = ["BufferLayout", "ErrorTrace", "LtiSystem", "RngStream", "StepSizePolicy", "Topology", "dsgd_rer",
           "gossip_mix", "make_system", "make_topology", "ols_estimate", "plan_buffers", "pooled_ols",
           "run_dsgd_rer", "run_sgd_rer", "run_vanilla_dsgd", "sgd_rer", "simulate"]
