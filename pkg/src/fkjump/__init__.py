"""Interacting jump particle approximations of Feynman-Kac flows with exact oracles."""

from .ctsim import simulate_ct
from .engine import bias_variance_sweep, replicate_runs, run
from .models import CTMCModel, DiscreteModel, Mesh
from .oracle import ct_exact_flow, flow_discrete, mesh_flow
from .selection import SelectionCase, build_selection_kernel, jump_generator

__version__ = "0.1.0"
