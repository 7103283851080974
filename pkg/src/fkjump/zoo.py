"""Small reference models used by the tests, the CLI and the acceptance suite."""

import numpy as np

from .models import CTMCModel, DiffusionModel, DiscreteModel

TS1_KERNEL = np.array([[0.7, 0.3], [0.4, 0.6]])
TS1_POTENTIAL = np.array([1.0, 2.0])

# rate-1 jumps to a uniformly chosen other state
CT1_GENERATOR = np.array([
    [-1.0, 0.5, 0.5],
    [0.5, -1.0, 0.5],
    [0.5, 0.5, -1.0],
])
CT1_POTENTIAL = np.array([0.0, 0.3, 0.6])

MIX1_KERNEL = np.array([
    [0.40, 0.20, 0.15, 0.15, 0.10],
    [0.20, 0.40, 0.20, 0.10, 0.10],
    [0.10, 0.20, 0.40, 0.20, 0.10],
    [0.10, 0.10, 0.20, 0.40, 0.20],
    [0.10, 0.15, 0.15, 0.20, 0.40],
])
MIX1_POTENTIAL = np.exp(np.array([0.0, 0.2, 0.4, 0.6, 0.8]))


def ts1(horizon=5, initial_law=(1.0, 0.0)):
    """Two-state chain with ``G = (1, 2)`` started from ``delta_0``."""
    return DiscreteModel.homogeneous(initial_law, TS1_KERNEL, TS1_POTENTIAL, horizon, name="TS1")


def ct1(horizon=2):
    """Three-state CTMC with ``V = (0, 0.3, 0.6)`` started from ``delta_0``."""
    return CTMCModel([1.0, 0.0, 0.0], CT1_GENERATOR, CT1_POTENTIAL, horizon, name="CT1")


def mix1(horizon=10):
    """Five-state chain with all transition probabilities >= 0.1."""
    return DiscreteModel.homogeneous(np.full(5, 0.2), MIX1_KERNEL, MIX1_POTENTIAL, horizon, name="MIX1")


def ou_drift(x):
    return -x


def ou_potential(x):
    """Bounded quadratic killing rate, ``V = -min(x^2/2, 2)``."""
    return -np.minimum(0.5 * x * x, 2.0)


def ou_initial(rng, n):
    return rng.standard_normal(n)


def ou_euler(horizon=1):
    """Ornstein-Uhlenbeck reference motion (Euler scheme) with a soft quadratic killing."""
    return DiffusionModel(ou_drift, 1.0, ou_potential, ou_initial, horizon, name="OU-Euler")


ZOO = {"TS1": ts1, "CT1": ct1, "MIX1": mix1, "OU": ou_euler, "OU-Euler": ou_euler}


def get(name, **kwargs):
    try:
        factory = ZOO[name.upper() if name.upper() in ZOO else name]
    except KeyError:
        raise KeyError(f"unknown zoo model {name!r}; known: {', '.join(ZOO)}") from None
    return factory(**kwargs)
