"""Feynman-Kac model definitions and the time mesh.

Three reference dynamics are supported:

* `DiscreteModel` -- a Markov chain observed at integer times with positive
  potentials ``G_n`` (the process is frozen between integers).
* `CTMCModel` -- a finite-state continuous time chain with piecewise
  constant generator and potential ``V_t``.
* `DiffusionModel` -- a 1-d diffusion replaced by its Euler scheme with
  step ``1/m``; only usable by the particle engine (no exact flow).

Mesh times are handled as exact fractions ``k/m`` so that "is ``t_k`` an
integer" is an exact predicate.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .errors import BadSize, DimensionMismatch, HorizonExceeded
from .measures import as_generator, as_kernel, as_probability


def _as_fraction(t):
    if isinstance(t, Fraction):
        return t
    if isinstance(t, int):
        return Fraction(t)
    return Fraction(str(t))


@dataclass(frozen=True)
class Mesh:
    """Uniform time mesh ``t_k = k/m``."""

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise BadSize(f"mesh parameter must be a positive integer, got {self.m!r}")

    @property
    def h(self):
        return 1.0 / self.m

    def time(self, k):
        return Fraction(k, self.m)

    def steps(self, horizon):
        """Number of mesh steps needed to reach ``horizon``; it must lie on the mesh."""
        k = _as_fraction(horizon) * self.m
        if k.denominator != 1:
            raise BadSize(f"horizon {horizon} is not a multiple of 1/{self.m}")
        return int(k)

    def is_integer_time(self, k):
        return k % self.m == 0


class DiscreteModel:
    """Discrete time Feynman-Kac model (case D).

    Parameters
    ----------
    initial_law : array_like
        Law of ``X_0``.
    kernels : sequence of arrays
        ``kernels[p]`` is ``M_{p+1}``, the transition ``X_p -> X_{p+1}``.
    potentials : sequence of arrays
        ``potentials[p]`` is the positive potential ``G_p``.
    """

    kind = "discrete"

    def __init__(self, initial_law, kernels, potentials, name=None):
        self.initial_law = as_probability(initial_law)
        self.kernels = tuple(as_kernel(k) for k in kernels)
        self.potentials = tuple(np.array(g, dtype=float) for g in potentials)
        self.name = name
        n = self.initial_law.shape[0]
        if len(self.kernels) != len(self.potentials):
            raise DimensionMismatch("need one potential per kernel")
        for i, (k, g) in enumerate(zip(self.kernels, self.potentials)):
            if k.shape != (n, n) or g.shape != (n,):
                raise DimensionMismatch(f"step {i}: shapes {k.shape}, {g.shape} vs {n} states")
            if not np.all(np.isfinite(g)) or np.any(g <= 0):
                raise ValueError(f"potential G_{i} must be finite and positive")
            g.setflags(write=False)

    @classmethod
    def homogeneous(cls, initial_law, kernel, potential, horizon, name=None):
        return cls(initial_law, [kernel] * horizon, [potential] * horizon, name=name)

    @property
    def n_states(self):
        return self.initial_law.shape[0]

    @property
    def horizon(self):
        return len(self.kernels)

    def kernel(self, n):
        """``M_n`` (``n >= 1``)."""
        if not 1 <= n <= self.horizon:
            raise HorizonExceeded(f"kernel M_{n} outside 1..{self.horizon}")
        return self.kernels[n - 1]

    def potential(self, p):
        """``G_p`` (``0 <= p < horizon``)."""
        if not 0 <= p < self.horizon:
            raise HorizonExceeded(f"potential G_{p} outside 0..{self.horizon - 1}")
        return self.potentials[p]

    # mesh interface ------------------------------------------------------
    def mesh_steps(self, mesh):
        return self.horizon * mesh.m

    def log_potential(self, mesh, q):
        """``V_{t_q} = log G_{floor(t_q)}``."""
        self._check_mesh_index(mesh, q)
        return np.log(self.potentials[q // mesh.m])

    def mesh_transition(self, mesh, q):
        """``M_{t_q, t_{q+1}}``; ``None`` stands for the identity."""
        self._check_mesh_index(mesh, q)
        if (q + 1) % mesh.m:
            return None
        return self.kernels[(q + 1) // mesh.m - 1]

    def _check_mesh_index(self, mesh, q):
        if not 0 <= q < self.mesh_steps(mesh):
            raise HorizonExceeded(f"mesh step {q} outside horizon {self.horizon}")

    def shift_potential(self, c):
        """Same model with ``log G`` replaced by ``log G - c``.

        Normalized flows are unchanged; masses pick up a factor ``exp(-c n)``.
        """
        f = np.exp(-c)
        return DiscreteModel(self.initial_law, self.kernels, [g * f for g in self.potentials],
                             name=self.name)

    def log_potential_range(self):
        logs = np.log(np.array(self.potentials))
        return float(logs.min()), float(logs.max())


class CTMCModel:
    """Finite-state continuous time Feynman-Kac model (case C).

    The generator and potential are constant on pieces
    ``[breakpoints[j], breakpoints[j+1])``; the last piece runs to the horizon.
    """

    kind = "ctmc"

    def __init__(self, initial_law, generators, potentials, horizon, breakpoints=(0,), name=None):
        self.initial_law = as_probability(initial_law)
        if isinstance(generators, np.ndarray) and generators.ndim == 2:
            generators = [generators]
        if isinstance(potentials, np.ndarray) and potentials.ndim == 1:
            potentials = [potentials]
        self.generators = tuple(as_generator(g) for g in generators)
        self.potentials = tuple(np.array(v, dtype=float) for v in potentials)
        self.breakpoints = tuple(_as_fraction(b) for b in breakpoints)
        self.horizon = _as_fraction(horizon)
        self.name = name
        n = self.initial_law.shape[0]
        if not (len(self.generators) == len(self.potentials) == len(self.breakpoints)):
            raise DimensionMismatch("need one generator and one potential per breakpoint")
        if self.breakpoints[0] != 0 or any(
                b1 <= b0 for b0, b1 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        for j, (g, v) in enumerate(zip(self.generators, self.potentials)):
            if g.shape != (n, n) or v.shape != (n,):
                raise DimensionMismatch(f"piece {j}: shapes {g.shape}, {v.shape} vs {n} states")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"potential on piece {j} is not finite")
            v.setflags(write=False)
        self._expm_cache = {}

    @property
    def n_states(self):
        return self.initial_law.shape[0]

    def piece_at(self, t):
        t = _as_fraction(t)
        j = 0
        while j + 1 < len(self.breakpoints) and self.breakpoints[j + 1] <= t:
            j += 1
        return j

    def pieces_between(self, t0, t1):
        """Split ``[t0, t1]`` into ``(piece, start, end)`` segments."""
        t0, t1 = _as_fraction(t0), _as_fraction(t1)
        out = []
        t = t0
        while t < t1:
            j = self.piece_at(t)
            end = self.breakpoints[j + 1] if j + 1 < len(self.breakpoints) else t1
            end = min(end, t1)
            out.append((j, t, end))
            t = end
        return out

    def generator_at(self, t):
        return self.generators[self.piece_at(t)]

    def potential_at(self, t):
        return self.potentials[self.piece_at(t)]

    def _expm(self, j, dt, twisted=False):
        key = (j, dt, twisted)
        if key not in self._expm_cache:
            a = self.generators[j]
            if twisted:
                a = a + np.diag(self.potentials[j])
            self._expm_cache[key] = expm(a * float(dt))
        return self._expm_cache[key]

    def transition(self, t0, t1):
        """Exact transition matrix of the reference chain over ``[t0, t1]``."""
        p = np.eye(self.n_states)
        for j, a, b in self.pieces_between(t0, t1):
            p = p @ self._expm(j, b - a)
        return p

    def twisted_semigroup(self, t0, t1):
        """``exp(int (L + diag V))`` over ``[t0, t1]`` (unnormalized FK semigroup)."""
        p = np.eye(self.n_states)
        for j, a, b in self.pieces_between(t0, t1):
            p = p @ self._expm(j, b - a, twisted=True)
        return p

    # mesh interface ------------------------------------------------------
    def mesh_steps(self, mesh):
        return mesh.steps(self.horizon)

    def log_potential(self, mesh, q):
        """Potential at the left endpoint ``t_q``."""
        self._check_mesh_index(mesh, q)
        return self.potential_at(mesh.time(q))

    def mesh_transition(self, mesh, q):
        self._check_mesh_index(mesh, q)
        return self.transition(mesh.time(q), mesh.time(q + 1))

    def _check_mesh_index(self, mesh, q):
        if not 0 <= q or mesh.time(q + 1) > self.horizon:
            raise HorizonExceeded(f"mesh step {q} (m={mesh.m}) beyond horizon {self.horizon}")

    def shift_potential(self, c):
        return CTMCModel(self.initial_law, self.generators, [v - c for v in self.potentials],
                         self.horizon, self.breakpoints, name=self.name)

    def log_potential_range(self):
        vs = np.array(self.potentials)
        return float(vs.min()), float(vs.max())


class DiffusionModel:
    """One-dimensional diffusion ``dX = b(X) dt + sigma dW`` under its Euler scheme.

    ``potential`` maps an array of positions to ``V`` values. Every callable
    must be picklable (module-level) for parallel replication.
    """

    kind = "diffusion"

    def __init__(self, drift: Callable, sigma: float, potential: Callable,
                 initial_sampler: Callable, horizon, name: Optional[str] = None):
        self.drift = drift
        self.sigma = float(sigma)
        self.potential = potential
        self.initial_sampler = initial_sampler
        self.horizon = _as_fraction(horizon)
        self.name = name

    def mesh_steps(self, mesh):
        return mesh.steps(self.horizon)

    def log_potential(self, mesh, q):
        return self.potential


def killing_form(model):
    """Shift the potential so that ``V <= 0`` everywhere (max becomes 0)."""
    _, hi = model.log_potential_range()
    return model.shift_potential(hi)


def nonnegative_form(model):
    """Shift the potential so that ``V >= 0`` everywhere (min becomes 0)."""
    lo, _ = model.log_potential_range()
    return model.shift_potential(lo)
