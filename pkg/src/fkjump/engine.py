"""Mean-field particle approximation with geometric interacting jumps.

One mesh step is a selection (Bernoulli acceptance with recycling from
the frozen pre-step population) followed by an independent mutation of
every particle. All randomness of a run comes from one counter-based
Philox stream keyed by ``(seed, *key)``, so results do not depend on how
runs are spread over workers.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np

from .errors import BadSize, ModelMismatch, SignViolation
from .measures import as_probability
from .models import CTMCModel, DiffusionModel, DiscreteModel, Mesh
from .oracle import ct_exact_flow, flow_discrete, mesh_flow
from .selection import SelectionCase, check_potential

log = logging.getLogger(__name__)

TestFunction = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def make_rng(seed, *key):
    """Independent generator for the stream ``(seed, key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ParticlePopulation:
    """States of ``N`` particles and their never-rejected flags."""

    states: np.ndarray
    flags: np.ndarray
    step: int = 0

    @property
    def size(self):
        return self.states.shape[0]

    def empirical(self, n_states):
        """Occupation frequencies of a finite-state population."""
        return np.bincount(self.states, minlength=n_states) / self.size


def _sample_categorical(rng, probs, n):
    cum = np.cumsum(probs)
    idx = np.searchsorted(cum, rng.random(n) * cum[-1], side="right")
    return np.minimum(idx, len(probs) - 1)


def init_population(n, mu0, rng):
    """Draw ``n`` i.i.d. particles from ``mu0`` (a probability vector or a sampler)."""
    if int(n) != n or n < 1:
        raise BadSize(f"population size must be a positive integer, got {n!r}")
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    if callable(mu0):
        states = np.asarray(mu0(rng, n), dtype=float)
    else:
        states = _sample_categorical(rng, as_probability(mu0), n)
    return ParticlePopulation(states=states, flags=np.ones(n, dtype=bool), step=0)


def _particle_values(v, states):
    if callable(v):
        return np.asarray(v(states), dtype=float)
    return np.asarray(v, dtype=float)[states]


def _case3_recycle(rng, g, u_accept):
    """Acceptance flags and recycling sources for case 3.

    Particle ``i`` is rejected with probability ``a_i = sum_j (g_j - g_i)_+ / sum_j g_j``
    and then moves to ``j`` with probability proportional to ``(g_j - g_i)_+``.
    """
    n = g.shape[0]
    order = np.argsort(g, kind="stable")
    gs = g[order]
    cs = np.concatenate(([0.0], np.cumsum(gs)))
    first_above = np.searchsorted(gs, g, side="right")
    above = (cs[n] - cs[first_above]) - g * (n - first_above)
    above = np.clip(above, 0.0, None)
    a = above / cs[n]
    accepted = u_accept >= a
    rej = np.flatnonzero(~accepted)
    source = np.arange(n)
    if rej.size:
        gi = g[rej]
        start = first_above[rej]
        target = rng.random(rej.size) * above[rej]
        lo = start.copy()
        hi = np.full(rej.size, n - 1)
        # smallest k >= start with cumulative weight of gs[start..k] > target
        while np.any(lo < hi):
            mid = (lo + hi) // 2
            cum = (cs[mid + 1] - cs[start]) - gi * (mid + 1 - start)
            go_right = cum <= target
            lo = np.where(go_right & (lo < hi), mid + 1, lo)
            hi = np.where(~go_right & (lo < hi), mid, hi)
        source[rej] = order[lo]
    return accepted, source


def selection_step(pop, case, v, m, rng):
    """Acceptance-rejection with recycling for every particle at once.

    Parameters
    ----------
    pop : ParticlePopulation
    case : SelectionCase or str
    v : ndarray or callable
        Potential ``V`` per state, or a function of the particle states.
    m : int
        Mesh parameter.
    rng : numpy.random.Generator

    Returns
    -------
    ParticlePopulation
        Recycled particles copy states of the pre-step population, and
        ``flags`` becomes ``flags & accepted``.
    """
    case = SelectionCase.parse(case)
    vals = _particle_values(v, pop.states)
    check_potential(case, vals)
    n = pop.size
    u = rng.random(n)
    if case in (SelectionCase.CASE1, SelectionCase.UNIFORM):
        keep = np.exp(vals / m)
        accepted = u < keep
        source = np.arange(n)
        rej = np.flatnonzero(~accepted)
        if rej.size:
            if case is SelectionCase.CASE1:
                source[rej] = _sample_categorical(rng, keep, rej.size)
            else:
                source[rej] = rng.integers(0, n, rej.size)
    elif case is SelectionCase.CASE2:
        g = np.exp(vals / m)
        p_keep = 1.0 / g.mean()
        if p_keep > 1.0 + 1e-12:
            raise SignViolation(f"case2 acceptance probability {p_keep} exceeds 1")
        excess = g - 1.0
        source = np.arange(n)
        if excess.sum() <= 0.0:
            accepted = np.ones(n, dtype=bool)
        else:
            accepted = u < p_keep
            rej = np.flatnonzero(~accepted)
            if rej.size:
                source[rej] = _sample_categorical(rng, excess, rej.size)
    elif case is SelectionCase.CASE3:
        accepted, source = _case3_recycle(rng, np.exp(vals / m), u)
    else:
        raise ValueError("the plus/minus split has no discrete-time selection kernel")
    return ParticlePopulation(states=pop.states[source], flags=pop.flags & accepted, step=pop.step)


class MutationSampler:
    """Draws ``M_{t_q, t_{q+1}}`` moves for every particle.

    ``method`` is ``"kernel"`` (exact row sampling of the finite transition),
    ``"uniformized"`` (CTMC uniformization, also exact) or ``"euler"``
    (one Euler-Maruyama step of length ``1/m``).
    """

    METHODS = ("kernel", "uniformized", "euler")

    def __init__(self, model, mesh, method=None):
        if method is None:
            method = "euler" if isinstance(model, DiffusionModel) else "kernel"
        if method not in self.METHODS:
            raise ValueError(f"unknown mutation method {method!r}")
        if (method == "euler") != isinstance(model, DiffusionModel):
            raise ModelMismatch(f"method {method!r} does not fit a {type(model).__name__}")
        if method == "uniformized" and not isinstance(model, CTMCModel):
            raise ModelMismatch("uniformization needs a CTMCModel")
        self.model = model
        self.mesh = mesh
        self.method = method
        self._cum = {}

    def _cumulative(self, q):
        kernel = self.model.mesh_transition(self.mesh, q)
        if kernel is None:
            return None
        if isinstance(self.model, DiscreteModel):
            key = id(kernel)
        else:
            t0, t1 = self.mesh.time(q), self.mesh.time(q + 1)
            key = tuple((j, b - a) for j, a, b in self.model.pieces_between(t0, t1))
        if key not in self._cum:
            self._cum[key] = np.cumsum(kernel, axis=1)
        return self._cum[key]

    def step(self, states, q, rng):
        if self.method == "euler":
            dt = self.mesh.h
            z = rng.standard_normal(states.shape)
            return states + self.model.drift(states) * dt + self.model.sigma * np.sqrt(dt) * z
        if self.method == "uniformized":
            return self._uniformized(states, q, rng)
        cum = self._cumulative(q)
        if cum is None:
            return states
        u = rng.random(states.shape[0])
        rows = cum[states]
        new = (u[:, None] >= rows).sum(axis=1)
        return np.minimum(new, rows.shape[1] - 1)

    def _uniformized(self, states, q, rng):
        out = states.copy()
        t0, t1 = self.mesh.time(q), self.mesh.time(q + 1)
        for j, a, b in self.model.pieces_between(t0, t1):
            gen = self.model.generators[j]
            lam = float(-np.diag(gen).min())
            if lam <= 0:
                continue
            cum = np.cumsum(np.eye(gen.shape[0]) + gen / lam, axis=1)
            jumps = rng.poisson(lam * float(b - a), out.shape[0])
            for r in range(int(jumps.max(initial=0))):
                idx = np.flatnonzero(jumps > r)
                u = rng.random(idx.size)
                out[idx] = np.minimum((u[:, None] >= cum[out[idx]]).sum(axis=1), gen.shape[0] - 1)
        return out


def mutation_step(pop, sampler, rng, q=None):
    """Move every particle independently by one reference transition."""
    q = pop.step if q is None else q
    if isinstance(sampler.model, DiffusionModel) != np.issubdtype(pop.states.dtype, np.floating):
        raise ModelMismatch("population state type does not match the sampler's model")
    return ParticlePopulation(states=sampler.step(pop.states, q, rng), flags=pop.flags, step=q + 1)


def exact_subpopulation(pop, n_states=None):
    """States of the never-rejected particles and their empirical law.

    Returns ``(count, empirical)``; ``empirical`` is ``None`` when no particle
    survived or when the population is not finite-state and ``n_states`` is unset.
    """
    survivors = pop.states[pop.flags]
    count = int(survivors.shape[0])
    if count == 0 or n_states is None:
        return count, None
    return count, np.bincount(survivors, minlength=n_states) / count


def geometric_clock_survival(u_schedule, m):
    """``P(no rejection in the first p trials) = prod_{k<p} exp(-U_k/m)`` for ``p = 0..len(u)``."""
    u = np.asarray(u_schedule, dtype=float)
    if np.any(u < 0):
        raise SignViolation("killing rates U must be nonnegative")
    return np.exp(-np.concatenate(([0.0], np.cumsum(u))) / m)


def identity(x):
    return x


def default_test_functions(model):
    if isinstance(model, DiffusionModel):
        return {"x": identity}
    n = model.n_states
    return {f"ind{i}": np.eye(n)[i] for i in range(n)}


@dataclass
class RunEstimate:
    record_at: np.ndarray
    f_values: Dict[str, np.ndarray]
    mass_estimate: np.ndarray
    survivors: np.ndarray
    seed: int
    N: int
    m: int
    population: Optional[ParticlePopulation] = field(default=None, repr=False)


def _evaluate(f, states):
    if callable(f):
        return float(np.mean(f(states)))
    return float(np.mean(np.asarray(f, dtype=float)[states]))


def run(model, case, n_particles, mesh, horizon=None, seed=0, record_at=None,
        test_functions=None, key=(), mutation="auto", trace=None):
    """Simulate the N-particle geometric-jump model over the mesh.

    Parameters
    ----------
    model : DiscreteModel, CTMCModel or DiffusionModel
    case : SelectionCase or str
    n_particles : int
    mesh : Mesh or int
    horizon : number, optional
        Final time (must be on the mesh); defaults to the model's horizon.
    seed : int
        Master seed; ``key`` selects an independent stream below it.
    record_at : sequence of int, optional
        Mesh indices at which ``mu^N(f)`` is recorded; defaults to the last one.
    test_functions : dict, optional
        ``name -> per-state table or callable``; defaults to state indicators.
    trace : file object, optional
        Receives one JSON line per step with the empirical weights.

    Returns
    -------
    RunEstimate
    """
    if not isinstance(mesh, Mesh):
        mesh = Mesh(mesh)
    case = SelectionCase.parse(case)
    steps = model.mesh_steps(mesh) if horizon is None else mesh.steps(horizon)
    record = sorted(set([steps] if record_at is None else (int(k) for k in record_at)))
    if record and (record[0] < 0 or record[-1] > steps):
        raise BadSize(f"record indices must lie in 0..{steps}")
    fs = default_test_functions(model) if test_functions is None else dict(test_functions)
    rng = make_rng(seed, *key)
    mu0 = model.initial_sampler if isinstance(model, DiffusionModel) else model.initial_law
    pop = init_population(n_particles, mu0, rng)
    sampler = MutationSampler(model, mesh, None if mutation == "auto" else mutation)
    finite = not isinstance(model, DiffusionModel)

    values = {name: [] for name in fs}
    masses, survivors = [], []
    log_mass = 0.0
    wanted = set(record)

    def snapshot():
        for name, f in fs.items():
            values[name].append(_evaluate(f, pop.states))
        masses.append(np.exp(log_mass))
        survivors.append(int(pop.flags.sum()))

    for q in range(steps + 1):
        if q in wanted:
            snapshot()
        if trace is not None and finite:
            trace.write(json.dumps({"step": q, "weights": pop.empirical(model.n_states).tolist()}) + "\n")
        if q == steps:
            break
        v = model.log_potential(mesh, q)
        vals = _particle_values(v, pop.states)
        log_mass += float(np.log(np.mean(np.exp(vals / mesh.m))))
        pop = selection_step(pop, case, v, mesh.m, rng)
        pop = mutation_step(pop, sampler, rng, q)

    return RunEstimate(
        record_at=np.array(record),
        f_values={k: np.array(v) for k, v in values.items()},
        mass_estimate=np.array(masses),
        survivors=np.array(survivors),
        seed=int(seed), N=int(n_particles), m=mesh.m, population=pop,
    )


def reference_value(model, mesh, k, f, reference="mesh"):
    """Exact ``mu(f)`` at mesh index ``k``.

    ``reference="mesh"`` uses the m-approximation flow; ``"limit"`` uses the
    continuous time flow (CTMC) or the discrete flow at integer times.
    """
    if reference == "mesh":
        mu = mesh_flow(model, mesh, k)
    elif reference == "limit":
        if isinstance(model, CTMCModel):
            mu = ct_exact_flow(model, mesh.time(k))[1]
        elif isinstance(model, DiscreteModel) and mesh.is_integer_time(k):
            mu = flow_discrete(model, k // mesh.m)[1]
        else:
            mu = mesh_flow(model, mesh, k)
    else:
        raise ValueError(f"unknown reference {reference!r}")
    return float(mu @ np.asarray(f, dtype=float))


@dataclass
class SweepRow:
    N: int
    m: int
    step: int
    f_id: str
    mean: float
    var: float
    exact: float
    bias: float
    se: float
    seed: int
    wall_ms: float

    FIELDS = ("N", "m", "step", "f_id", "mean", "var", "exact", "bias", "se", "seed", "wall_ms")

    def as_list(self):
        return [getattr(self, k) for k in self.FIELDS]


def _replicate(args):
    model, case, n, m, horizon, seed, record_at, fs, rep, keep = args
    t0 = time.perf_counter()
    est = run(model, case, n, Mesh(m), horizon=horizon, seed=seed, record_at=record_at,
              test_functions=fs, key=(n, m, rep))
    if not keep:
        est.population = None
    return est, (time.perf_counter() - t0) * 1e3


def replicate_runs(model, case, n, m, replications, seed, horizon=None, record_at=None,
                   test_functions=None, threads=1, executor=None, keep_population=False):
    """``replications`` independent runs of one (N, m) cell, in replication order.

    Returns ``(RunEstimate, wall_ms)`` pairs; final populations are dropped
    unless ``keep_population``.
    """
    fs = default_test_functions(model) if test_functions is None else test_functions
    jobs = [(model, case, n, m, horizon, seed, record_at, fs, r, keep_population)
            for r in range(replications)]
    if executor is not None:
        return list(executor.map(_replicate, jobs, chunksize=max(1, replications // 32)))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_replicate, jobs, chunksize=max(1, replications // (4 * threads))))
    return [_replicate(j) for j in jobs]


def bias_variance_sweep(model, case, grid: Sequence, replications, seed, horizon=None,
                        record_at=None, test_functions=None, reference="mesh", threads=1):
    """Replicated runs over a grid of ``(N, m)`` cells.

    For every cell, recorded step and test function the row holds the
    replication mean and variance, the exact reference value, the bias
    ``mean - exact`` and its standard error ``sqrt(var / R)``.
    """
    fs = default_test_functions(model) if test_functions is None else dict(test_functions)
    rows = []
    executor = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for n, m in grid:
            mesh = Mesh(m)
            t0 = time.perf_counter()
            results = replicate_runs(model, case, n, m, replications, seed, horizon, record_at,
                                     fs, executor=executor)
            wall = (time.perf_counter() - t0) * 1e3
            first = results[0][0]
            for ti, k in enumerate(first.record_at):
                for name, f in fs.items():
                    xs = np.array([est.f_values[name][ti] for est, _ in results])
                    exact = reference_value(model, mesh, int(k), f, reference)
                    mean = float(xs.mean())
                    var = float(xs.var(ddof=1)) if replications > 1 else 0.0
                    rows.append(SweepRow(N=n, m=m, step=int(k), f_id=name, mean=mean, var=var,
                                         exact=exact, bias=mean - exact,
                                         se=float(np.sqrt(var / replications)),
                                         seed=int(seed), wall_ms=round(wall, 3)))
            log.info("cell N=%d m=%d done in %.0f ms", n, m, wall)
    finally:
        if executor is not None:
            executor.shutdown()
    return rows
