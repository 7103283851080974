"""Continuous time interacting jump particle systems (exponential clocks).

Between interaction jumps every particle follows the reference CTMC,
simulated exactly from exponential holding times. Interaction jumps
follow the selected case. For case 1 three equivalent schedulings are
available:

* individual clocks -- particle ``i`` jumps when its integrated killing
  rate ``int U(xi^i_s) ds`` exceeds a unit exponential;
* population clock -- the population jumps at total rate
  ``sum_i U(xi^i)``; the jumping particle is chosen proportionally to ``U``;
* thinned population clock -- proposals arrive at rate ``N C`` and are
  accepted with probability ``sum_i U(xi^i) / (N C)``.

Rates are constant on the pieces of the model's schedule, which makes
redrawing clocks at piece boundaries exact.
"""

import enum
import heapq
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .engine import default_test_functions, make_rng, replicate_runs
from .errors import ModelMismatch, UnboundedRate
from .measures import as_probability
from .models import CTMCModel, _as_fraction
from .selection import SelectionCase, check_potential


class JumpSchedulingMode(enum.Enum):
    INDIVIDUAL = "individual"
    POPULATION = "population"
    THINNED = "thinned"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


MUTATION, JUMP = "mutation", "jump"


@dataclass
class CTResult:
    record_at: np.ndarray
    empirical: np.ndarray
    n_mutations: int = 0
    n_jumps: int = 0
    n_proposals: int = 0
    events: Optional[List[Tuple[float, int, str, int, int]]] = field(default=None, repr=False)
    seed: int = 0

    def first_jump_times(self, n_particles):
        """First interaction-jump time per particle (``inf`` if none occurred)."""
        first = np.full(n_particles, np.inf)
        for t, i, kind, _, _ in self.events or ():
            if kind == JUMP and first[i] == np.inf:
                first[i] = t
        return first


def interaction_rates(case, v, counts):
    """Per-state interaction jump rate given the occupation counts."""
    n = counts.sum()
    mu = counts / n
    if case is SelectionCase.CASE1:
        return -v
    if case is SelectionCase.CASE2:
        return np.full(v.shape, float(mu @ v))
    if case is SelectionCase.CASE3:
        return np.clip(v[None, :] - v[:, None], 0.0, None) @ mu
    c = v - float(mu @ v)
    return np.clip(-c, 0.0, None) + float(mu @ np.clip(c, 0.0, None))


def rate_bound(case, v):
    """A bound on the per-particle interaction rate valid for every population."""
    if not np.all(np.isfinite(v)):
        raise UnboundedRate("potential has non-finite values")
    if case is SelectionCase.CASE1:
        return float((-v).max(initial=0.0))
    if case is SelectionCase.CASE2:
        return float(v.max(initial=0.0))
    if case is SelectionCase.CASE3:
        return float(v.max() - v.min())
    return 2.0 * float(v.max() - v.min())


class _Population:
    """Particle states with per-state membership lists for O(1) sampling."""

    def __init__(self, states, n_states):
        self.states = np.array(states, dtype=np.int64)
        self.n_states = n_states
        self.members = [[] for _ in range(n_states)]
        self.pos = np.empty(self.states.size, dtype=np.int64)
        for i, x in enumerate(self.states):
            self.pos[i] = len(self.members[x])
            self.members[x].append(i)
        self.counts = np.bincount(self.states, minlength=n_states).astype(float)

    @property
    def size(self):
        return self.states.size

    def move(self, i, y):
        x = self.states[i]
        if x == y:
            return
        lst = self.members[x]
        p = self.pos[i]
        last = lst[-1]
        lst[p] = last
        self.pos[last] = p
        lst.pop()
        self.pos[i] = len(self.members[y])
        self.members[y].append(i)
        self.states[i] = y
        self.counts[x] -= 1
        self.counts[y] += 1

    def random_member(self, rng, x):
        lst = self.members[x]
        return lst[int(rng.integers(len(lst)))]


def _choose(rng, weights):
    cum = np.cumsum(weights)
    k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(k, len(weights) - 1)


class _Simulation:
    def __init__(self, model, case, pop, rng, log_events, bound):
        self.model = model
        self.case = case
        self.pop = pop
        self.rng = rng
        self.events = [] if log_events else None
        self.user_bound = bound
        self.n_mutations = self.n_jumps = self.n_proposals = 0

    def set_piece(self, j):
        self.gen = self.model.generators[j]
        self.v = np.asarray(self.model.potentials[j], dtype=float)
        check_potential(self.case, self.v)
        self.q = -np.diag(self.gen).copy()
        off = self.gen.copy()
        np.fill_diagonal(off, 0.0)
        self.jump_probs = off
        bound = rate_bound(self.case, self.v)
        if self.user_bound is not None:
            if self.user_bound < bound - 1e-12:
                raise UnboundedRate(f"rate bound C={self.user_bound} below the required {bound}")
            bound = float(self.user_bound)
        self.bound = bound

    # moves -------------------------------------------------------------
    def mutate(self, i, t):
        x = int(self.pop.states[i])
        y = _choose(self.rng, self.jump_probs[x])
        self._log(t, i, MUTATION, x, y)
        self.pop.move(i, y)
        self.n_mutations += 1

    def relocation_target(self, x):
        pop, v, rng = self.pop, self.v, self.rng
        if self.case is SelectionCase.CASE1:
            return int(pop.states[int(rng.integers(pop.size))])
        if self.case is SelectionCase.CASE2:
            return _choose(rng, pop.counts * v)
        if self.case is SelectionCase.CASE3:
            return _choose(rng, pop.counts * np.clip(v - v[x], 0.0, None))
        mu = pop.counts / pop.size
        c = v - float(mu @ v)
        minus = max(-c[x], 0.0)
        plus_w = pop.counts * np.clip(c, 0.0, None)
        plus = plus_w.sum() / pop.size
        if rng.random() * (minus + plus) < minus:
            return int(pop.states[int(rng.integers(pop.size))])
        return _choose(rng, plus_w)

    def jump(self, i, t):
        x = int(self.pop.states[i])
        y = self.relocation_target(x)
        self._log(t, i, JUMP, x, y)
        self.pop.move(i, y)
        self.n_jumps += 1

    def _log(self, t, i, kind, x, y):
        if self.events is not None:
            self.events.append((t, int(i), kind, int(x), int(y)))

    # schedulers --------------------------------------------------------
    def run_population(self, t, t_end, thinned):
        pop, rng = self.pop, self.rng
        while True:
            mut = pop.counts * self.q
            if thinned:
                inter_total = pop.size * self.bound
            else:
                inter = pop.counts * interaction_rates(self.case, self.v, pop.counts)
                inter_total = inter.sum()
            total = mut.sum() + inter_total
            if total <= 0:
                return
            t = t + rng.exponential(1.0 / total)
            if t >= t_end:
                return
            if rng.random() * total < mut.sum():
                x = _choose(rng, mut)
                self.mutate(pop.random_member(rng, x), t)
                continue
            if thinned:
                self.n_proposals += 1
                inter = pop.counts * interaction_rates(self.case, self.v, pop.counts)
                accept = inter.sum() / inter_total
                if accept > 1.0 + 1e-12:
                    raise UnboundedRate(f"thinning acceptance {accept} exceeds 1")
                if rng.random() >= accept:
                    continue
            x = _choose(rng, inter)
            self.jump(pop.random_member(rng, x), t)

    def run_individual_redraw(self, t, t_end):
        """Individual clocks for population-dependent rates: redrawn after every event."""
        pop, rng = self.pop, self.rng
        n = pop.size
        mut_clock = t + rng.exponential(1.0, n) / np.where(self.q[pop.states] > 0, self.q[pop.states], 0.0)
        while True:
            r = interaction_rates(self.case, self.v, pop.counts)[pop.states]
            with np.errstate(divide="ignore"):
                jump_clock = t + rng.exponential(1.0, n) / r
            i_m = int(np.argmin(mut_clock))
            i_j = int(np.argmin(jump_clock))
            if mut_clock[i_m] <= jump_clock[i_j]:
                t, i, kind = mut_clock[i_m], i_m, MUTATION
            else:
                t, i, kind = jump_clock[i_j], i_j, JUMP
            if t >= t_end:
                return
            if kind == MUTATION:
                self.mutate(i, t)
            else:
                self.jump(i, t)
            qi = self.q[pop.states[i]]
            mut_clock[i] = t + (rng.exponential(1.0) / qi if qi > 0 else np.inf)

    def init_hazards(self):
        self.hazard = self.rng.exponential(1.0, self.pop.size)

    def run_individual_case1(self, t, t_end):
        """Case 1 with one unit-exponential hazard budget per particle."""
        pop, rng = self.pop, self.rng
        u = -self.v
        n = pop.size
        version = np.zeros(n, dtype=np.int64)
        last = np.full(n, t)
        heap = []

        def schedule(i, now, push):
            x = pop.states[i]
            if self.q[x] > 0:
                push((now + rng.exponential(1.0) / self.q[x], i, MUTATION, version[i]))
            if u[x] > 0:
                push((now + self.hazard[i] / u[x], i, JUMP, version[i]))

        for i in range(n):
            schedule(i, t, heap.append)
        heapq.heapify(heap)

        def push(item):
            heapq.heappush(heap, item)

        while heap:
            te, i, kind, ver = heapq.heappop(heap)
            if ver != version[i]:
                continue
            if te >= t_end:
                break
            x = pop.states[i]
            self.hazard[i] = max(self.hazard[i] - u[x] * (te - last[i]), 0.0)
            last[i] = te
            if kind == MUTATION:
                self.mutate(i, te)
            else:
                self.jump(i, te)
                self.hazard[i] = rng.exponential(1.0)
            version[i] += 1
            schedule(i, te, push)
        # consume hazard up to the segment end
        xs = pop.states
        self.hazard = np.maximum(self.hazard - u[xs] * (t_end - last), 0.0)


def simulate_ct(model, case, n_particles, horizon=None, mode="individual", seed=0,
                record_at=None, rate_bound=None, log_events=False, key=()):
    """Event-driven simulation of the continuous time mean-field particle model.

    Parameters
    ----------
    model : CTMCModel
    case : SelectionCase or str
        ``case1``, ``case2``, ``case3`` or ``plusminus``.
    n_particles : int
    horizon : float, optional
        Defaults to the model horizon.
    mode : JumpSchedulingMode or str
    seed, key
        Select the random stream, as in `fkjump.engine.run`.
    record_at : sequence of float, optional
        Times at which the empirical measure is stored (default: horizon).
    rate_bound : float, optional
        Thinning constant ``C``; defaults to the smallest valid bound per piece.
    log_events : bool
        Keep the ``(time, particle, kind, from, to)`` event log.

    Returns
    -------
    CTResult
    """
    if not isinstance(model, CTMCModel):
        raise ModelMismatch("simulate_ct needs a CTMCModel")
    case = SelectionCase.parse(case)
    if case is SelectionCase.UNIFORM:
        raise ValueError("uniform recycling is a discrete-time scheme")
    mode = JumpSchedulingMode.parse(mode)
    horizon = model.horizon if horizon is None else _as_fraction(horizon)
    record = sorted(set(_as_fraction(t) for t in ([horizon] if record_at is None else record_at)))
    if record and (record[0] < 0 or record[-1] > horizon):
        raise ValueError("record times must lie in [0, horizon]")

    rng = make_rng(seed, *key)
    n_states = model.n_states
    mu0 = as_probability(model.initial_law)
    start = np.minimum(np.searchsorted(np.cumsum(mu0), rng.random(n_particles) * mu0.sum(), side="right"),
                       n_states - 1)
    pop = _Population(start, n_states)
    sim = _Simulation(model, case, pop, rng, log_events, rate_bound)
    sim.init_hazards()

    stops = sorted(set(record) | {b for b in model.breakpoints if 0 < b < horizon} | {horizon})
    snapshots = {}
    t = _as_fraction(0)
    if t in record:
        snapshots[t] = pop.counts / pop.size
    for stop in stops:
        sim.set_piece(model.piece_at(t))
        a, b = float(t), float(stop)
        if mode is JumpSchedulingMode.POPULATION:
            sim.run_population(a, b, thinned=False)
        elif mode is JumpSchedulingMode.THINNED:
            sim.run_population(a, b, thinned=True)
        elif case is SelectionCase.CASE1:
            sim.run_individual_case1(a, b)
        else:
            sim.run_individual_redraw(a, b)
        t = stop
        if t in record:
            snapshots[t] = pop.counts / pop.size
    return CTResult(
        record_at=np.array([float(r) for r in record]),
        empirical=np.array([snapshots[r] for r in record]),
        n_mutations=sim.n_mutations, n_jumps=sim.n_jumps, n_proposals=sim.n_proposals,
        events=sim.events, seed=int(seed),
    )


def _means_at_horizon(model, case, n, horizon, mode, seeds, fs):
    out = []
    for s in seeds:
        res = simulate_ct(model, case, n, horizon, mode=mode, seed=s, key=(n,))
        mu = res.empirical[-1]
        out.append([float(mu @ f) for f in fs.values()])
    return np.array(out)


@dataclass
class EquivalenceReport:
    f_ids: List[str]
    means: dict
    ses: dict
    differences: dict

    def max_z(self):
        return max(abs(d) / se if se > 0 else (0.0 if d == 0 else np.inf)
                   for pair in self.differences.values() for d, se in pair)


def scheduling_equivalence_check(model, n_particles, horizon=None, seeds=range(10), case="case1",
                                 test_functions=None):
    """Compare the three schedulings of the case-1 jump generator.

    Reports the per-mode replication means of each test function at the
    horizon with standard errors, and the pairwise differences
    ``(diff, se)`` (equality holds in distribution, not path by path).
    """
    case = SelectionCase.parse(case)
    fs = default_test_functions(model) if test_functions is None else dict(test_functions)
    seeds = list(seeds)
    means, ses = {}, {}
    for mode in JumpSchedulingMode:
        xs = _means_at_horizon(model, case, n_particles, horizon, mode, seeds, fs)
        means[mode.value] = xs.mean(axis=0)
        ses[mode.value] = xs.std(axis=0, ddof=1) / np.sqrt(len(seeds))
    diffs = {}
    modes = [m.value for m in JumpSchedulingMode]
    for a_i, a in enumerate(modes):
        for b in modes[a_i + 1:]:
            d = means[a] - means[b]
            se = np.sqrt(ses[a] ** 2 + ses[b] ** 2)
            diffs[(a, b)] = list(zip(d.tolist(), se.tolist()))
    return EquivalenceReport(list(fs), means, ses, diffs)


@dataclass
class GapRow:
    m: int
    f_id: str
    mean_geo: float
    mean_exp: float
    gap: float
    se: float


def geometric_vs_exponential_gap(model, case, n_particles, mesh_grid, horizon=None, seeds=range(10),
                                 test_functions=None, mode="population", threads=1):
    """Geometric (mesh) versus exponential (continuous) clocks at matched ``N``.

    For every ``m`` the particle engine and `simulate_ct` are replicated
    over ``seeds``; rows report ``mean_geo - mean_exp`` per test function
    with its standard error.
    """
    case = SelectionCase.parse(case)
    fs = default_test_functions(model) if test_functions is None else dict(test_functions)
    seeds = list(seeds)
    horizon = model.horizon if horizon is None else _as_fraction(horizon)
    exp_vals = _means_at_horizon(model, case, n_particles, horizon, mode, seeds, fs)
    rows = []
    for m in mesh_grid:
        geo = []
        for s in seeds:
            est = replicate_runs(model, case, n_particles, m, 1, s, horizon=horizon,
                                 test_functions=fs)[0][0]
            geo.append([est.f_values[name][-1] for name in fs])
        geo = np.array(geo)
        for j, name in enumerate(fs):
            se = np.sqrt(geo[:, j].var(ddof=1) / len(seeds) + exp_vals[:, j].var(ddof=1) / len(seeds))
            rows.append(GapRow(m=int(m), f_id=name, mean_geo=float(geo[:, j].mean()),
                               mean_exp=float(exp_vals[:, j].mean()),
                               gap=float(geo[:, j].mean() - exp_vals[:, j].mean()), se=float(se)))
    return rows
