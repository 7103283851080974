"""The acceptance suite: twelve numbered checks with their tolerances.

Each ``criterion_*`` function returns a `CriterionResult`; `run_suite`
runs a selection of them. Every stochastic check draws from a fixed
master seed so results are reproducible.
"""

import time
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np
from scipy import stats

from . import zoo
from .ctsim import JumpSchedulingMode, simulate_ct
from .engine import bias_variance_sweep, geometric_clock_survival, replicate_runs
from .fitting import fit_slope
from .measures import boltzmann_gibbs, dobrushin, min_row_overlap, tv_distance
from .models import CTMCModel, DiscreteModel, Mesh, killing_form
from .oracle import ct_exact_flow, flow_discrete, mesh_flow, mesh_flow_path, semigroup, \
    uniform_recycling_flow
from .selection import SelectionCase, build_selection_kernel, expansion_remainder

MASTER_SEED = 20240611
MESH_GRID = (4, 8, 16, 32, 64, 128, 256)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _random_law(rng, k):
    return rng.dirichlet(np.ones(k))


def _random_potential(rng, case, k, scale=3.0):
    if case is SelectionCase.CASE1:
        return -rng.uniform(0.0, scale, k)
    if case is SelectionCase.CASE2:
        return rng.uniform(0.0, scale, k)
    return rng.uniform(-scale, scale, k)


def random_discrete_model(rng, n_states=None, horizon=None):
    k = int(rng.integers(2, 7)) if n_states is None else n_states
    n = int(rng.integers(1, 6)) if horizon is None else horizon
    kernels = [rng.dirichlet(np.ones(k), size=k) for _ in range(n)]
    pots = [np.exp(rng.uniform(-1.0, 1.0, k)) for _ in range(n)]
    return DiscreteModel(_random_law(rng, k), kernels, pots, name="random")


CASES = (SelectionCase.CASE1, SelectionCase.CASE2, SelectionCase.CASE3)


def criterion_1(seed=MASTER_SEED, instances=1000):
    rng = np.random.default_rng([seed, 1])
    worst = 0.0
    for _ in range(instances):
        k = int(rng.integers(2, 9))
        case = CASES[int(rng.integers(3))]
        v = _random_potential(rng, case, k)
        mu = _random_law(rng, k)
        m = int(rng.integers(1, 257))
        s = build_selection_kernel(case, v, m, mu).kernel
        worst = max(worst, tv_distance(mu @ s, boltzmann_gibbs(mu, np.exp(v / m))))
    return worst < 1e-12, f"max tv(mu S, Psi(mu)) = {worst:.2e} over {instances} instances (< 1e-12)"


def criterion_2(seed=MASTER_SEED, n_random=100):
    rng = np.random.default_rng([seed, 2])
    models = [zoo.ts1(), zoo.mix1()] + [random_discrete_model(rng) for _ in range(n_random)]
    worst = 0.0
    for model in models:
        exact = [flow_discrete(model, n)[1] for n in range(model.horizon + 1)]
        for m in (1, 2, 5, 10):
            flows, _ = mesh_flow_path(model, Mesh(m), model.horizon * m)
            for n, eta in enumerate(exact):
                worst = max(worst, tv_distance(flows[n * m], eta))
    return worst < 1e-12, f"max tv at integer times = {worst:.2e} over {len(models)} models (< 1e-12)"


def _deterministic_slope(values, target=-1.0, tol=0.15, r2_min=None):
    fit = fit_slope(MESH_GRID, values)
    ok = fit.within(target, tol) and (r2_min is None or fit.r_squared > r2_min)
    return ok, fit


def criterion_3(seed=None):
    model = zoo.ct1()
    exact = ct_exact_flow(model, 1)[1]
    tvs = [tv_distance(mesh_flow(model, Mesh(m), m), exact) for m in MESH_GRID]
    ok, fit = _deterministic_slope(tvs, r2_min=0.98)
    return ok, f"slope {fit.slope:.4f} (target -1 +/- 0.15), r2 {fit.r_squared:.5f} (> 0.98)"


def criterion_4(seed=MASTER_SEED, replications=500, threads=1):
    model = zoo.ts1()
    f = {"ind1": np.array([0.0, 1.0])}
    m, n_step = 2, 3
    vals, ses = [], []
    for n in (100, 1000, 10000):
        runs = replicate_runs(killing_form(model), "case1", n, m, replications, seed,
                              horizon=n_step, test_functions=f, threads=threads)
        xs = np.array([est.f_values["ind1"][-1] for est, _ in runs])
        dev2 = (xs - xs.mean()) ** 2
        var = dev2.sum() / (len(xs) - 1)
        # standard error of the sample variance from the fourth central moment
        se_var = np.sqrt(max(np.mean(dev2 ** 2) - np.mean(dev2) ** 2, 0.0) / len(xs))
        vals.append(n * var)
        ses.append(n * se_var)
    ok = all(vals[i + 1] <= vals[i] + 3.0 * np.hypot(ses[i], ses[i + 1]) for i in range(len(vals) - 1))
    txt = ", ".join(f"{v:.4f}+/-{s:.4f}" for v, s in zip(vals, ses))
    return ok, f"N*var at N=1e2,1e3,1e4: {txt}"


def criterion_5(seed=MASTER_SEED, replications=400, threads=1):
    model = killing_form(zoo.ct1())
    f = {"V": np.asarray(zoo.CT1_POTENTIAL)}
    grid = [(m * m, m) for m in (4, 8, 16, 32)]
    rows = bias_variance_sweep(model, "case1", grid, replications, seed, horizon=1,
                               test_functions=f, reference="limit", threads=threads)
    ms = [r.m for r in rows]
    bias = np.array([abs(r.bias) for r in rows])
    se = np.array([r.se for r in rows])
    keep = bias > 3.0 * se
    desc = ", ".join(f"m={m}: |bias|={b:.2e} se={s:.2e}" for m, b, s in zip(ms, bias, se))
    if keep.sum() < 3:
        return False, f"only {int(keep.sum())} of 4 cells have |bias| > 3 SE, slope not fittable ({desc})"
    fit = fit_slope(np.array(ms)[keep], bias[keep])
    return fit.within(-1.0, 0.2), f"slope {fit.slope:.3f} (target -1 +/- 0.2) on {int(keep.sum())} cells ({desc})"


def criterion_6(seed=None):
    model = killing_form(zoo.ct1())
    tvs = [tv_distance(uniform_recycling_flow(model, Mesh(m), m), mesh_flow(model, Mesh(m), m))
           for m in MESH_GRID]
    ok, fit = _deterministic_slope(tvs)
    return ok, f"slope {fit.slope:.4f} (target -1 +/- 0.15), r2 {fit.r_squared:.5f}"


def criterion_7(seed=MASTER_SEED, instances=1000):
    rng = np.random.default_rng([seed, 7])
    worst_s = worst_psi = 0.0
    ok = True
    for _ in range(instances):
        k = int(rng.integers(2, 9))
        u = rng.uniform(0.0, 3.0, k)
        mu = _random_law(rng, k)
        m = int(rng.integers(1, 257))
        norm = float(np.abs(u).max())
        s = build_selection_kernel("case1", -u, m, mu).kernel
        s_tilde = build_selection_kernel("uniform", -u, m, mu).kernel
        d_s = max(tv_distance(a, b) for a, b in zip(s, s_tilde))
        d_psi = tv_distance(boltzmann_gibbs(mu, np.exp(-u / m)), mu)
        ok &= d_s < norm ** 2 / m ** 2 and d_psi < norm / m
        worst_s = max(worst_s, d_s * m * m / norm ** 2)
        worst_psi = max(worst_psi, d_psi * m / norm)
    return ok, (f"max tv(S, S~) m^2/|U|^2 = {worst_s:.3f}, max tv(Psi, mu) m/|U| = {worst_psi:.3f}"
                f" over {instances} instances (both < 1)")


def criterion_8(seed=MASTER_SEED, instances=20):
    rng = np.random.default_rng([seed, 8])
    worst, bad = 0.0, []
    for case in CASES:
        for _ in range(instances):
            k = int(rng.integers(2, 7))
            v = _random_potential(rng, case, k, scale=1.0)
            mu = _random_law(rng, k)
            rem = np.array([expansion_remainder(case, v, m, mu) for m in range(1, 257)])
            ratio = rem.max() / rem.min()
            worst = max(worst, ratio)
            if ratio >= 10.0:
                bad.append(f"{case.value} K={k}: sup {rem.max():.3g}, min {rem.min():.2e} at m={rem.argmin() + 1}")
    detail = f"max over {3 * instances} instances of max/min remainder = {worst:.3f} (< 10)"
    if bad:
        detail += "; failing: " + "; ".join(bad)
    return not bad, detail


def criterion_9(seed=MASTER_SEED, runs=500, threads=1):
    model = killing_form(zoo.ct1())
    m, horizon = 10, 2
    counts = np.zeros(model.n_states)
    results = replicate_runs(model, "case1", 1000, m, runs, seed, horizon=horizon, threads=threads,
                             test_functions={}, keep_population=True)
    for est, _ in results:
        pop = est.population
        counts += np.bincount(pop.states[pop.flags], minlength=model.n_states)
    law = mesh_flow(model, Mesh(m), horizon * m)
    res = stats.chisquare(counts, counts.sum() * law)
    ok = res.pvalue > 0.01
    return ok, f"chi2 = {res.statistic:.2f}, p = {res.pvalue:.3f} on {int(counts.sum())} survivors (p > 0.01)"


def censored_ks(times, rate, horizon):
    """KS distance to Exponential(rate) of samples right-censored at ``horizon``."""
    n = times.size
    obs = np.sort(times[times <= horizon])
    cdf = -np.expm1(-rate * obs)
    i = np.arange(1, obs.size + 1)
    d = max(np.max(i / n - cdf, initial=0.0), np.max(cdf - (i - 1) / n, initial=0.0))
    return max(d, abs(obs.size / n + np.expm1(-rate * horizon)))


def criterion_10(seed=MASTER_SEED, clocks=100_000):
    u, m = 0.7, 16
    survival = geometric_clock_survival(np.full(5 * m, u), m)
    p = np.arange(survival.size)
    gap = float(np.abs(survival - np.exp(-u * p / m)).max())
    horizon = 3.0
    gen = np.zeros((2, 2))
    model = CTMCModel([0.5, 0.5], gen, np.full(2, -u), horizon, name="const-rate")
    res = simulate_ct(model, "case1", clocks, mode="individual", seed=seed, log_events=True)
    d = censored_ks(res.first_jump_times(clocks), u, horizon)
    crit = 1.63 / np.sqrt(clocks)
    ok = gap < 1e-12 and d < crit
    return ok, f"geometric identity gap {gap:.1e} (< 1e-12), KS D = {d:.5f} (< {crit:.5f})"


def criterion_11(seed=None):
    model = zoo.mix1()
    rho = min_row_overlap(zoo.MIX1_KERNEL)
    ok = True
    worst = 0.0
    for k in range(model.horizon):
        prev = np.inf
        for n in range(k + 1, model.horizon + 1):
            beta = semigroup(model, k, n).beta
            bound = (1.0 - rho) ** (n - k - 1)
            ok &= beta <= prev + 1e-15 and beta <= bound + 1e-15
            worst = max(worst, beta / bound)
            prev = beta
    return ok, f"rho = {rho:.3f}; max beta(P_kn)/(1-rho)^(n-k-1) = {worst:.4f}, nonincreasing in n-k"


def criterion_12(seed=MASTER_SEED, replications=25, n_particles=10_000):
    model = killing_form(zoo.ct1())
    exact = ct_exact_flow(model, 1)[1]
    worst = 0.0
    parts = []
    for mode in JumpSchedulingMode:
        xs = np.array([simulate_ct(model, "case1", n_particles, 1, mode=mode, seed=seed,
                                   key=(n_particles, r)).empirical[-1] for r in range(replications)])
        se = xs.std(axis=0, ddof=1) / np.sqrt(replications)
        z = np.abs(xs.mean(axis=0) - exact) / se
        worst = max(worst, float(z.max()))
        parts.append(f"{mode.value} max|z|={z.max():.2f}")
    return worst <= 3.0, "; ".join(parts) + " (<= 3)"


CRITERIA: Dict[int, tuple] = {
    1: ("transport identity", criterion_1),
    2: ("case D mesh equals discrete flow", criterion_2),
    3: ("case C mesh order 1/m", criterion_3),
    4: ("variance N*var no upward trend", criterion_4),
    5: ("bias order 1/m at N = m^2", criterion_5),
    6: ("uniform recycling gap order 1/m", criterion_6),
    7: ("kernel proximity bounds", criterion_7),
    8: ("first-order expansion remainder", criterion_8),
    9: ("exact-sample property", criterion_9),
    10: ("geometric to exponential clocks", criterion_10),
    11: ("Dobrushin decay under mixing", criterion_11),
    12: ("CT mean-field consistency", criterion_12),
}


def run_criterion(number, seed=MASTER_SEED, **kwargs):
    name, fn = CRITERIA[number]
    t0 = time.perf_counter()
    ok, detail = fn(seed=seed, **kwargs)
    return CriterionResult(number, name, bool(ok), detail, time.perf_counter() - t0)


def run_suite(numbers=None, seed=MASTER_SEED, echo: Callable = None):
    results = []
    for number in sorted(CRITERIA if numbers is None else numbers):
        res = run_criterion(number, seed=seed)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
