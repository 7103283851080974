"""Sweep suites driven by an `ExperimentConfig`.

Each suite returns a `SuiteOutcome`: the table to write, the slope fits it
asserted and whether they all passed.
"""

from dataclasses import dataclass, field
from typing import List, Optional

from .ctsim import geometric_vs_exponential_gap
from .engine import bias_variance_sweep
from .errors import ConfigError, ModelMismatch
from .fitting import fit_slope
from .measures import tv_distance
from .models import CTMCModel, Mesh, killing_form
from .oracle import ct_exact_flow, mesh_flow, uniform_recycling_flow


@dataclass
class SuiteOutcome:
    suite: str
    header: tuple
    rows: list
    fits: dict = field(default_factory=dict)
    passed: bool = True
    notes: List[str] = field(default_factory=list)
    sweep_rows: Optional[list] = None

    def summary(self, target, tol):
        return {
            "suite": self.suite,
            "passed": self.passed,
            "target": target,
            "tol": tol,
            "fits": {k: {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared,
                         "points": [list(p) for p in f.points]} for k, f in self.fits.items()},
            "notes": self.notes,
        }


def _horizon(cfg):
    return cfg.model.horizon if cfg.horizon is None else cfg.horizon


def _need_ctmc(cfg, suite):
    if not isinstance(cfg.model, CTMCModel):
        raise ModelMismatch(f"suite {suite} needs a CTMC model")


def _assert_fit(outcome, key, x, y, target, tol):
    fit = fit_slope(x, y)
    outcome.fits[key] = fit
    ok = fit.within(target, tol)
    outcome.passed &= ok
    outcome.notes.append(f"{key}: slope {fit.slope:.4f} (target {target} +/- {tol}) "
                         f"{'ok' if ok else 'FAILED'}")
    return fit


def suite_variance_n(cfg):
    """Replication variance of ``mu^N(f)`` against N at the first m; slope -1."""
    target, tol = cfg.slope("variance-N")
    m = cfg.m[0]
    rows = bias_variance_sweep(cfg.model, cfg.case, [(n, m) for n in cfg.N], cfg.replications,
                               cfg.seed, horizon=_horizon(cfg), threads=cfg.extra.get("threads", 1))
    out = SuiteOutcome("variance-N", (), [], sweep_rows=rows)
    for f_id in dict.fromkeys(r.f_id for r in rows):
        sel = [r for r in rows if r.f_id == f_id]
        _assert_fit(out, f_id, [r.N for r in sel], [r.var for r in sel], target, tol)
    return out


def suite_bias_m(cfg):
    """Deterministic ``tv(mu^(m)_t, mu_t)`` against m; slope -1."""
    _need_ctmc(cfg, "bias-m")
    target, tol = cfg.slope("bias-m")
    t = _horizon(cfg)
    exact = ct_exact_flow(cfg.model, t)[1]
    rows = []
    for m in cfg.m:
        mesh = Mesh(m)
        rows.append((m, tv_distance(mesh_flow(cfg.model, mesh, mesh.steps(t)), exact)))
    out = SuiteOutcome("bias-m", ("m", "tv"), rows)
    _assert_fit(out, "tv", [r[0] for r in rows], [r[1] for r in rows], target, tol)
    return out


def suite_uniform_gap(cfg):
    """Deterministic ``tv(mu~^(m)_t, mu^(m)_t)`` against m; slope -1."""
    target, tol = cfg.slope("uniform-gap")
    t = _horizon(cfg)
    # uniform recycling is a case-1 construction; the shift leaves both flows unchanged
    model = killing_form(cfg.model)
    rows = []
    for m in cfg.m:
        mesh = Mesh(m)
        k = mesh.steps(t)
        rows.append((m, tv_distance(uniform_recycling_flow(model, mesh, k), mesh_flow(model, mesh, k))))
    out = SuiteOutcome("uniform-gap", ("m", "tv"), rows)
    _assert_fit(out, "tv", [r[0] for r in rows], [r[1] for r in rows], target, tol)
    return out


def suite_mesh_bias(cfg):
    """Replication bias against the limit flow at ``N = m^2``; slope -1 on cells with bias > 3 SE."""
    target, tol = cfg.slope("mesh-bias")
    grid = [(m * m, m) for m in cfg.m]
    rows = bias_variance_sweep(cfg.model, cfg.case, grid, cfg.replications, cfg.seed,
                               horizon=_horizon(cfg), reference="limit",
                               threads=cfg.extra.get("threads", 1))
    out = SuiteOutcome("mesh-bias", (), [], sweep_rows=rows)
    for f_id in dict.fromkeys(r.f_id for r in rows):
        sel = [r for r in rows if r.f_id == f_id and abs(r.bias) > 3.0 * r.se]
        if len(sel) < 3:
            out.passed = False
            out.notes.append(f"{f_id}: only {len(sel)} cells with |bias| > 3 SE, slope not fittable")
            continue
        _assert_fit(out, f_id, [r.m for r in sel], [abs(r.bias) for r in sel], target, tol)
    return out


def suite_clock_gap(cfg):
    """Geometric against exponential clocks at the first N; slope of |gap| on significant cells."""
    _need_ctmc(cfg, "clock-gap")
    target, tol = cfg.slope("clock-gap")
    rows = geometric_vs_exponential_gap(cfg.model, cfg.case, cfg.N[0], cfg.m, _horizon(cfg),
                                        seeds=range(cfg.seed, cfg.seed + cfg.replications),
                                        mode=cfg.mode)
    table = [(r.m, r.f_id, r.mean_geo, r.mean_exp, r.gap, r.se) for r in rows]
    out = SuiteOutcome("clock-gap", ("m", "f_id", "mean_geo", "mean_exp", "gap", "se"), table)
    for f_id in dict.fromkeys(r.f_id for r in rows):
        sel = [r for r in rows if r.f_id == f_id and abs(r.gap) > 3.0 * r.se]
        if len(sel) < 3:
            out.notes.append(f"{f_id}: {len(sel)} cells with |gap| > 3 SE, no slope asserted")
            continue
        _assert_fit(out, f_id, [r.m for r in sel], [abs(r.gap) for r in sel], target, tol)
    return out


SUITE_FUNCS = {
    "variance-N": suite_variance_n,
    "bias-m": suite_bias_m,
    "mesh-bias": suite_mesh_bias,
    "uniform-gap": suite_uniform_gap,
    "clock-gap": suite_clock_gap,
}


def run_sweep_suite(cfg, suite=None):
    name = suite or cfg.suite
    if name is None:
        raise ConfigError("field 'suite': missing (needed by the sweep command)")
    if name not in SUITE_FUNCS:
        raise ConfigError(f"field 'suite': unknown suite {name!r}; known: {', '.join(SUITE_FUNCS)}")
    return SUITE_FUNCS[name](cfg)
