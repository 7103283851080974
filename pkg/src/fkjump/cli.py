"""Command line front end: ``fkjump {exact,particle,sweep,ctsim,verify}``.

Exit codes: 0 when every assertion passed, 2 when an assertion failed and
1 for configuration or model errors.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .config import load_config
from .csvio import write_events_csv, write_sweep_csv, write_table
from .ctsim import simulate_ct
from .engine import SweepRow, bias_variance_sweep, default_test_functions
from .errors import FKError
from .experiments import run_sweep_suite
from .models import CTMCModel, DiscreteModel, Mesh, killing_form
from .oracle import ct_exact_flow, flow_discrete, mesh_flow_path, semigroup, theorem2_constant, \
    uniform_recycling_flow_path

log = logging.getLogger("fkjump")

EXIT_OK, EXIT_ERROR, EXIT_ASSERT = 0, 1, 2


def _weights_header(n):
    return [f"p{i}" for i in range(n)]


def cmd_exact(cfg, out):
    """Oracle flows, semigroup constants and the structural constant table."""
    model = cfg.model
    k_states = model.n_states
    written = []
    if isinstance(model, DiscreteModel):
        rows = []
        for n in range(model.horizon + 1):
            mass, eta = flow_discrete(model, n)
            rows.append([n, mass, *eta])
        write_table(["n", "mass", *_weights_header(k_states)], rows, out / "eta.csv")
        sg = [[k, n, b.g, b.beta] for k in range(model.horizon)
              for n in range(k, model.horizon + 1) for b in [semigroup(model, k, n)]]
        write_table(["k", "n", "g", "beta"], sg, out / "semigroup.csv")
        write_table(["n", "constant"], [[n, theorem2_constant(model, n)] for n in range(model.horizon + 1)],
                    out / "theorem2_constant.csv")
        written += ["eta.csv", "semigroup.csv", "theorem2_constant.csv"]
    killing = killing_form(model)
    for m in cfg.m:
        mesh = Mesh(m)
        steps = model.mesh_steps(mesh)
        flows, masses = mesh_flow_path(model, mesh, steps)
        write_table(["k", "t", "mass", *_weights_header(k_states)],
                    [[k, float(mesh.time(k)), masses[k], *flows[k]] for k in range(steps + 1)],
                    out / f"mesh_flow_m{m}.csv")
        uni = uniform_recycling_flow_path(killing, mesh, steps)
        write_table(["k", "t", *_weights_header(k_states)],
                    [[k, float(mesh.time(k)), *uni[k]] for k in range(steps + 1)],
                    out / f"uniform_flow_m{m}.csv")
        written += [f"mesh_flow_m{m}.csv", f"uniform_flow_m{m}.csv"]
        if isinstance(model, CTMCModel):
            rows = []
            for k in range(steps + 1):
                mass, mu = ct_exact_flow(model, mesh.time(k))
                rows.append([k, float(mesh.time(k)), mass, *mu])
            write_table(["k", "t", "mass", *_weights_header(k_states)], rows, out / f"ct_flow_m{m}.csv")
            written.append(f"ct_flow_m{m}.csv")
    for name in written:
        print(out / name)
    return EXIT_OK


def cmd_particle(cfg, out, threads):
    grid = [(n, m) for n in cfg.N for m in cfg.m]
    rows = bias_variance_sweep(cfg.model, cfg.case, grid, cfg.replications, cfg.seed,
                               horizon=cfg.horizon, threads=threads)
    write_sweep_csv(rows, out / "particle.csv")
    print(out / "particle.csv")
    return EXIT_OK


def cmd_sweep(cfg, out, suite):
    outcome = run_sweep_suite(cfg, suite)
    name = outcome.suite
    if outcome.sweep_rows is not None:
        write_sweep_csv(outcome.sweep_rows, out / f"sweep_{name}.csv")
    else:
        write_table(outcome.header, outcome.rows, out / f"sweep_{name}.csv")
    target, tol = cfg.slope(name)
    (out / f"summary_{name}.json").write_text(json.dumps(outcome.summary(target, tol), indent=2) + "\n")
    for note in outcome.notes:
        print(note)
    print(f"suite {name}: {'PASS' if outcome.passed else 'FAIL'}")
    return EXIT_OK if outcome.passed else EXIT_ASSERT


def cmd_ctsim(cfg, out):
    model = cfg.model
    if not isinstance(model, CTMCModel):
        raise FKError("ctsim needs a CTMC model")
    horizon = model.horizon if cfg.horizon is None else cfg.horizon
    fs = default_test_functions(model)
    exact = ct_exact_flow(model, horizon)[1]
    rows = []
    for n in cfg.N:
        vals = []
        for rep in range(cfg.replications):
            res = simulate_ct(model, cfg.case, n, horizon, mode=cfg.mode, seed=cfg.seed, key=(n, rep),
                              log_events=cfg.log_events and rep == 0 and n == cfg.N[0])
            if res.events is not None:
                write_events_csv(res.events, out / "events.csv")
            vals.append(res.empirical[-1])
        vals = np.array(vals)
        for name, f in fs.items():
            xs = vals @ f
            var = float(xs.var(ddof=1)) if len(xs) > 1 else 0.0
            ref = float(exact @ f)
            rows.append(SweepRow(N=n, m=0, step=0, f_id=name, mean=float(xs.mean()), var=var, exact=ref,
                                 bias=float(xs.mean()) - ref, se=float(np.sqrt(var / len(xs))),
                                 seed=cfg.seed, wall_ms=0.0))
    write_sweep_csv(rows, out / "ctsim.csv")
    print(out / "ctsim.csv")
    return EXIT_OK


def _criteria(selection):
    if selection in (None, "all"):
        return None
    if selection == "fast":
        return [1, 2, 3, 6, 7, 8, 11]
    try:
        return [int(x) for x in selection.split(",")]
    except ValueError:
        raise FKError(f"--suite for verify expects 'all', 'fast' or numbers like 1,3,5; got {selection!r}") from None


def cmd_verify(suite, seed, out):
    numbers = _criteria(suite)
    unknown = [n for n in numbers or () if n not in acceptance.CRITERIA]
    if unknown:
        raise FKError(f"unknown criteria {unknown}")
    results = acceptance.run_suite(numbers, seed=acceptance.MASTER_SEED if seed is None else seed,
                                   echo=print)
    if out is not None:
        write_table(["criterion", "name", "passed", "seconds", "detail"],
                    [[r.number, r.name, r.passed, round(r.seconds, 3), r.detail] for r in results],
                    out / "verify.csv")
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed")
    return EXIT_OK if n_fail == 0 else EXIT_ASSERT


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory (overrides the config)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for replications")
    common.add_argument("--suite", help="sweep suite, or criteria for verify (all, fast, 1,3,5)")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="fkjump", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("exact", parents=[common], help="exact oracle flows and constants")
    sub.add_parser("particle", parents=[common], help="replicated particle runs over the N x m grid")
    sub.add_parser("sweep", parents=[common], help="(N, m) sweep with slope assertions")
    sub.add_parser("ctsim", parents=[common], help="continuous time jump simulation")
    sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    return parser


def _run(args):
    if args.command == "verify":
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
        return cmd_verify(args.suite, args.seed, args.out)
    if args.config is None:
        raise FKError(f"{args.command} needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.suite is not None:
        cfg.suite = args.suite
    cfg.extra["threads"] = max(1, args.threads)
    out = args.out if args.out is not None else cfg.output
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "exact":
        return cmd_exact(cfg, out)
    if args.command == "particle":
        return cmd_particle(cfg, out, cfg.extra["threads"])
    if args.command == "sweep":
        return cmd_sweep(cfg, out, cfg.suite)
    return cmd_ctsim(cfg, out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (FKError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
