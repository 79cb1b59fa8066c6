"""Command-line entry point (``hyperlattice <subcommand> ...``).

Every subcommand writes one CSV table (to ``--out`` or stdout) and, where
there is a model or simulation summary, a JSON report to ``--report``.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from contextlib import contextmanager

import numpy as np

from . import experiments as ex
from .aggregate import AggregateModel, aggregate_table
from .generator import MODES
from .metrics import report_from_pi
from .simulator import SimConfig, simulate
from .solver import solve
from .states import StateIndexer
from .system import load_config


@contextmanager
def _sink(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_csv(path, header, rows):
    with _sink(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_dicts(path, rows):
    fields = list(rows[0]) if rows else []
    for r in rows[1:]:
        fields += [k for k in r if k not in fields]
    with _sink(path) as fh:
        w = csv.DictWriter(fh, fieldnames=fields, restval="", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _write_json(path, obj):
    if path:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2, default=_plain)
            fh.write("\n")


def _plain(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(type(x).__name__)


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


# ---------------------------------------------------------------------------


def cmd_solve(args):
    system, policy = load_config(args.config)
    st, Q = solve(system, policy, args.K, solver=args.solver, mode=args.mode, tol=args.tol)
    S = Q.indexer.states
    _write_csv(
        args.out,
        ["index"] + [f"n_{i + 1}" for i in range(system.server_count)] + ["probability"],
        ([u, *S[u].tolist(), repr(float(st.pi[u]))] for u in range(Q.dim)),
    )
    if args.dump_matrix:
        Q.dump(args.dump_matrix)
    rep = report_from_pi(
        st.pi, system, policy, Q.indexer, st.mass, solver=st.solver, mode=st.mode,
        iterations=st.iterations, residual=st.residual, normalization=st.normalization,
        converged=st.converged, states=Q.dim, note=st.note,
    )
    _write_json(args.report, rep.to_dict())
    return 0


def cmd_simulate(args):
    system, policy = load_config(args.config)
    cfg = SimConfig(
        events=args.events, replications=args.reps, seed=args.seed, warmup=args.warmup,
        travel=args.travel, busy_includes_travel=args.busy_includes_travel,
        record_log=bool(args.log), backend=args.backend, workers=args.workers,
    )
    sim = simulate(system, policy, cfg)
    mean, ci = sim.mean("workloads"), sim.ci("workloads")
    _write_csv(
        args.out,
        ["server", "workload", "workload_ci", "rho_ii", "mean_queue"],
        (
            [i + 1, float(mean[i]), float(ci[i]), float(sim.mean("primary_fractions")[i]),
             float(sim.mean("mean_queue")[i])]
            for i in range(system.server_count)
        ),
    )
    if args.log:
        sim.write_log(args.log)
    _write_json(args.report, sim.to_dict())
    return 0


def _sweep(axis, args, **params):
    grid = _floats(args.grid) if args.grid else ex.default_grid(axis, args.points)
    sim = None
    if not args.no_sim:
        sim = SimConfig(events=args.events, replications=args.reps, seed=args.seed,
                        warmup=args.warmup)
    scen = ex.Scenario(axis=axis, grid=grid, K=args.K, solver=args.solver, mode=args.mode,
                       sim=sim, workers=args.workers, params=params)
    rows = ex.run_sweep(scen)
    _write_dicts(args.out, rows)
    return 0


def cmd_sweep_overlap(args):
    return _sweep("overlap_ratio", args)


def cmd_sweep_eta(args):
    return _sweep("eta", args, r=args.r)


def cmd_sweep_load(args):
    return _sweep("load", args)


def cmd_table_states(args):
    rows = ex.table_states(_ints(args.servers), _ints(args.Ks), rho=args.rho,
                           timed=not args.no_timing)
    _write_dicts(args.out, rows)
    return 0


def cmd_evaluate_plan(args):
    plan = ex.read_plan(args.plan, service_rate=args.mu)
    report, sigma = ex.evaluate_plan(plan, args.K)
    _write_csv(
        args.out,
        ["unit", "workload", "rho_ii"],
        ([u, float(report.workloads[i]), float(report.primary_fractions[i])]
         for i, u in enumerate(plan.units)),
    )
    out = report.to_dict()
    out["sigma"] = sigma
    if args.check:
        out["truncation_check"] = ex.plan_truncation_check(plan, args.K)
        print(json.dumps(out["truncation_check"], default=_plain), file=sys.stderr)
    _write_json(args.report, out)
    return 0


def cmd_aggregate(args):
    if args.config:
        system, _ = load_config(args.config)
        model = AggregateModel.from_system(system)
    else:
        model = AggregateModel(args.servers, args.lam, args.mu * args.servers)
    rows = aggregate_table(model, args.K)
    _write_dicts(args.out, rows)
    return 0


def cmd_states(args):
    idx = StateIndexer(args.servers, args.K)
    if args.rank:
        print(idx.rank(_ints(args.rank)))
        return 0
    if args.unrank is not None:
        print(",".join(str(x) for x in idx.unrank(args.unrank)))
        return 0
    S = idx.states
    _write_csv(
        args.out,
        ["index"] + [f"n_{i + 1}" for i in range(args.servers)] + ["level"],
        ([u, *S[u].tolist(), int(idx.levels[u])] for u in range(idx.size)),
    )
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyperlattice", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, K=None):
        sp.add_argument("--out", default=None, help="CSV output path (default stdout)")
        sp.add_argument("--K", type=int, default=K)

    def model_flags(sp):
        sp.add_argument("--mode", choices=MODES, default=None)
        sp.add_argument("--solver", choices=("direct", "power", "auto"), default="auto")
        sp.add_argument("--tol", type=float, default=1e-12)

    def sim_flags(sp, events=1000, reps=1):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--events", type=int, default=events)
        sp.add_argument("--reps", type=int, default=reps)
        sp.add_argument("--warmup", type=float, default=0.1)
        sp.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("solve", help="solve the truncated chain; CSV of pi")
    s.add_argument("--config", required=True)
    common(s, K=ex.DEFAULT_K_SMALL)
    model_flags(s)
    s.add_argument("--report", help="JSON performance report path")
    s.add_argument("--dump-matrix", help="write Q_K as 'u v rate' lines")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("simulate", help="discrete-event simulation; per-server CSV")
    s.add_argument("--config", required=True)
    common(s)
    sim_flags(s)
    s.add_argument("--travel", action="store_true")
    s.add_argument("--busy-includes-travel", action="store_true")
    s.add_argument("--backend", choices=("compiled", "python"), default=None)
    s.add_argument("--log", help="event-log CSV for the first replication")
    s.add_argument("--report")
    s.set_defaults(func=cmd_simulate)

    for name, func, extra in (
        ("sweep-overlap", cmd_sweep_overlap, False),
        ("sweep-eta", cmd_sweep_eta, True),
        ("sweep-load", cmd_sweep_load, False),
    ):
        s = sub.add_parser(name, help=f"{name.split('-')[1]} sweep; one CSV row per grid point")
        common(s)
        model_flags(s)
        sim_flags(s, events=50_000, reps=10)
        s.add_argument("--grid", help="comma-separated grid values")
        s.add_argument("--points", type=int, default=100)
        s.add_argument("--no-sim", action="store_true")
        if extra:
            s.add_argument("--r", type=float, default=0.4, help="overlap ratio")
        s.set_defaults(func=func)

    s = sub.add_parser("table-states", help="state counts, sigma_K and solve time")
    s.add_argument("--out", default=None)
    s.add_argument("--servers", default="2,3,4")
    s.add_argument("--Ks", default=",".join(map(str, ex.TABLE_K)))
    s.add_argument("--rho", type=float, default=0.5)
    s.add_argument("--no-timing", action="store_true")
    s.set_defaults(func=cmd_table_states)

    s = sub.add_parser("evaluate-plan", help="workloads and sigma for a districting plan")
    s.add_argument("--plan", required=True)
    common(s, K=ex.DEFAULT_K_PLAN)
    s.add_argument("--mu", type=float, default=1.0)
    s.add_argument("--check", action="store_true", help="also compare against K+1")
    s.add_argument("--report")
    s.set_defaults(func=cmd_evaluate_plan)

    s = sub.add_parser("aggregate", help="birth-death aggregate table")
    s.add_argument("--config")
    common(s, K=20)
    s.add_argument("--servers", type=int, default=1)
    s.add_argument("--lam", type=float, default=0.5)
    s.add_argument("--mu", type=float, default=1.0, help="per-server service rate")
    s.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("states", help="enumerate, rank or unrank truncated states")
    common(s, K=5)
    s.add_argument("--servers", type=int, required=True)
    s.add_argument("--rank", help="comma-separated state to rank")
    s.add_argument("--unrank", type=int)
    s.set_defaults(func=cmd_states)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
