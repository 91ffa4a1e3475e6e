"""Command-line front end: analyze, optimize, simulate, sweep.

The CLI only orchestrates library calls and formats their results; every
number it emits comes from a library operation.  Output formats: an aligned
table with 4 decimal places, JSON at full precision, or CSV (the default
for sweeps).  Exit codes: 0 success, 2 bad arguments, 3 numeric failure,
4 infeasible design problem.

A config file (--config) may supply defaults as flat key=value lines whose
keys mirror the flag names; explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .design import (
    DesignProblem,
    SolutionStatus,
    SweepAxis,
    solve_design_problem,
    sweep,
)
from .errors import BadParams, ScenarioUnsatisfiable, SingularSystem
from .markov import (
    contention_time,
    critical_delay,
    enhanced_critical_delay,
)
from .protocol import EnhancementConfig, ProtocolParams
from .sim import (
    CriticalTrafficModel,
    Scenario,
    SimConfig,
    run_experiment,
    run_round,
    simulate_two_critical,
    write_trace_header,
    write_trace_rows,
)

EXIT_OK = 0
EXIT_BAD_ARGS = 2
EXIT_NUMERIC = 3
EXIT_INFEASIBLE = 4


def _fmt_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _fmt_full(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _render_pairs(pairs: list[tuple[str, object]], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(dict(pairs), indent=2) + "\n"
    if fmt == "csv":
        head = ",".join(k for k, _ in pairs)
        row = ",".join(_fmt_full(v) for _, v in pairs)
        return head + "\n" + row + "\n"
    width = max(len(k) for k, _ in pairs)
    return "".join(f"{k:<{width}}  {_fmt_cell(v)}\n" for k, v in pairs)


def _render_rows(columns: list[str], rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    if fmt == "csv":
        out = [",".join(columns)]
        for row in rows:
            out.append(",".join(_fmt_full(row[c]) for c in columns))
        return "\n".join(out) + "\n"
    cells = [[_fmt_cell(row[c]) for c in columns] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    for r in cells:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _params_from(args) -> ProtocolParams:
    return ProtocolParams(args.n, args.theta, args.q, args.r)


def _cmd_analyze(args) -> int:
    params = _params_from(args)
    t_c = contention_time(params)
    pairs: list[tuple[str, object]] = [
        ("t_s", 1.0 / params.theta),
        ("t_c", t_c),
        ("c_norm", 1.0 / (params.theta * t_c + 1.0)),
        ("d_crit", critical_delay(params)),
    ]
    if args.enhanced:
        pairs.append(("d_crit_enhanced", enhanced_critical_delay(params)))
    pairs.append(("f_norm", params.theta))
    _emit(_render_pairs(pairs, args.format), args.output)
    return EXIT_OK


def _cmd_optimize(args) -> int:
    eta = args.eta if args.eta is not None else math.inf
    prob = DesignProblem(args.n, args.theta, eta=eta, epsilon=args.epsilon)
    sol = solve_design_problem(prob)
    pairs: list[tuple[str, object]] = [
        ("n", prob.n_users),
        ("theta", prob.theta),
        ("eta", prob.eta),
        ("epsilon", prob.epsilon),
        ("q_opt", sol.q_opt),
        ("r_opt", sol.r_opt),
        ("c_norm", sol.c_norm),
        ("d_crit", sol.d_crit),
        ("eta_star", sol.eta_star),
        ("status", sol.status.value),
    ]
    _emit(_render_pairs(pairs, args.format), args.output)
    return EXIT_INFEASIBLE if sol.status is SolutionStatus.INFEASIBLE else EXIT_OK


def _sim_config(args) -> SimConfig:
    if (args.q is None) != (args.r is None):
        raise BadParams("--q and --r must be given together")
    if args.q is None:
        sol = solve_design_problem(DesignProblem(args.n, args.theta))
        q, r = sol.q_opt, sol.r_opt
    else:
        q, r = args.q, args.r
    params = ProtocolParams(args.n, args.theta, q, r)
    enhancement = EnhancementConfig(
        enabled=args.enhanced,
        backoff_bound=args.b,
        suppress_after_critical=not args.no_suppress_after_critical,
    )
    if args.x_geometric is not None:
        model = CriticalTrafficModel.geometric(args.x_geometric)
    else:
        model = CriticalTrafficModel.fixed(args.x_fixed)
    return SimConfig(
        params=params,
        enhancement=enhancement,
        normal_phase_slots=args.normal_slots,
        rounds=args.rounds,
        traffic_model=model,
        seed=args.seed,
        scenario=Scenario(args.scenario),
    )


def _cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    if cfg.scenario is Scenario.SINGLE_CRITICAL:
        sink = open(args.trace_output, "w") if args.trace_output else None
        try:
            res = run_experiment(cfg, trace_sink=sink)
        finally:
            if sink:
                sink.close()
        params = cfg.params
        t_c = contention_time(params)
        analysis = {
            "t_s": 1.0 / params.theta,
            "t_c": t_c,
            "c_norm": 1.0 / (params.theta * t_c + 1.0),
            "d_crit": (
                enhanced_critical_delay(params)
                if cfg.enhancement.enabled
                else critical_delay(params)
            ),
        }
        rows = [
            {"metric": "t_s", "analysis": analysis["t_s"], "simulation": res.t_s, "se": res.t_s_se},
            {"metric": "t_c", "analysis": analysis["t_c"], "simulation": res.t_c, "se": res.t_c_se},
            {"metric": "c_norm", "analysis": analysis["c_norm"], "simulation": res.c_norm,
             "se": res.c_norm_se},
            {"metric": "d_crit", "analysis": analysis["d_crit"], "simulation": res.d_crit,
             "se": res.d_crit_se},
            {"metric": "max_d_crit", "analysis": "", "simulation": res.max_d_crit, "se": ""},
        ]
        _emit(_render_rows(["metric", "analysis", "simulation", "se"], rows, args.format),
              args.output)
        return EXIT_OK

    summary = simulate_two_critical(cfg)
    if args.trace_output:
        with open(args.trace_output, "w") as sink:
            write_trace_header(sink, cfg.params.n_users)
            for report in summary.reports:
                trace, _ = run_round(cfg, report.round_index)
                write_trace_rows(sink, trace)
    valid = summary.valid_reports
    entry_first = [max(r.g_entry_slots.values()) - r.arrival_slots[1] for r in valid]
    rows = [
        {
            "round": r.round_index,
            "injected": r.injected,
            "second_arrival": r.arrival_slots[1] if r.arrival_slots else "",
            "slots_to_joint_inference": (
                (r.first_joint_g_slot - r.arrival_slots[1])
                if r.first_joint_g_slot is not None
                else ""
            ),
            "critical_collisions": r.critical_collisions,
            "first_finisher": r.completion_order[0] if r.completion_order else "",
            "violations": ";".join(r.violations),
        }
        for r in summary.reports
    ]
    if args.format == "csv":
        cols = ["round", "injected", "second_arrival", "slots_to_joint_inference",
                "critical_collisions", "first_finisher", "violations"]
        _emit(_render_rows(cols, rows, "csv"), args.output)
    else:
        pairs: list[tuple[str, object]] = [
            ("scenario", cfg.scenario.value),
            ("valid_rounds", len(valid)),
            ("attempted_rounds", summary.attempted_rounds),
            ("mean_slots_to_inference", sum(entry_first) / len(entry_first)),
            ("max_slots_to_inference", max(entry_first)),
            ("violations", summary.violation_count),
        ]
        _emit(_render_pairs(pairs, args.format), args.output)
    return EXIT_OK


_SWEEP_COLUMNS = {
    SweepAxis.QR_GRID: ["q", "r", "c_norm", "d_crit", "error"],
    SweepAxis.N_RANGE: ["n", "q_opt", "r_opt", "c_norm", "d_crit", "status", "eta_star"],
    SweepAxis.THETA_RANGE: ["theta", "q_opt", "r_opt", "c_norm", "d_crit", "status", "eta_star"],
    SweepAxis.ETA_RANGE: ["eta", "q_opt", "r_opt", "c_norm", "d_crit", "status", "eta_star"],
    SweepAxis.NHAT_RANGE: ["nhat", "q_opt", "r_opt", "c_norm", "d_crit", "constraint_satisfied"],
}


def _cmd_sweep(args) -> int:
    axis = SweepAxis(args.axis)
    eta = args.eta if args.eta is not None else math.inf
    prob = DesignProblem(args.n, args.theta, eta=eta, epsilon=args.epsilon)
    rows = sweep(prob, axis, start=args.sweep_from, stop=args.sweep_to, step=args.step)
    for row in rows:  # None cells (error-marked grid points) render as empty
        for key, val in row.items():
            if val is None:
                row[key] = ""
    _emit(_render_rows(_SWEEP_COLUMNS[axis], rows, args.format), args.output)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, default_format: str = "table") -> None:
    p.add_argument("--format", choices=["table", "json", "csv"], default=default_format)
    p.add_argument("--output", default=None, help="write the result to this file")
    p.add_argument("--config", default=None, help="key=value file with flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="critmac",
        description="Analyze, optimize, and simulate adaptive MAC protocols "
        "with critical-traffic priority.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="closed-form metrics for one parameter point")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--enhanced", action="store_true",
                   help="also report the enhanced-protocol critical delay")
    _add_common(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("optimize", help="solve the protocol design problem")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--eta", type=float, default=None,
                   help="delay constraint; omit for the unconstrained problem")
    p.add_argument("--epsilon", type=float, default=0.01)
    _add_common(p)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("simulate", help="Monte Carlo rounds, Table-style report")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--q", type=float, default=None,
                   help="omit with --r to use the optimal protocol")
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--enhanced", action="store_true")
    p.add_argument("--b", type=int, default=5, help="backoff bound of the enhanced rules")
    p.add_argument("--no-suppress-after-critical", action="store_true")
    p.add_argument("--normal-slots", type=int, default=100)
    p.add_argument("--x-fixed", type=int, default=20,
                   help="fixed critical-traffic length in slots")
    p.add_argument("--x-geometric", type=float, default=None,
                   help="geometric critical-traffic mean (overrides --x-fixed)")
    p.add_argument("--scenario", choices=[s.value for s in Scenario],
                   default=Scenario.SINGLE_CRITICAL.value)
    p.add_argument("--trace-output", default=None,
                   help="write per-slot trace records (CSV) to this file")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="tabulate metrics/optima along one axis")
    p.add_argument("--axis", choices=[a.value for a in SweepAxis], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--from", dest="sweep_from", type=float, default=None)
    p.add_argument("--to", dest="sweep_to", type=float, default=None)
    p.add_argument("--step", type=float, default=None)
    _add_common(p, default_format="csv")
    p.set_defaults(func=_cmd_sweep)
    return parser


def _config_tokens(path: str) -> list[str]:
    tokens = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key = key.strip().replace("_", "-")
        value = value.strip()
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                tokens.append(f"--{key}")
        else:
            tokens += [f"--{key}", value]
    return tokens


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # config defaults go right after the subcommand so flags override them
    if "--config" in argv:
        i = argv.index("--config")
        try:
            cfg_path = argv[i + 1]
        except IndexError:
            print("error: --config needs a path", file=sys.stderr)
            return EXIT_BAD_ARGS
        argv = argv[:1] + _config_tokens(cfg_path) + argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BadParams as exc:
        print(f"error: BadParams: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS
    except ScenarioUnsatisfiable as exc:
        print(f"error: ScenarioUnsatisfiable: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS
    except SingularSystem as exc:
        print(f"error: SingularSystem: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
