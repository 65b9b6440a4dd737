"""Command-line front end.

Exit codes: 0 success, 1 usage, 2 parse error, 3 validation error,
4 non-convergence, 5 oracle budget refusal, 6 oracle disagreement.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace

import numpy as np

from . import beams, oracle
from .channel import assemble_channel
from .config import (ConfigParseError, ConfigValidationError, load_config, read_record,
                     read_solution, solution_record, write_record, dumps_record)
from .geometry import Direction, GeometryError
from .maxmin import (SolverOptions, evaluate, moreau_value, project_simplex, solve_maxmin)

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_VALIDATION = 0, 1, 2, 3
EXIT_NONCONVERGED, EXIT_BUDGET, EXIT_ORACLE_MISMATCH = 4, 5, 6

log = logging.getLogger("rismaxmin")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(rec: dict, out) -> None:
    if out:
        write_record(rec, out)
    else:
        sys.stdout.write(dumps_record(rec))


def _options(cfg, args) -> SolverOptions:
    opts = cfg.solver
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    for name in ("tau", "restarts", "outer_max_iters", "inner_max_iters"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    return replace(opts, **overrides) if overrides else opts


def _metrics(sol, weights) -> dict:
    return {
        "ratios": beams.power_ratio_report(sol.user_powers).tolist(),
        "weights": list(map(float, weights)),
        "min_weighted_power": sol.min_weighted_power,
    }


def cmd_solve(args) -> int:
    cfg = load_config(args.scenario)
    opts = _options(cfg, args)
    s = cfg.scenario
    sol = solve_maxmin(assemble_channel(s), s.weights, opts, s.tx_power)
    rec = solution_record(sol, _metrics(sol, s.weights))
    if cfg.quantize_bits is not None:
        q = beams.requantized(s, sol, cfg.quantize_bits)
        rec["quantized"] = solution_record(q, _metrics(q, s.weights))
    _emit(rec, args.out)
    log.info("status=%s gap=%.3e ratios=%s", sol.status, sol.gap, rec["ratios"])
    return EXIT_OK if sol.converged else EXIT_NONCONVERGED


def _grid(start, stop, step):
    if not step > 0:
        raise UsageError("grid steps must be positive")
    return np.arange(start, stop - 1e-9, step)


def cmd_pattern(args) -> int:
    cfg = load_config(args.scenario)
    sol = read_solution(args.solution)
    if len(sol.phases) != cfg.scenario.ris.n_units:
        raise ConfigValidationError(
            "omega", f"solution has {len(sol.phases)} phases, scenario has "
                     f"{cfg.scenario.ris.n_units} units")
    grid = beams.scattered_pattern(cfg.scenario, sol.phases,
                                   _grid(0.0, 90.0, args.theta_step),
                                   _grid(0.0, 360.0, args.phi_step),
                                   args.range, args.normalize)
    if not args.out:
        raise UsageError("pattern needs --out for the CSV file")
    grid.to_csv(args.out)
    return EXIT_OK


def cmd_widebeam(args) -> int:
    cfg = load_config(args.scenario)
    opts = _options(cfg, args)
    region = beams.RegionSpec(Direction(args.center_theta, args.center_phi), args.radius,
                              args.count)
    sol, cov, virtual = beams.design_widebeam(cfg.scenario, region, opts, args.range)
    rec = solution_record(sol, _metrics(sol, virtual.weights))
    rec["region"] = {
        "center_theta_deg": region.center.theta_deg, "center_phi_deg": region.center.phi_deg,
        "angular_radius_deg": region.angular_radius_deg, "sub_beam_count": region.sub_beam_count,
        "range_m": args.range,
        "directions": [[d.theta_deg, d.phi_deg] for d in beams.widebeam_directions(region)],
    }
    rec["coverage"] = cov.to_dict()
    _emit(rec, args.out)
    return EXIT_OK if sol.converged else EXIT_NONCONVERGED


def cmd_quantize(args) -> int:
    cfg = load_config(args.scenario)
    rec_in = read_record(args.solution)
    sol = read_solution(args.solution)
    s = cfg.scenario
    if len(sol.phases) != s.ris.n_units:
        raise ConfigValidationError("omega", "solution does not match the scenario size")
    bits = args.bits if args.bits is not None else cfg.quantize_bits
    if bits is None:
        raise UsageError("quantize needs --bits or a [quantize] section")
    if not 1 <= bits <= 8:
        raise ConfigValidationError("bits", "must lie in [1, 8]")
    continuous = rec_in.get("continuous")
    if continuous is None:
        cont = evaluate(assemble_channel(s), s.weights, sol.phases, s.tx_power,
                        tau=sol.tau, status=sol.status)
        continuous = solution_record(cont, _metrics(cont, s.weights))
    q = beams.requantized(s, sol, bits)
    rec = solution_record(q, _metrics(q, s.weights))
    rec["continuous"] = continuous
    _emit(rec, args.out)
    return EXIT_OK


def _oracle_suite(args) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    budget = oracle.OracleBudget(max_evaluations=args.max_evaluations)
    rows = []

    worst = 0.0
    for n in (1, 2, 3):
        for _ in range(20):
            x = rng.normal(size=n)
            steps = 300
            p_dense = oracle.projection_dense(x, steps, budget)
            worst = max(worst, float(np.linalg.norm(project_simplex(x) - p_dense)) * steps)
    rows.append(("projection vs barycentric grid", worst <= 2.0, f"max dist*steps={worst:.3f}"))

    worst = 0.0
    for _ in range(10):
        x = rng.normal(size=2)
        worst = max(worst, abs(oracle.moreau_direct(x, 1.0) - moreau_value(x, 1.0)))
    rows.append(("envelope vs direct minimization", worst <= 1e-6, f"max err={worst:.2e}"))

    worst = 0.0
    for _ in range(5):
        h = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
        a = rng.uniform(0.5, 2.0, 2)
        _, ref = oracle.grid_continuous(h, a, 72, budget)
        got = solve_maxmin(h, a, SolverOptions(restarts=5, seed=0)).min_weighted_power
        worst = max(worst, (ref - got) / ref)
    rows.append(("solver vs continuous grid (N=3, K=2)", worst <= 0.02,
                 f"worst shortfall={worst:.2%}"))

    if args.bits is not None:
        n, k = args.units, args.users
        h = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
        a = np.ones(k)
        _, ref = oracle.exhaustive_discrete(h, a, args.bits, budget)
        sol = solve_maxmin(h, a, SolverOptions(restarts=5, seed=0))
        q = evaluate(h, a, beams.quantize_phases(sol.phases, args.bits))
        rows.append((f"{args.bits}-bit exhaustive vs quantized solver (N={n}, K={k})",
                     q.min_weighted_power <= ref * (1 + 1e-12),
                     f"exhaustive={ref:.4e} quantized={q.min_weighted_power:.4e} "
                     f"ratio={q.min_weighted_power / ref:.3f}"))
    return rows


def cmd_oracle_check(args) -> int:
    if args.bits is not None:
        oracle.OracleBudget(max_evaluations=args.max_evaluations).require(
            (2 ** args.bits) ** args.units, f"{args.bits}-bit enumeration over {args.units} units")
    rows = _oracle_suite(args)
    ok = True
    for name, passed, detail in rows:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if ok else EXIT_ORACLE_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    # SUPPRESS keeps a subcommand from resetting a flag given before the verb
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="RNG seed for random restarts")
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--out", "-o", default=argparse.SUPPRESS,
                        help="output file (default: stdout)")

    solver = _Parser(add_help=False)
    solver.add_argument("--tau", type=float, default=None)
    solver.add_argument("--restarts", type=int, default=None)
    solver.add_argument("--outer-max-iters", dest="outer_max_iters", type=int, default=None)
    solver.add_argument("--inner-max-iters", dest="inner_max_iters", type=int, default=None)

    p = _Parser(prog="rismaxmin", description="Max-min phase design for reflecting surfaces.",
                parents=[common])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("solve", parents=[common, solver], help="optimize phases for a scenario")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("pattern", parents=[common], help="export a scattered-power grid as CSV")
    s.add_argument("scenario")
    s.add_argument("solution")
    s.add_argument("--theta-step", type=float, default=1.0)
    s.add_argument("--phi-step", type=float, default=2.0)
    s.add_argument("--range", type=float, default=beams.DEFAULT_PROBE_RANGE_M)
    s.add_argument("--normalize", action="store_true")
    s.set_defaults(func=cmd_pattern)

    s = sub.add_parser("widebeam", parents=[common, solver], help="synthesize a wide beam")
    s.add_argument("scenario")
    s.add_argument("--center-theta", type=float, required=True)
    s.add_argument("--center-phi", type=float, required=True)
    s.add_argument("--radius", type=float, required=True)
    s.add_argument("--count", type=int, default=37)
    s.add_argument("--range", type=float, default=beams.DEFAULT_PROBE_RANGE_M)
    s.set_defaults(func=cmd_widebeam)

    s = sub.add_parser("quantize", parents=[common], help="quantize a solution's phases")
    s.add_argument("solution")
    s.add_argument("--scenario", required=True)
    s.add_argument("--bits", type=int, default=None)
    s.set_defaults(func=cmd_quantize)

    s = sub.add_parser("oracle-check", parents=[common], help="compare against brute force")
    s.add_argument("--bits", type=int, default=None)
    s.add_argument("--units", type=int, default=4)
    s.add_argument("--users", type=int, default=2)
    s.add_argument("--max-evaluations", type=int, default=2_000_000)
    s.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for name in ("seed", "verbose", "out"):
            if not hasattr(args, name):
                setattr(args, name, None)
        if not getattr(args, "command", None):
            raise UsageError("a command is required")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        start = time.perf_counter()
        code = args.func(args)
        log.info("%s finished in %.2fs", args.command, time.perf_counter() - start)
        return code
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigValidationError, GeometryError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except oracle.OracleBudgetError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
