"""Command-line interface: ``sqaxx {coeff,validate-schedule,simulate,spectrum,verify}``.

Exit codes: 0 success, 1 a validation or verification failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .model import ProblemError, load_problem
from .schedule import AnnealBase, ScheduleError, SchedulePolicy, validate
from .trotter import NonStoquasticError, coefficients_from_reduced, pair_kernel, sign_margin

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad command-line input or input file."""


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(rows, header, out: Optional[str]):
    if out:
        fh = open(out, "w", newline="")
    else:
        fh = sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    finally:
        if out:
            fh.close()


def parse_range(text: str) -> np.ndarray:
    """``start:stop:step`` (stop inclusive) or a single number."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise InputError(f"bad range {text!r}") from None
    if len(nums) == 1:
        return np.array(nums)
    if len(nums) != 3 or nums[2] <= 0 or nums[1] < nums[0]:
        raise InputError(f"range must be start:stop:step with step > 0, got {text!r}")
    start, stop, step = nums
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def parse_grid(text: str) -> dict[str, np.ndarray]:
    grid = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if not sep or key.strip() not in ("gamma", "kappa"):
            raise InputError(f"grid entries must be gamma=... or kappa=..., got {item!r}")
        grid[key.strip()] = parse_range(value.strip())
    if set(grid) != {"gamma", "kappa"}:
        raise InputError("grid needs both gamma and kappa")
    return grid


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _load_problem(path: str):
    try:
        return load_problem(path)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError, ProblemError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_policy(path: str) -> SchedulePolicy:
    data = _load_json(path)
    try:
        return SchedulePolicy.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------


def cmd_coeff(args) -> int:
    grid = parse_grid(args.grid)
    if not args.beta_over_m > 0 or args.b < 1:
        raise InputError("--beta-over-m must be positive and --b at least 1")
    rows = []
    for gamma in grid["gamma"]:
        for kappa in grid["kappa"]:
            a = args.beta_over_m * gamma / args.b
            b_k = args.beta_over_m * kappa
            c0, c1, c2 = pair_kernel(a, b_k)
            free = sign_margin(a, b_k) >= 0
            alpha1 = alpha2 = lam = math.nan
            if c2 > 0 and a > 0:
                co = coefficients_from_reduced(a, b_k)
                alpha1, alpha2, lam = co.alpha1, co.alpha2, co.lam
            rows.append((float(a), float(b_k), c0, c1, c2, alpha1, alpha2, lam, free))
    _write_csv(rows, ("a", "b_k", "C0", "C1", "C2", "alpha1", "alpha2", "lambda", "sign_free"), args.out)
    return EXIT_OK


def cmd_validate_schedule(args) -> int:
    policy = _load_policy(args.policy)
    if args.n < 2:
        raise InputError("--n must be at least 2")
    report = validate(policy, args.n, t_max=args.t_max)
    print(json.dumps(report.to_json(), indent=2))
    return EXIT_OK if report.passed else EXIT_FAILED


def _base(problem, args) -> AnnealBase:
    if not args.beta > 0:
        raise InputError("--beta must be positive")
    if args.slices < 2:
        raise InputError("--slices must be at least 2")
    return AnnealBase.for_problem(problem, args.beta, args.slices)


def cmd_simulate(args) -> int:
    from .engine import AnnealAbort, RunConfig, anneal, default_workers

    problem = _load_problem(args.problem)
    policy = _load_policy(args.policy)
    base = _base(problem, args)
    try:
        config = RunConfig(
            seed=args.seed,
            sweeps=args.sweeps,
            replicas=args.replicas,
            measure_every=args.measure_every,
            time_per_sweep=args.time_per_sweep,
            workers=default_workers(),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    report = validate(policy, problem.n_spins)
    if not report.passed:
        print(f"schedule rejected: failed conditions {report.failed}", file=sys.stderr)
        return EXIT_FAILED
    try:
        result = anneal(problem, policy, base, config, check_policy=False)
    except AnnealAbort as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAILED
    text = result.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    from .spectral import ADIABATIC_COLUMNS, adiabatic_ratio

    problem = _load_problem(args.problem)
    policy = _load_policy(args.policy)
    base = _base(problem, args)
    try:
        times = [float(t) for t in args.times.split(",")]
    except ValueError:
        raise InputError(f"bad --times list {args.times!r}") from None
    rows = []
    for t in times:
        try:
            rows.append(adiabatic_ratio(policy, problem, base, t).row())
        except NonStoquasticError as exc:
            print(f"t={t}: {exc}", file=sys.stderr)
            return EXIT_FAILED
        except ValueError as exc:
            raise InputError(f"t={t}: {exc}") from None
    _write_csv(rows, ADIABATIC_COLUMNS, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import verify

    names = list(verify.CHECKS) if args.check == "all" else [args.check]
    ok = True
    for name in names:
        kwargs = {}
        if name in ("pair", "deltas", "mc") and args.samples is not None:
            kwargs["samples" if name != "mc" else "sweeps"] = args.samples
        if name in ("pair", "deltas", "mc") and args.seed is not None:
            kwargs["seed"] = args.seed
        for result in verify.CHECKS[name](**kwargs):
            print(result.line())
            ok &= result.ok
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqaxx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeff", help="tabulate kernel weights and effective couplings over a (Gamma, K) grid")
    p.add_argument("--grid", required=True, help="e.g. gamma=0:3:0.05,kappa=0:1:0.02")
    p.add_argument("--beta-over-m", type=float, required=True)
    p.add_argument("--b", type=int, required=True, help="graph degree")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_coeff)

    p = sub.add_parser("validate-schedule", help="check a schedule policy against the convergence conditions")
    p.add_argument("--policy", required=True)
    p.add_argument("--n", type=int, required=True, help="number of spins N")
    p.add_argument("--t-max", type=float, default=1e12)
    p.set_defaults(func=cmd_validate_schedule)

    p = sub.add_parser("simulate", help="run path-integral Monte Carlo along a schedule")
    p.add_argument("--problem", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--slices", type=int, required=True)
    p.add_argument("--sweeps", type=int, required=True)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--measure-every", type=int, default=1)
    p.add_argument("--time-per-sweep", type=float, default=1.0)
    p.add_argument("--out", help="trace CSV path (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectrum", help="gap and adiabatic ratio along a schedule (tiny systems)")
    p.add_argument("--problem", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--slices", type=int, required=True)
    p.add_argument("--times", required=True, help="comma-separated schedule times")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_spectrum)

    from .verify import CHECKS

    p = sub.add_parser("verify", help="run oracle cross-checks")
    p.add_argument("check", choices=[*CHECKS, "all"])
    p.add_argument("--samples", type=int, default=None, help="sample count (pair, deltas) or sweeps (mc)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ProblemError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # downstream closed the pipe (e.g. `| head`); stop quietly
        import os

        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = EXIT_OK
    sys.exit(code)
