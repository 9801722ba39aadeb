"""``entmeter`` command-line front end.

stdout carries exactly one JSON document (or a CSV table for sweeps); diagnostics
go to stderr. Exit codes: 0 success, 2 input error, 3 audit found violations.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import oracles, states
from .invariants import ObservableSpec, Term
from .mixedbounds import BoundConfig, concurrence_lower_bound, inequality_audit, v_operator
from .monotones import MONOTONES, NegativeExpectationError, PURE_MONOTONES, raw_expectation
from .source_sim import ExperimentConfig, run_experiment
from .tensorkit import DensityOperator, LayoutError, StateVector, load_state

EXIT_OK, EXIT_INPUT, EXIT_VIOLATION = 0, 2, 3


class InputError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ENTMETER_SEED")
    try:
        return int(env) if env else 0
    except ValueError:
        raise InputError(f"ENTMETER_SEED={env!r} is not an integer") from None


def _load(text: str):
    """A built-in state name or a path to a state JSON file."""
    if os.path.exists(text):
        try:
            return load_state(text)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise InputError(f"cannot read state file {text}: {exc}") from None
    try:
        return states.named(text)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{text!r} is neither a state file nor a known state name ({exc})") from None


def _emit(doc) -> None:
    json.dump(doc, sys.stdout, indent=2, default=_jsonable)
    sys.stdout.write("\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _clean(x):
    # JSON has no NaN; report it as null
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_clean(v) for v in x]
    return x


def _bound_config(alpha1: float, **kw) -> BoundConfig:
    try:
        return BoundConfig(alpha1, **kw)
    except ValueError as exc:
        raise InputError(str(exc)) from None


# -- subcommands --------------------------------------------------------------------


def cmd_pure(args) -> int:
    psi = _load(args.state)
    if not isinstance(psi, StateVector):
        raise InputError("pure needs a pure state, got a density operator")
    defn = MONOTONES[args.monotone]
    try:
        value = PURE_MONOTONES[args.monotone](psi, raw=args.raw)
        raw = raw_expectation(defn, psi) if psi.layout.dims == defn.dims else None
    except (LayoutError, NegativeExpectationError) as exc:
        raise InputError(str(exc)) from None
    _emit({"monotone": args.monotone, "value": value, "raw_expectation": raw})
    return EXIT_OK


def _as_density(state) -> DensityOperator:
    return state.density() if isinstance(state, StateVector) else state


def cmd_bound(args) -> int:
    cfg = _bound_config(args.alpha1, clamp=not args.no_clamp, audit_trials=args.audit_trials)
    rho = _as_density(_load(args.state))
    try:
        report = concurrence_lower_bound(rho, cfg)
    except LayoutError as exc:
        raise InputError(str(exc)) from None
    _emit(_clean({"state": args.state, "status": report.status, **report.to_dict()}))
    return EXIT_OK


def _flipped(spec: ObservableSpec) -> ObservableSpec:
    """Negative control: keep the leading term, flip the sign of the correction terms."""
    head, *rest = spec.terms
    return ObservableSpec(spec.n_copies, (head, *(Term(-t.coeff, t.factors) for t in rest)))


def cmd_audit(args) -> int:
    cfg = _bound_config(args.alpha1)
    if args.trials < 1:
        raise InputError("--trials must be at least 1")
    spec = v_operator(cfg)
    if args.flip_sign:
        spec = _flipped(spec)
    report = inequality_audit(spec, MONOTONES["concurrence"], args.trials, np.random.default_rng(_seed(args)))
    _emit({"alpha1": args.alpha1, **vars(report)})
    if report.violations:
        print(f"audit found {report.violations} violations", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def werner_rows(points: int, alpha1: float) -> list[dict]:
    cfg = _bound_config(alpha1, audit_trials=0)
    rows = []
    for p in np.linspace(0.0, 1.0, points):
        p = float(p)
        bound = concurrence_lower_bound(states.werner(p), cfg).bound
        woot = oracles.werner_concurrence(p)
        rows.append({"p": p, "bound": bound, "wootters": woot, "gap": woot - bound})
    return rows


def cmd_sweep_werner(args) -> int:
    if args.points < 2:
        raise InputError("--points must be at least 2")
    rows = werner_rows(args.points, args.alpha1)
    if args.format == "json":
        _emit(rows)
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["p", "bound", "wootters", "gap"], lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) for k, v in row.items()})
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        config = ExperimentConfig.load(args.config)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"bad experiment config: {exc}") from None
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.shots is not None:
        overrides["shots"] = args.shots
    if overrides:
        from dataclasses import replace

        try:
            config = replace(config, **overrides)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    report = run_experiment(config)
    _emit(_clean({"status": report.status, **report.to_dict()}))
    if report.violations:
        print(f"observable audit found {report.violations} violations", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


ORACLES = ("wootters", "ckw", "gconc", "negativity", "entropy", "roof")


def cmd_oracle(args) -> int:
    state = _load(args.state)
    which = args.which
    try:
        if which == "wootters":
            value = oracles.wootters_concurrence(_as_density(state))
        elif which == "negativity":
            value = oracles.negativity(_as_density(state))
        elif which == "roof":
            value = oracles.convex_roof_search(
                _as_density(state), iterations=args.iterations, rng=np.random.default_rng(_seed(args))
            )
        else:
            if not isinstance(state, StateVector):
                raise InputError(f"the {which} oracle needs a pure state")
            if which == "ckw":
                value = oracles.ckw_tangle(state)
            elif which == "gconc":
                value = oracles.schmidt_g_concurrence(state, args.convention)
            else:
                value = oracles.reduced_entropy(state)
    except LayoutError as exc:
        raise InputError(str(exc)) from None
    _emit({"oracle": which, "state": args.state, "value": value})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entmeter", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default: $ENTMETER_SEED or 0)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pure", parents=[common], help="pure-state monotone from invariant observables")
    p.add_argument("--state", required=True, help="state file or built-in name (singlet, ghz, w, maxent3, ...)")
    p.add_argument("--monotone", choices=sorted(MONOTONES), default="concurrence")
    p.add_argument("--raw", action="store_true", help="skip the calibration constant")
    p.set_defaults(func=cmd_pure)

    p = sub.add_parser("bound", parents=[common], help="measurable concurrence lower bound")
    p.add_argument("--state", required=True)
    p.add_argument("--alpha1", type=float, default=0.5)
    p.add_argument("--no-clamp", action="store_true", help="report the signed root of a negative trace")
    p.add_argument("--audit-trials", type=int, default=2000)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("audit", parents=[common], help="random audit of the pure-state inequality")
    p.add_argument("--alpha1", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--flip-sign", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("sweep-werner", parents=[common], help="bound vs Wootters along the Werner family")
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--alpha1", type=float, default=0.5)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_sweep_werner)

    p = sub.add_parser("experiment", parents=[common], help="simulated n-copy measurement protocol")
    p.add_argument("--config", required=True, help="experiment config JSON file")
    p.add_argument("--shots", type=int, default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("oracle", parents=[common], help="closed-form reference values")
    p.add_argument("--state", required=True)
    p.add_argument("--which", choices=ORACLES, default="wootters")
    p.add_argument("--convention", choices=oracles.G_CONVENTIONS, default="normalized")
    p.add_argument("--iterations", type=int, default=10_000)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"entmeter: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
