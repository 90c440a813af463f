"""Command line: run | conditions | list | selftest.

Exit codes: 0 pass, 1 tolerance fail, 2 config error, 3 numerical error.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import experiments
from .errors import ConfigError, DomainError, NumericalError, QuadratureError, SolverError

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _load_config(target):
    if os.path.exists(target):
        return experiments.ExperimentConfig.from_json(target)
    return experiments.registry_config(target)


def _cmd_run(args):
    config = _load_config(args.config)
    table = experiments.run_experiment(config, args.tolerance_scale, args.jobs, args.seed)
    out_dir = args.out_dir or config.out_dir
    paths = experiments.emit(table, out_dir)
    for r in table.rows:
        errs = " ".join(f"{r[f'err_r{i + 1}']:.3e}" for i in range(len(table.radii)))
        print(f"k={r['k']:5d} h={r['h']:.3e} err={errs} stderr={r['stderr']:.1e} {r['seconds']:.2f}s")
    print(f"slope {table.slope['slope']:.3f}  final {table.final_error():.3e}  tol {table.tolerance:.1e}  {table.verdict}")
    print("wrote " + ", ".join(paths))
    return EXIT_PASS if table.verdict == "pass" else EXIT_FAIL


def _cmd_conditions(args):
    if os.path.exists(args.config):
        with open(args.config) as fh:
            try:
                block = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(str(exc)) from exc
    else:
        block = json.loads(args.config)
    reports = experiments.run_condition_suite(block)
    doc = {k: v.to_dict() for k, v in sorted(reports.items())}
    out_dir = args.out_dir or "results"
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "conditions.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    for k, v in sorted(reports.items()):
        print(f"{k:7s} {v.verdict}")
    print(f"wrote {path}")
    return EXIT_PASS if all(v.verdict == "pass" for v in reports.values()) else EXIT_FAIL


def _cmd_list(args):
    for name in experiments.REGISTRY:
        cfg = experiments.REGISTRY[name]
        print(f"{name:15s} measure={cfg['measure']['kind']} flow={cfg.get('flow', {'kind': 'identity'})['kind']} "
              f"reference={cfg['reference']['backend']}")
    return EXIT_PASS


def selftest_checks():
    """Cheap exact identities; returns a list of (name, ok)."""
    from .engine import GridSpec, TransitionConfig, chernoff_iterate, transition_apply
    from .flows import FlowFamily
    from .levy import LevyMeasureRepr, LevyTriplet, difference_quotient, generator_apply, testfunctions
    from .measures import MeasureFamily
    from .reference import compound_poisson_apply, heat_semigroup_apply

    f = testfunctions.bump([0.0], 2.0, 1)
    one = testfunctions.constant(1.0, 1)
    X = np.linspace(-3, 3, 13)[:, None]
    dirac = MeasureFamily.dirac_zero(1)
    ident = FlowFamily.identity(1)
    checks = []
    g = chernoff_iterate(dirac, ident, 0.1, 7, f, GridSpec([[-3, 3]], 13), TransitionConfig(mode="grid"))
    checks.append(("identity iterate returns f", np.array_equal(g.values, f.value(X))))
    checks.append(("dirac difference quotient is 0", np.all(difference_quotient(dirac, 0.3, f, X)[0] == 0)))
    checks.append(("heat at t=0 is f", np.array_equal(heat_semigroup_apply([0.0], [[1.0]], 0.0, f, X)[0], f.value(X))))
    checks.append(("heat of 1 is 1", abs(heat_semigroup_apply([0.0], [[1.0]], 0.7, one, 0.3).value - 1) < 1e-15))
    checks.append(("poisson rate 0 is a shift",
                   np.array_equal(compound_poisson_apply(0.0, [[1.0]], None, [0.5], 1.0, f, X)[0], f.value(X + 0.5))))
    cp1 = compound_poisson_apply(2.0, [[1.0]], None, None, 1.0, one, 0.0).value
    checks.append(("poisson of 1 is 1", abs(cp1 - 1) < 1e-14))
    drift = LevyTriplet(np.array([1.0]), np.zeros((1, 1)), LevyMeasureRepr.none(1))
    checks.append(("pure drift generator is f'", abs(generator_apply(drift, f, 0.4) - f.grad(np.array([[0.4]]))[0, 0]) < 1e-15))
    val = transition_apply(MeasureFamily.brownian(), ident, 0.2, one, 0.1, TransitionConfig(mode="grid")).value
    checks.append(("transition of 1 is 1", abs(val - 1) < 1e-15))
    return checks


def _cmd_selftest(args):
    checks = selftest_checks()
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    table = experiments.run_experiment(experiments.registry_config("identity"))
    ok = all(r["err_r1"] == 0 and r["err_r2"] == 0 for r in table.rows)
    print(f"{'PASS' if ok else 'FAIL'} identity experiment has zero error")
    return EXIT_PASS if ok and all(c for _, c in checks) else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="chernoff-mehler", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--jobs", type=int, default=1, help="worker cap for particle mode")
    p.add_argument("--out-dir", default=None, help="output directory")
    p.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply configured tolerances")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run an experiment (config path or registry name)")
    r.add_argument("config")
    c = sub.add_parser("conditions", help="condition suite for a JSON block with measure and/or flow")
    c.add_argument("config")
    sub.add_parser("list", help="list registry experiments")
    sub.add_parser("selftest", help="run the exact identity checks")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "conditions": _cmd_conditions, "list": _cmd_list, "selftest": _cmd_selftest}
    try:
        return handlers[args.verb](args)
    except (ConfigError, DomainError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SolverError, QuadratureError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
