"""Condition verdicts for a few measure/flow pairs, including the three-atom family."""
import json

from chernoff_mehler.experiments import run_condition_suite

CASES = {
    "three_atom": {"measure": {"kind": "three_atom_counterexample"}},
    "brownian_rk4": {"measure": {"kind": "brownian"}, "flow": {"kind": "runge_kutta", "A": [[-1.0]], "tableau": "rk4"}},
    "dirac_identity": {"measure": {"kind": "dirac_zero"}, "flow": {"kind": "identity"}},
    "rademacher_euler_sin": {"measure": {"kind": "scaled_iid", "base": "rademacher"},
                             "flow": {"kind": "euler", "field": {"name": "neg_sin"}}},
}


def main():
    for name, block in CASES.items():
        reports = run_condition_suite(block)
        verdicts = {k: v.verdict for k, v in sorted(reports.items())}
        print(f"{name:22s} {json.dumps(verdicts)}")


if __name__ == "__main__":
    main()
