"""Coupled Euler paths of dX = -X dt + dY: contraction bound and two continuity bounds.

The continuity bound with |t F(x) + Y_t| on the right fails whenever the noise
path returns to -t F(x) while X_t != x; the running-sup version holds.
"""
from chernoff_mehler.measures import MeasureFamily
from chernoff_mehler.reference import SdeSpec, pathwise_contraction_check


def main():
    noises = {"brownian": MeasureFamily.brownian(), "cpoisson": MeasureFamily.compound_poisson(1.0, [[1.0], [-0.5]])}
    for name, noise in noises.items():
        for m in (2 ** 8, 2 ** 12):
            spec = SdeSpec(lambda X: -X, 1.0, noise, T=1.0, m=m, N=1000)
            r = pathwise_contraction_check(spec, 0.5, 0.1)
            print(f"{name:9s} m={m:5d} contraction {r.contraction_violations:6d} (worst {r.contraction_worst:+.2e})  "
                  f"continuity {r.continuity_violations:6d} (worst {r.continuity_worst:+.2e})  "
                  f"running-sup {r.continuity_sup_violations:6d} (worst {r.continuity_sup_worst:+.2e})")


if __name__ == "__main__":
    main()
