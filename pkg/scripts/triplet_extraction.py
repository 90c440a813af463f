"""Recover (b, sigma, nu, c) from increment families; the three-atom family shows killing."""
import numpy as np

from chernoff_mehler.levy import estimate_triplet
from chernoff_mehler.measures import MeasureFamily

LADDER = [2.0 ** -j for j in range(4, 13)]
FAMILIES = {
    "brownian": MeasureFamily.brownian(),
    "compound poisson at 2": MeasureFamily.compound_poisson(1.0, [[2.0]]),
    "gauss + jumps": MeasureFamily.levy_increment(drift=0.3, cov=0.5, rate=2.0, jumps=[[-1.5], [0.7], [2.0]],
                                                  jump_weights=[0.2, 0.5, 0.3]),
    "three atom": MeasureFamily.three_atom_counterexample(),
}


def main():
    np.set_printoptions(precision=4, suppress=True)
    for name, fam in FAMILIES.items():
        est = estimate_triplet(fam, LADDER)
        T = est.triplet
        print(f"{name:22s} b={T.b} sigma={T.sigma.ravel()} nu mass={T.nu.intensity:.4f} c={T.killing_c:.4f} "
              f"[{est.verdict}]")


if __name__ == "__main__":
    main()
