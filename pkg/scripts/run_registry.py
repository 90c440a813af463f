"""Run every built-in experiment and write CSV/JSON tables to results/.

    python scripts/run_registry.py [--only clt heat] [--out-dir results]
"""
import argparse
import time

from chernoff_mehler.experiments import REGISTRY, emit, registry_config, run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--only", nargs="*", default=sorted(REGISTRY))
    p.add_argument("--out-dir", default="results")
    args = p.parse_args()
    for name in args.only:
        start = time.perf_counter()
        table = run_experiment(registry_config(name))
        emit(table, args.out_dir)
        print(f"{name:15s} final {table.final_error():.3e}  slope {table.slope['slope']:6.3f}  "
              f"tol {table.tolerance:.0e}  {table.verdict}  {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
