"""Run the advection matrix (p = 2, 3, 4) and print the tables with the
reference energy decay next to ours."""
import argparse
import logging

from sbpdg import checks
from sbpdg.cli import config_from_mapping, run_experiments


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--out", default="results/advection")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    run = config_from_mapping({"problem": "advection", "matrix": {"p": args.p},
                               "output": {"dir": args.out}})
    outcome = run_experiments(run, check=True)
    hdr = f"{'p':>2} {'variant':<13}{'c':<7}{'lam':>4} {'equiv':>10} {'cons(s)':>10} " \
          f"{'cons(w)':>10} {'dE(s)':>11} {'dE(w)':>11} {'reference':>11}"
    print(hdr)
    for r in outcome.records:
        ref = checks.REFERENCE_ENERGY.get((r.p, r.variant, r.c)) if r.label == "1" else None
        if not r.stable:
            print(f"{r.p:>2} {r.variant:<13}{r.c:<7}{r.label:>4}  UNSTABLE (step {r.failed_step_strong})")
            continue
        print(f"{r.p:>2} {r.variant:<13}{r.c:<7}{r.label:>4} {r.equivalence:10.2e} "
              f"{r.conservation_strong:10.2e} {r.conservation_weak:10.2e} "
              f"{r.energy_strong:11.4e} {r.energy_weak:11.4e} "
              f"{'' if ref is None else f'{ref:11.4e}'}")
    failed = [c for c in outcome.checks if not c.passed]
    print(f"\n{len(outcome.checks) - len(failed)}/{len(outcome.checks)} checks pass")
    for c in failed:
        print(c.line())
    print("tables:", ", ".join(outcome.tables))


if __name__ == "__main__":
    main()
