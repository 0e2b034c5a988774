"""Isentropic vortex: strong vs weak form per equation. Runs the reduced case
(M = 8, p = 2, p_map = 2) unless --full is given."""
import argparse
import logging

from sbpdg.cli import config_from_mapping, run_experiments


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--full", action="store_true", help="M = 16, p = 2, 3, 4 (tens of minutes)")
    ap.add_argument("--out", default="results/euler")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    run = config_from_mapping({"problem": "euler", "output": {"dir": args.out}})
    outcome = run_experiments(run, check=True, full=args.full)
    print(f"{'p':>2} {'variant':<13}{'c':<7}{'eq':<7} {'equiv':>10} {'cons(s)':>10} {'cons(w)':>10}")
    for r in outcome.records:
        if not r.stable:
            print(f"{r.p:>2} {r.variant:<13}{r.c:<7}{r.label:<7} UNSTABLE")
            continue
        print(f"{r.p:>2} {r.variant:<13}{r.c:<7}{r.label:<7} {r.equivalence:10.2e} "
              f"{r.conservation_strong:10.2e} {r.conservation_weak:10.2e}")
    n_ok = sum(c.passed for c in outcome.checks)
    print(f"\n{n_ok}/{len(outcome.checks)} checks pass")
    for c in outcome.checks:
        if not c.passed:
            print(c.line())


if __name__ == "__main__":
    main()
