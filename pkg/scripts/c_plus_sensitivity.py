"""Energy decay over one period against the VCJH parameter c, for the
advection setup with upwinding. Prints where the reference decay for c_plus
would be reached and the RK4 stability boundary of the semi-discrete
operator in c."""
import argparse

import numpy as np
from scipy.optimize import brentq

from sbpdg import checks
from sbpdg.diagnostics import energy_norm_squared
from sbpdg.operators import C_PLUS, build_operators
from sbpdg.solver import SchemeConfig, build_discretization, build_mesh, run_scheme, time_step_size


def energy_change(p, variant, c, mesh):
    cfg = SchemeConfig.defaults("advection", p=p, variant=variant, c=float(c))
    disc = build_discretization(cfg, ops=build_operators(variant, p, float(c)), mesh=mesh)
    disc, u0, res = run_scheme(cfg, disc)
    if not res.stable:
        return np.nan
    return energy_norm_squared(res.state.u, disc) - energy_norm_squared(u0.u, disc)


def rk4_amplification(p, variant, c, mesh):
    """Largest |R(dt * eig)| of the RK4 stability polynomial."""
    cfg = SchemeConfig.defaults("advection", p=p, variant=variant, c=float(c))
    disc = build_discretization(cfg, ops=build_operators(variant, p, float(c)), mesh=mesh)
    dt, _ = time_step_size(cfg.T, cfg.L / cfg.M, cfg.speed, p, cfg.beta)
    z = dt * np.linalg.eigvals(disc.linear_operator())
    return np.abs(1 + z + z ** 2 / 2 + z ** 3 / 6 + z ** 4 / 24).max()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=2)
    ap.add_argument("--variant", default="QuadratureI")
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()
    p, variant = args.p, args.variant
    mesh = build_mesh(SchemeConfig.defaults("advection", p=p))
    cp = C_PLUS[p]
    print(f"p={p} {variant}: c_plus = {cp:g}")
    grid = cp * np.geomspace(0.25, 16, args.points)
    for c in np.concatenate([[0.0], grid]):
        print(f"  c = {c:10.4e} ({c / cp:6.2f} c_plus)  dE = {energy_change(p, variant, c, mesh):.5e}"
              f"  max|R| - 1 = {rk4_amplification(p, variant, c, mesh) - 1:.2e}")
    ref = checks.REFERENCE_ENERGY.get((p, variant, "c_plus"))
    if ref is None:
        return
    f = lambda c: energy_change(p, variant, c, mesh) - ref
    lo, hi = cp, cp
    while f(hi) > 0 and hi < 1e3 * cp:
        hi *= 2
    if f(hi) <= 0:
        c_star = brentq(f, lo if f(lo) > 0 else 0.0, hi, xtol=1e-4 * cp)
        print(f"reference decay {ref:.4e} is reached at c = {c_star:.4e} = {c_star / cp:.3f} c_plus")
    else:
        print(f"reference decay {ref:.4e} is not reached below c = {hi:.3e}")


if __name__ == "__main__":
    main()
