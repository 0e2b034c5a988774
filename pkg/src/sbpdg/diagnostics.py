"""Quantities of interest for the experiment tables: the L2 distance between
two discrete solutions, the conservation functional and the broken energy
norm, plus CSV output for tables and per-step histories."""
import csv
import os
from dataclasses import dataclass, field
from functools import lru_cache
from math import isnan, nan
from typing import Optional

import numpy as np

from .refelem import triangle_volume_rule


@lru_cache(maxsize=None)
def _fine_rule(p):
    return triangle_volume_rule(max(4 * p, 1))


def _fine_data(disc):
    """Basis values, weights and Jacobian at the nodes of a degree-4p rule."""
    cached = getattr(disc, "_l2_data", None)
    if cached is None:
        rule = _fine_rule(disc.ops.p)
        Vq = disc.ops.basis.eval(rule.nodes)
        jac = disc.mesh.jacobian(rule.nodes)
        J = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        cached = (Vq, rule.weights[None, :] * J)
        disc._l2_data = cached
    return cached


def l2_difference(u_a, u_b, disc):
    """sqrt(sum_k int (u_a - u_b)^2 J dxhat) per equation."""
    Vq, wJ = _fine_data(disc)
    d = (np.asarray(u_a) - np.asarray(u_b)) @ Vq.T
    return np.sqrt(np.einsum("kq,ekq->e", wJ, d * d))


def conservation_functional(u, disc):
    """sum_k 1^T W J V u per equation."""
    return disc.conservation(np.asarray(u))


def energy_norm_squared(u, disc):
    """sum_k u^T M^(k) (F^(k))^-1 u, which is sum_k J u^T (M + K) u on affine meshes."""
    if not disc.affine:
        raise ValueError("the energy norm is only defined here on affine meshes "
                         "(constant Jacobian per element)")
    A = disc.ops.M + disc.ops.K
    J = disc.geo.J[:, 0]
    u = np.asarray(u)
    return float(np.einsum("k,eki,ij,ekj->", J, u, A, u))


def energy_rate(u, dudt, disc):
    """d/dt of the energy along du/dt: 2 sum_k J u^T (M + K) du/dt."""
    if not disc.affine:
        raise ValueError("the energy rate needs an affine mesh")
    A = disc.ops.M + disc.ops.K
    return 2 * float(np.einsum("k,eki,ij,ekj->", disc.geo.J[:, 0], u, A, dudt))


def interface_dissipation(u, disc):
    """-lam sum over facet nodes of |a.n| W^g J^g (u_in - u_out)^2, summed over
    both sides of each interface so every interface is counted twice and halved."""
    law = disc.law
    Uf = u @ disc.Vf.T
    Ue = np.take(Uf.reshape(Uf.shape[0], -1), disc.gather, axis=1)
    jump = Uf - Ue
    an = np.abs(law.normal_speed(disc.normals))
    total = 0.0
    ng = disc.ng
    for f in range(3):
        s = slice(f * ng, (f + 1) * ng)
        Wf = disc.ops.Wf[f]
        dJ = jump[..., s] * (an[:, s] * disc.J_facet[:, s])
        total += np.einsum("eki,ij,ekj->", dJ, Wf, jump[..., s])
    return -disc.lam * 0.5 * total


# ---------------------------------------------------------------------------
# table records


@dataclass
class DiagnosticsRecord:
    problem: str
    p: int
    variant: str
    c: str
    label: str                      # lambda value (advection) or equation name (euler)
    equivalence: float = nan
    conservation_strong: float = nan
    conservation_weak: float = nan
    energy_strong: float = nan
    energy_weak: float = nan
    stable_strong: bool = True
    stable_weak: bool = True
    failed_step_strong: Optional[int] = None
    failed_step_weak: Optional[int] = None

    @property
    def stable(self):
        return self.stable_strong and self.stable_weak


COLUMNS = ("variant", "c", "label", "equivalence", "conservation_strong", "conservation_weak",
           "energy_strong", "energy_weak", "stable_strong", "stable_weak")

UNSTABLE = "UNSTABLE"


def _fmt(x):
    if x is None or (isinstance(x, float) and isnan(x)):
        return ""
    return repr(float(x))


def record_row(rec: DiagnosticsRecord):
    row = [rec.variant, rec.c, rec.label]
    if rec.stable:
        row.append(_fmt(rec.equivalence))
    else:
        row.append(UNSTABLE)
    for value, ok in ((rec.conservation_strong, rec.stable_strong),
                      (rec.conservation_weak, rec.stable_weak),
                      (rec.energy_strong, rec.stable_strong),
                      (rec.energy_weak, rec.stable_weak)):
        row.append(_fmt(value) if ok else UNSTABLE)
    row += [str(rec.stable_strong).lower(), str(rec.stable_weak).lower()]
    return row


def emit_tables(records, destination, tables=()):
    """Write one `<problem>_p<p>.csv` per (problem, p) present in `records`
    or listed in `tables`. Returns the written paths."""
    groups = {tuple(t): [] for t in tables}
    for rec in records:
        groups.setdefault((rec.problem, rec.p), []).append(rec)
    os.makedirs(destination, exist_ok=True)
    paths = []
    for (problem, p), recs in sorted(groups.items()):
        path = os.path.join(destination, f"{problem}_p{p}.csv")
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(COLUMNS)
                for rec in recs:
                    w.writerow(record_row(rec))
        except OSError as exc:
            raise OSError(f"could not write table {path}: {exc}") from exc
        paths.append(path)
    return paths


@dataclass
class StepLog:
    """Hook for the time integrators writing `step,t,energy,conservation_e*` rows.

    The energy column is left empty on curved meshes."""
    disc: object
    path: str
    every: int = 1
    _fh: object = field(default=None, repr=False)

    def __post_init__(self):
        os.makedirs(os.path.dirname(os.path.abspath(self.path)), exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        n_eq = self.disc.n_eq
        self._w.writerow(["step", "t", "energy"] + [f"conservation_e{e + 1}" for e in range(n_eq)])

    def __call__(self, step, state):
        if step % self.every:
            return
        energy = energy_norm_squared(state.u, self.disc) if self.disc.affine else nan
        cons = conservation_functional(state.u, self.disc)
        self._w.writerow([step, repr(state.t), _fmt(energy)] + [repr(float(c)) for c in cons])

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None
