"""Semi-discrete residual forms on a periodic triangular mesh, initial
projection, and classical RK4 time marching."""
from dataclasses import dataclass, field, replace
from math import ceil, cos, pi, sin, sqrt
from typing import Callable, Optional

import numpy as np

from .mesh import (Mesh, geometric_factors, periodic_connectivity, split_cartesian_mesh,
                   warp_mesh)
from .operators import ReferenceOperators, build_operators, resolve_c
from .physics import AdvectionLaw, EulerLaw, VortexParams, vortex_initial_condition
from .refelem import REF

FORMS = ("strong_fr", "strong_dg", "weak_dg", "weak_filtered", "weak_zwanenburg")
DG_ONLY = ("strong_dg", "weak_dg")


@dataclass(frozen=True)
class SchemeConfig:
    problem: str = "advection"
    p: int = 2
    M: int = 8
    p_map: int = 1
    variant: str = "QuadratureI"
    c: object = "c_DG"
    lam: float = 1.0
    form: str = "strong_fr"
    T: float = 1.0
    beta: float = 2.5e-3
    L: float = 1.0
    split: str = "alternating"
    # advection
    speed: float = sqrt(2)
    angle: float = pi / 4
    # euler
    mach: float = 0.4
    theta: float = pi / 4
    r: float = 1.4

    @classmethod
    def defaults(cls, problem, **kw):
        if problem == "advection":
            base = dict(L=1.0, T=1.0, M=8, p_map=1)
        elif problem == "euler":
            L = kw.get("L", 10.0)
            mach = kw.get("mach", 0.4)
            base = dict(L=L, M=16, T=sqrt(2) * L / mach)
            if "p_map" not in kw:
                base["p_map"] = kw.get("p", cls.p)
        else:
            raise ValueError(f"unknown problem {problem!r}")
        base.update(kw)
        return cls(problem=problem, **base).validated()

    @property
    def c_value(self):
        return resolve_c(self.c, self.p)

    def validated(self):
        if self.problem not in ("advection", "euler"):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.form not in FORMS:
            raise ValueError(f"unknown residual form {self.form!r}")
        if self.form in DG_ONLY and self.c_value != 0:
            raise ValueError(f"form {self.form} requires c = 0 (got c = {self.c})")
        if not 0 <= self.lam <= 1:
            raise ValueError("lambda must lie in [0, 1]")
        if self.p < 0 or self.M < 1 or self.p_map < 1:
            raise ValueError("need p >= 0, M >= 1, p_map >= 1")
        if self.T <= 0 or self.beta <= 0 or self.L <= 0:
            raise ValueError("T, beta and L must be positive")
        return self

    def law(self):
        if self.problem == "advection":
            return AdvectionLaw((self.speed * cos(self.angle), self.speed * sin(self.angle)))
        return EulerLaw(self.r)

    def wave_speed(self):
        return self.speed if self.problem == "advection" else self.mach

    def vortex(self):
        return VortexParams(mach=self.mach, theta=self.theta, center=(self.L / 2, self.L / 2),
                            L=self.L, r=self.r)


@dataclass
class SolutionState:
    t: float
    u: np.ndarray    # (N_eq, K, N_p)

    def copy(self):
        return SolutionState(self.t, self.u.copy())


@dataclass
class RunResult:
    state: SolutionState
    stable: bool
    steps: int                  # steps completed
    failed_step: Optional[int] = None


class Discretization:
    """Everything needed to evaluate one residual form on one mesh."""

    def __init__(self, law, ops: ReferenceOperators, mesh: Mesh, form="strong_fr", lam=1.0):
        if form not in FORMS:
            raise ValueError(f"unknown residual form {form!r}")
        if form in DG_ONLY and ops.c != 0:
            raise ValueError(f"form {form} requires c = 0")
        self.law, self.ops, self.mesh, self.form, self.lam = law, ops, mesh, form, lam
        self.geo = geo = geometric_factors(mesh, ops.ip.nodes, ops.ip.facet_nodes)
        self.conn = periodic_connectivity(mesh, geo.x_facet)
        K, ng = mesh.K, len(ops.ip.facet_params)
        self.K, self.ng = K, ng
        nhat = REF.normals

        self.gather = self.conn.gather_index().reshape(K, 3 * ng)
        self.Vf = np.vstack(ops.Vf)                                      # (3ng, Np)
        self.nhat = np.repeat(nhat, ng, axis=0).T                       # (2, 3ng)
        self.normals = np.ascontiguousarray(np.moveaxis(geo.normals.reshape(K, 3 * ng, 2), -1, 0))
        self.J_facet = geo.J_facet.reshape(K, 3 * ng)
        self.metric = np.ascontiguousarray(np.moveaxis(geo.metric, (2, 3), (0, 1)))  # (2, 2, K, N)

        V, W, P, M = ops.V, ops.W, ops.P, ops.M
        VfW = np.hstack([v.T @ w for v, w in zip(ops.Vf, ops.Wf)])     # (Np, 3ng)
        self.surf = VfW
        self.vol_weak = np.stack([ops.D[m].T @ V.T @ W for m in range(2)])   # D^T V^T W
        self.vol_strong_dg = np.stack([M @ ops.D[m] for m in range(2)])
        self.lift = np.hstack(ops.L)
        self.surf_zw = ops.F.T @ VfW
        I = np.eye(ops.n_modes)
        self.zw_extra = np.stack([
            sum(nhat[f, m] * (I - ops.F.T) @ ops.Vf[f].T @ ops.Wf[f] @ ops.Vf[f] for f in range(3))
            for m in range(2)])

        J = geo.J
        self.affine = bool(np.all(np.abs(J - J[:, :1]) <= 1e-13 * np.abs(J[:, :1])))
        self.Mk = np.einsum("qi,qr,kr,rj->kij", V, W, J, V, optimize=True)
        self.Mk_inv = np.linalg.inv(self.Mk)
        self.Pk = self.Mk_inv @ (V.T @ W)[None] * J[:, None, :]
        lead = self._leading_matrices()
        if self.affine:
            # shared reference matrix scaled by 1/J per element
            self.lead0 = lead[0] * J[0, 0]
            self.inv_J = 1.0 / J[:, 0]
            self.lead = None
        else:
            self.lead = lead
        self.cons_weights = np.einsum("q,qr,kr,ri->ki", np.ones(len(W)), W, J, V)

    def _leading_matrices(self):
        ops = self.ops
        if self.form in ("weak_dg", "strong_dg", "weak_zwanenburg"):
            return self.Mk_inv
        if self.form == "strong_fr":
            return self.Mk_inv @ ops.M
        # weak_filtered: F^(k) (M^(k))^-1 with F^(k) = (P J V)^-1 F (P J V)
        PJV = ops.Minv @ self.Mk
        Fk = np.linalg.solve(PJV, ops.F @ PJV)
        return Fk @ self.Mk_inv

    # ------------------------------------------------------------------
    @property
    def n_eq(self):
        return self.law.n_eq

    def transformed_flux(self, U):
        """Contravariant flux J (dX/dxhat)^-1 f at the volume nodes, (2, N_eq, K, N)."""
        return self.law.contravariant_flux(U, self.metric)

    def facet_flux(self, u):
        """J^(k,g) times the numerical flux at every facet node, (N_eq, K, 3 N_g)."""
        Uf = u @ self.Vf.T
        Ue = np.take(Uf.reshape(Uf.shape[0], -1), self.gather, axis=1)
        return self.J_facet * self.law.numerical_flux(Uf, Ue, self.normals, self.lam)

    def residual(self, u):
        ops = self.ops
        fh = self.transformed_flux(u @ ops.V.T)
        form = self.form
        # volume terms
        if form.startswith("weak"):
            R = fh[0] @ self.vol_weak[0].T + fh[1] @ self.vol_weak[1].T
        else:
            Pf = fh @ ops.P.T                          # projected flux coefficients
            if form == "strong_dg":
                R = -(Pf[0] @ self.vol_strong_dg[0].T + Pf[1] @ self.vol_strong_dg[1].T)
            else:
                R = -(Pf[0] @ ops.D[0].T + Pf[1] @ ops.D[1].T)
            fn = (Pf[0] @ self.Vf.T) * self.nhat[0] + (Pf[1] @ self.Vf.T) * self.nhat[1]
        if form == "weak_zwanenburg":
            Pf = fh @ ops.P.T
            R = R - (Pf[0] @ self.zw_extra[0].T + Pf[1] @ self.zw_extra[1].T)
        # facet terms
        fstar = self.facet_flux(u)
        if form in ("weak_dg", "weak_filtered"):
            R = R - fstar @ self.surf.T
        elif form == "weak_zwanenburg":
            R = R - fstar @ self.surf_zw.T
        elif form == "strong_dg":
            R = R - (fstar - fn) @ self.surf.T
        else:
            R = R - (fstar - fn) @ self.lift.T
        return self.apply_leading(R)

    def apply_leading(self, R):
        if self.lead is None:
            return (R @ self.lead0.T) * self.inv_J[:, None]
        return np.matmul(self.lead, R.transpose(1, 2, 0)).transpose(2, 0, 1)

    # ------------------------------------------------------------------
    def project(self, func):
        """Coefficients of the discrete projection of func(x) -> (N_eq, K, N)."""
        vals = np.asarray(func(self.geo.x))
        if vals.ndim == 2:
            vals = vals[None]
        u = np.einsum("kij,ekj->eki", self.Pk, vals)
        if isinstance(self.law, EulerLaw):
            self.check_admissible(u, "projected initial state")
        return u

    def init_projection(self, func) -> SolutionState:
        return SolutionState(0.0, self.project(func))

    def check_admissible(self, u, where="state"):
        if isinstance(self.law, EulerLaw):
            self.law.check_admissible(u @ self.ops.V.T, f"{where} (volume nodes)")
            self.law.check_admissible(u @ self.Vf.T, f"{where} (facet nodes)")

    def conservation(self, u):
        """Discrete integral of every component, sum_k 1^T W J V u."""
        return np.einsum("ki,eki->e", self.cons_weights, u)

    def linear_operator(self, batch=256):
        """Dense matrix of the residual; valid only for linear laws."""
        if not isinstance(self.law, AdvectionLaw):
            raise TypeError("the residual is only linear for advection")
        n = self.K * self.ops.n_modes
        A = np.empty((n, n))
        for start in range(0, n, batch):
            cols = np.arange(start, min(n, start + batch))
            e = np.zeros((len(cols), n))
            e[np.arange(len(cols)), cols] = 1.0
            A[:, cols] = self.residual(e.reshape(len(cols), self.K, -1)).reshape(len(cols), n).T
        return A


def time_step_size(T, h, a, p, beta=2.5e-3):
    """Largest step <= beta/(2p+1) h/a dividing T into a whole number of steps."""
    target = beta / (2 * p + 1) * h / a
    steps = max(1, ceil(T / target * (1 - 1e-12)))
    return T / steps, steps


def _blown_up(u, limit):
    m = np.max(np.abs(u))
    return not np.isfinite(m) or m > limit


def rk4_advance(state: SolutionState, residual: Callable, dt, steps, hook=None,
                guard=True) -> RunResult:
    """Classical four-stage Runge-Kutta; hook(step, state) runs after each step."""
    u = state.u.copy()
    limit = 1e6 * (np.max(np.abs(u)) + 1)
    for n in range(1, steps + 1):
        k1 = residual(u)
        k2 = residual(u + 0.5 * dt * k1)
        k3 = residual(u + 0.5 * dt * k2)
        k4 = residual(u + dt * k3)
        u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if guard and _blown_up(u, limit):
            return RunResult(SolutionState(state.t + n * dt, u), False, n - 1, n)
        if hook is not None:
            hook(n, SolutionState(state.t + n * dt, u))
    return RunResult(SolutionState(state.t + steps * dt, u), True, steps)


def rk4_propagator(A, dt):
    """One classical RK4 step for du/dt = A u as a matrix."""
    hA = dt * A
    n = len(A)
    G = np.eye(n) + hA / 4
    G = np.eye(n) + hA @ G / 3
    G = np.eye(n) + hA @ G / 2
    return np.eye(n) + hA @ G


def rk4_advance_linear(state: SolutionState, A, dt, steps, chunk=64, hook=None,
                       guard=True) -> RunResult:
    """RK4 for a linear residual du/dt = A u given as a dense matrix.

    Steps are taken `chunk` at a time with a precomputed power of the RK4
    step matrix; the blow-up guard is checked after each chunk and a
    tripped chunk is replayed one step at a time to locate the failure."""
    shape = state.u.shape
    u = state.u.reshape(-1).copy()
    limit = 1e6 * (np.max(np.abs(u)) + 1)
    G = rk4_propagator(A, dt)
    if hook is not None:
        chunk = 1
    chunk = max(1, min(chunk, steps))
    Gc = G
    size = 1
    while size * 2 <= chunk:
        Gc = Gc @ Gc
        size *= 2
    done = 0
    while done < steps:
        if steps - done >= size:
            v, n = Gc @ u, size
        else:
            v, n = G @ u, 1
        if guard and _blown_up(v, limit):
            for k in range(1, n + 1):
                u = G @ u
                if _blown_up(u, limit):
                    t = state.t + (done + k) * dt
                    return RunResult(SolutionState(t, u.reshape(shape)), False, done + k - 1,
                                     done + k)
            raise RuntimeError("blow-up guard tripped on the chunk but not on single steps")
        u = v
        done += n
        if hook is not None:
            hook(done, SolutionState(state.t + done * dt, u.reshape(shape)))
    return RunResult(SolutionState(state.t + steps * dt, u.reshape(shape)), True, steps)


# ---------------------------------------------------------------------------
# assembling a run from a configuration


def build_mesh(cfg: SchemeConfig) -> Mesh:
    return warp_mesh(split_cartesian_mesh(cfg.M, cfg.L, cfg.split), cfg.p_map)


def build_discretization(cfg: SchemeConfig, ops=None, mesh=None) -> Discretization:
    ops = ops if ops is not None else build_operators(cfg.variant, cfg.p, cfg.c_value)
    mesh = mesh if mesh is not None else build_mesh(cfg)
    return Discretization(cfg.law(), ops, mesh, cfg.form, cfg.lam)


def initial_condition(cfg: SchemeConfig):
    if cfg.problem == "advection":
        L = cfg.L
        return lambda x: (np.sin(2 * pi * x[..., 0] / L) * np.sin(2 * pi * x[..., 1] / L))[None]
    params = cfg.vortex()
    return lambda x: vortex_initial_condition(x, params)


def run_scheme(cfg: SchemeConfig, disc: Discretization = None, hook=None) -> tuple:
    """Project the initial condition and march to T. Returns (disc, u0, result)."""
    disc = disc if disc is not None else build_discretization(cfg)
    state0 = disc.init_projection(initial_condition(cfg))
    dt, steps = time_step_size(cfg.T, cfg.L / cfg.M, cfg.wave_speed(), cfg.p, cfg.beta)
    if isinstance(disc.law, AdvectionLaw):
        res = rk4_advance_linear(state0, disc.linear_operator(), dt, steps, hook=hook)
    else:
        res = rk4_advance(state0, disc.residual, dt, steps, hook=hook)
    return disc, state0, res
