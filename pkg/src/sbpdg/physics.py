"""Conservation laws: linear advection and the 2D compressible Euler equations.

States are stored component-first: u[e, ...] for equation e, so a flux
returns an array f[m, e, ...] for spatial direction m. Normals carry their
direction index first as well, n[m, ...].
"""
from dataclasses import dataclass
from math import cos, exp, pi, sin, sqrt

import numpy as np
from numba import njit


class AdmissibilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class AdvectionLaw:
    a: tuple = (1.0, 1.0)
    n_eq = 1

    @property
    def speed(self):
        return float(np.hypot(*self.a))

    def flux(self, u):
        u = np.asarray(u)
        return np.stack([self.a[0] * u, self.a[1] * u])

    def normal_speed(self, n):
        return self.a[0] * n[0] + self.a[1] * n[1]

    def contravariant_flux(self, u, G):
        """sum_n G[m, n] f^(n)(u) for a metric G[m, n, ...]."""
        b = G[:, 0] * self.a[0] + G[:, 1] * self.a[1]
        return b[:, None] * u[None]

    def numerical_flux(self, um, up, n, lam=1.0):
        an = self.normal_speed(n)
        return 0.5 * an * (um + up) - 0.5 * lam * np.abs(an) * (up - um)


def advection_numerical_flux(um, up, n, a, lam=1.0):
    return AdvectionLaw(tuple(a)).numerical_flux(um, up, n, lam)


@dataclass(frozen=True)
class EulerLaw:
    r: float = 1.4
    n_eq = 4

    def pressure(self, u):
        rho, m1, m2, e = u
        return (self.r - 1) * (e - 0.5 * (m1 * m1 + m2 * m2) / rho)

    def check_admissible(self, u, where="state"):
        rho = u[0]
        p = self.pressure(u)
        bad = ~((rho > 0) & (p > 0))
        if np.any(bad):
            loc = tuple(int(i) for i in np.argwhere(bad)[0])
            raise AdmissibilityError(f"inadmissible {where} at index {loc}: "
                                     f"rho={rho[loc]:.6g}, p={p[loc]:.6g}")

    def flux(self, u):
        u = np.asarray(u, dtype=float)
        shape = u.shape[1:]
        out = np.empty((2, 4) + shape)
        _euler_flux_kernel(u.reshape(4, -1), self.r, out.reshape(2, 4, -1))
        return out

    def contravariant_flux(self, u, G):
        """sum_n G[m, n] f^(n)(u) for a metric G[m, n, ...] sharing u's trailing shape
        (or broadcasting over a leading batch axis of u)."""
        u = np.asarray(u, dtype=float)
        shape = u.shape[1:]
        G = np.broadcast_to(G, (2, 2) + shape)
        out = np.empty((2, 4) + shape)
        _euler_contravariant_kernel(u.reshape(4, -1), np.ascontiguousarray(G).reshape(2, 2, -1),
                                    self.r, out.reshape(2, 4, -1))
        return out

    def normal_flux(self, u, n):
        f = self.flux(u)
        return f[0] * n[0] + f[1] * n[1]

    def roe_flux(self, um, up, n):
        """Roe's approximate Riemann solver, no entropy fix."""
        um, up, n = (np.asarray(a, dtype=float) for a in (um, up, n))
        shape = np.broadcast_shapes(um.shape[1:], up.shape[1:], n.shape[1:])
        if not (um.shape[1:] == up.shape[1:] == n.shape[1:] == shape):
            um = np.broadcast_to(um, (4,) + shape)
            up = np.broadcast_to(up, (4,) + shape)
            n = np.broadcast_to(n, (2,) + shape)
        um, up, n = um.reshape(4, -1), up.reshape(4, -1), n.reshape(2, -1)
        out = np.empty((4, um.shape[1]))
        _roe_kernel(um, up, n, self.r, out)
        return out.reshape((4,) + shape)

    def numerical_flux(self, um, up, n, lam=None):
        return self.roe_flux(um, up, n)


@njit(cache=True)
def _euler_flux_kernel(u, g, out):
    for i in range(u.shape[1]):
        rho, m1, m2, e = u[0, i], u[1, i], u[2, i], u[3, i]
        v1, v2 = m1 / rho, m2 / rho
        p = (g - 1) * (e - 0.5 * (m1 * v1 + m2 * v2))
        out[0, 0, i] = m1
        out[0, 1, i] = m1 * v1 + p
        out[0, 2, i] = m2 * v1
        out[0, 3, i] = (e + p) * v1
        out[1, 0, i] = m2
        out[1, 1, i] = m1 * v2
        out[1, 2, i] = m2 * v2 + p
        out[1, 3, i] = (e + p) * v2


@njit(cache=True)
def _euler_contravariant_kernel(u, G, g, out):
    for i in range(u.shape[1]):
        rho, m1, m2, e = u[0, i], u[1, i], u[2, i], u[3, i]
        p = (g - 1) * (e - 0.5 * (m1 * m1 + m2 * m2) / rho)
        for m in range(2):
            # contravariant velocity component
            w = (G[m, 0, i] * m1 + G[m, 1, i] * m2) / rho
            out[m, 0, i] = rho * w
            out[m, 1, i] = m1 * w + G[m, 0, i] * p
            out[m, 2, i] = m2 * w + G[m, 1, i] * p
            out[m, 3, i] = (e + p) * w


@njit(cache=True)
def _roe_kernel(um, up, n, g, out):
    for i in range(um.shape[1]):
        n1, n2 = n[0, i], n[1, i]
        rl, rr = um[0, i], up[0, i]
        ul, vl = um[1, i] / rl, um[2, i] / rl
        ur, vr = up[1, i] / rr, up[2, i] / rr
        pl = (g - 1) * (um[3, i] - 0.5 * rl * (ul * ul + vl * vl))
        pr = (g - 1) * (up[3, i] - 0.5 * rr * (ur * ur + vr * vr))
        hl = (um[3, i] + pl) / rl
        hr = (up[3, i] + pr) / rr
        qnl = ul * n1 + vl * n2
        qnr = ur * n1 + vr * n2

        # Roe averages
        sl, sr = np.sqrt(rl), np.sqrt(rr)
        wl = sl / (sl + sr)
        wr = 1.0 - wl
        rho = sl * sr
        u = wl * ul + wr * ur
        v = wl * vl + wr * vr
        H = wl * hl + wr * hr
        q2 = u * u + v * v
        c = np.sqrt((g - 1) * (H - 0.5 * q2))
        qn = u * n1 + v * n2

        drho = rr - rl
        dp = pr - pl
        dqn = qnr - qnl
        # shear part of the velocity jump
        dut = ur - ul - dqn * n1
        dvt = vr - vl - dqn * n2

        # wave strengths times |eigenvalue|
        a1 = abs(qn - c) * (dp - rho * c * dqn) / (2 * c * c)
        a2 = abs(qn) * (drho - dp / (c * c))
        a3 = abs(qn) * rho
        a4 = abs(qn + c) * (dp + rho * c * dqn) / (2 * c * c)

        d0 = a1 + a2 + a4
        d1 = a1 * (u - c * n1) + a2 * u + a3 * dut + a4 * (u + c * n1)
        d2 = a1 * (v - c * n2) + a2 * v + a3 * dvt + a4 * (v + c * n2)
        d3 = (a1 * (H - qn * c) + a2 * 0.5 * q2 + a3 * (u * dut + v * dvt)
              + a4 * (H + qn * c))

        out[0, i] = 0.5 * (rl * qnl + rr * qnr - d0)
        out[1, i] = 0.5 * (um[1, i] * qnl + pl * n1 + up[1, i] * qnr + pr * n1 - d1)
        out[2, i] = 0.5 * (um[2, i] * qnl + pl * n2 + up[2, i] * qnr + pr * n2 - d2)
        out[3, i] = 0.5 * ((um[3, i] + pl) * qnl + (up[3, i] + pr) * qnr - d3)


def roe_flux(um, up, n, r=1.4):
    return EulerLaw(r).roe_flux(np.asarray(um, float), np.asarray(up, float), np.asarray(n, float))


@dataclass(frozen=True)
class VortexParams:
    mach: float = 0.4
    theta: float = pi / 4
    strength: float = 5 * sqrt(2) * exp(0.5) / (4 * pi)
    center: tuple = (5.0, 5.0)
    L: float = 10.0
    r: float = 1.4

    @property
    def period(self):
        """Time for the background flow to cross the domain diagonally once."""
        return sqrt(2) * self.L / self.mach


def vortex_initial_condition(x, params: VortexParams = VortexParams()):
    """Conserved variables of the isentropic vortex at points x[..., 2]; result (4, ...)."""
    if params.strength <= 0 or params.mach < 0:
        raise ValueError("vortex needs strength > 0 and Mach number >= 0")
    r = params.r
    dx = x[..., 0] - params.center[0]
    dy = x[..., 1] - params.center[1]
    g = np.exp(1 - (dx * dx + dy * dy))
    ma, eps = params.mach, params.strength
    v1 = ma * (cos(params.theta) - eps * g * dy)
    v2 = ma * (sin(params.theta) + eps * g * dx)
    temp = 1 - 0.5 * (r - 1) * eps ** 2 * ma ** 2 * g
    if np.any(temp <= 0):
        raise ValueError("vortex too strong: nonpositive temperature")
    rho = temp ** (1 / (r - 1))
    e = temp ** (r / (r - 1)) / (r - 1) + 0.5 * rho * (v1 * v1 + v2 * v2)
    return np.stack([rho, rho * v1, rho * v2, e])
