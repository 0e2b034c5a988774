"""Reference-element operators: discrete inner products, mass, projection,
differentiation, VCJH correction, lifting and filter matrices, plus
executable checks of the summation-by-parts identities."""
import os
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .refelem import (REF, ConstructionError, NodalBasis, PKDBasis, QuadratureRule,
                      gauss_legendre_rule, gauss_lobatto_rule, num_modes,
                      triangle_volume_rule, warp_blend_nodes)

VARIANTS = ("QuadratureI", "QuadratureII", "Collocation")

# largest stable c found for the VCJH family on triangles, per degree
C_PLUS = {2: 4.3e-2, 3: 6.0e-4, 4: 5.6e-6}


def resolve_c(c, p):
    """Accept a number or one of the presets 'c_DG' / 'c_plus'."""
    if isinstance(c, str):
        if c == "c_DG":
            return 0.0
        if c == "c_plus":
            if p not in C_PLUS:
                raise ValueError(f"no c_plus preset for p={p}")
            return C_PLUS[p]
        raise ValueError(f"unknown c preset {c!r}")
    c = float(c)
    if c < 0:
        raise ValueError("only c >= 0 is supported")
    return c


def check_spd(A, name, tol=1e-12):
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ConstructionError(f"{name} is not symmetric")
    ev = np.linalg.eigvalsh(0.5 * (A + A.T))
    if ev[0] < tol * ev[-1] or ev[-1] <= 0:
        raise ConstructionError(f"{name} is not symmetric positive definite "
                                f"(eigenvalues in [{ev[0]:.3e}, {ev[-1]:.3e}])")


def spd_inverse(A, name="matrix"):
    check_spd(A, name)
    inv = cho_solve(cho_factor(A), np.eye(len(A)))
    return 0.5 * (inv + inv.T)


@dataclass(frozen=True)
class InnerProduct:
    variant: str
    p: int
    nodes: np.ndarray          # volume nodes S, (N, 2)
    W: np.ndarray              # (N, N)
    facet_params: np.ndarray   # facet parameters s in [-1,1], shared by all facets
    facet_nodes: tuple         # per facet (N_gamma, 2)
    W_facet: tuple             # per facet (N_gamma, N_gamma)


def _lagrange_1d(nodes, x):
    """Lagrange basis on `nodes` evaluated at `x`, shape (len(x), len(nodes))."""
    out = np.ones((len(x), len(nodes)))
    for j, xj in enumerate(nodes):
        for k, xk in enumerate(nodes):
            if k != j:
                out[:, j] *= (x - xk) / (xj - xk)
    return out


def build_inner_product(variant, p, volume_rule: QuadratureRule = None) -> InnerProduct:
    if variant not in VARIANTS:
        raise ValueError(f"unknown inner-product variant {variant!r}")
    half = REF.facet_lengths / 2
    if variant in ("QuadratureI", "QuadratureII"):
        rule = volume_rule if volume_rule is not None else triangle_volume_rule(2 * p)
        if rule.degree < 2 * p:
            raise ConstructionError(f"volume rule of degree {rule.degree} < 2p = {2 * p}")
        nodes, W = rule.nodes, np.diag(rule.weights)
        fr = gauss_legendre_rule(p + 1) if variant == "QuadratureI" else gauss_lobatto_rule(p + 1)
        s = fr.nodes
        Wf = tuple(np.diag(h * fr.weights) for h in half)
    else:
        nodes = warp_blend_nodes(p)
        nb = NodalBasis(p, nodes)
        rule = triangle_volume_rule(2 * p)
        Vq = nb.eval(rule.nodes)
        W = Vq.T @ (rule.weights[:, None] * Vq)
        s = gauss_lobatto_rule(p + 1).nodes
        g = gauss_legendre_rule(p + 1)  # degree 2p+1 covers products of degree-p traces
        Lq = _lagrange_1d(s, g.nodes)
        gram = Lq.T @ (g.weights[:, None] * Lq)
        Wf = tuple(h * gram for h in half)
    W = 0.5 * (W + W.T)
    check_spd(W, f"{variant} volume weight matrix W")
    for f, wf in enumerate(Wf):
        check_spd(wf, f"{variant} facet weight matrix W^{f}")
    fnodes = tuple(REF.facet_points(f, s) for f in range(3))
    return InnerProduct(variant, p, nodes, W, s, fnodes, Wf)


def mass_matrix(V, W):
    M = V.T @ W @ V
    M = 0.5 * (M + M.T)
    check_spd(M, "mass matrix M")
    return M


def physical_mass(V, W, J):
    """V^T W J V with J the Jacobian determinant at the volume nodes."""
    return V.T @ W @ (J[:, None] * V)


def projection_matrix(M, V, W):
    return np.linalg.solve(M, V.T @ W)


def modal_diff_matrices(p):
    """Exact differentiation matrices in the orthonormal PKD basis."""
    basis = PKDBasis(p)
    rule = triangle_volume_rule(2 * p)
    V = basis.eval(rule.nodes)
    G = basis.grad(rule.nodes)
    M0 = V.T @ (rule.weights[:, None] * V)
    return np.stack([np.linalg.solve(M0, V.T @ (rule.weights[:, None] * G[m])) for m in range(2)])


def vcjh_k_matrix(D, M, p, c):
    """K = c/|ref| sum_q binom(p,q) (D^(p-q,q))^T M D^(p-q,q)."""
    n = M.shape[0]
    K = np.zeros((n, n))
    if c == 0:
        return K
    for q in range(p + 1):
        Da = np.linalg.matrix_power(D[0], p - q) @ np.linalg.matrix_power(D[1], q)
        K += comb(p, q) * Da.T @ M @ Da
    K *= c / REF.area
    return 0.5 * (K + K.T)


def lifting_matrices(M, K, Vf, Wf):
    A = M + K
    check_spd(A, "M + K (the VCJH parameter c is too negative or too large)")
    Ainv = spd_inverse(A, "M + K")
    return tuple(Ainv @ v.T @ w for v, w in zip(Vf, Wf))


def filter_matrix(M, K):
    check_spd(M + K, "M + K")
    F = np.linalg.solve(M + K, M)
    return F


@dataclass(frozen=True)
class ReferenceOperators:
    p: int
    variant: str
    c: float
    basis: object
    ip: InnerProduct
    T: np.ndarray        # maps basis coefficients to orthonormal PKD coefficients
    V: np.ndarray
    Vf: tuple
    W: np.ndarray
    Wf: tuple
    M: np.ndarray
    Minv: np.ndarray
    P: np.ndarray
    D: np.ndarray        # (2, N_p, N_p)
    K: np.ndarray
    L: tuple
    F: np.ndarray

    @property
    def n_modes(self):
        return self.M.shape[0]

    @property
    def normals(self):
        return REF.normals

    def as_dict(self):
        out = {"V": self.V, "W": self.W, "M": self.M, "P": self.P, "D1": self.D[0],
               "D2": self.D[1], "K": self.K, "F": self.F}
        for f in range(3):
            out[f"V_facet{f}"] = self.Vf[f]
            out[f"W_facet{f}"] = self.Wf[f]
            out[f"L_facet{f}"] = self.L[f]
        return out


def build_operators(variant, p, c=0.0, volume_rule=None) -> ReferenceOperators:
    c = resolve_c(c, p)
    ip = build_inner_product(variant, p, volume_rule)
    D0 = modal_diff_matrices(p)
    if variant == "Collocation":
        basis = NodalBasis(p, ip.nodes)
        T, Tinv = basis.vt_inv, basis.vt
    else:
        basis = PKDBasis(p)
        T = Tinv = np.eye(num_modes(p))
    D = np.stack([Tinv @ D0[m] @ T for m in range(2)])
    V = basis.eval(ip.nodes)
    Vf = tuple(basis.eval(x) for x in ip.facet_nodes)
    M = mass_matrix(V, ip.W)
    Minv = spd_inverse(M, "mass matrix M")
    P = Minv @ V.T @ ip.W
    K = vcjh_k_matrix(D, M, p, c)
    L = lifting_matrices(M, K, Vf, ip.W_facet)
    F = filter_matrix(M, K)
    return ReferenceOperators(p, variant, c, basis, ip, T, V, Vf, ip.W, ip.W_facet,
                              M, Minv, P, D, K, L, F)


# ---------------------------------------------------------------------------
# checks


def sbp_residual_matrices(ops):
    n = REF.normals
    out = []
    for m in range(2):
        E = sum(n[f, m] * ops.Vf[f].T @ ops.Wf[f] @ ops.Vf[f] for f in range(3))
        out.append(ops.M @ ops.D[m] + ops.D[m].T @ ops.M - E)
    return out


def check_sbp(ops) -> float:
    nM = np.linalg.norm(ops.M)
    return max(np.linalg.norm(R) for R in sbp_residual_matrices(ops)) / nM


def check_divergence_theorem(ops) -> float:
    """Largest (over directions) mismatch between the volume and facet forms
    of the discrete divergence theorem tested against the constant."""
    one = ops.P @ np.ones(ops.V.shape[0])
    n = REF.normals
    worst = 0.0
    for m in range(2):
        lhs = one @ ops.M @ ops.D[m]
        rhs = sum(n[f, m] * one @ ops.Vf[f].T @ ops.Wf[f] @ ops.Vf[f] for f in range(3))
        worst = max(worst, np.linalg.norm(lhs - rhs))
    return worst


def k_annihilation(ops) -> float:
    nK = np.linalg.norm(ops.K)
    if nK == 0:
        return 0.0
    return max(np.linalg.norm(ops.K @ ops.D[m]) / (nK * np.linalg.norm(ops.D[m]))
               for m in range(2))


def filter_modal_leak(ops) -> float:
    """Largest entry of F - I, expressed in the orthonormal basis, outside the
    block of degree-p modes."""
    Fm = ops.T @ ops.F @ np.linalg.inv(ops.T)
    R = Fm - np.eye(len(Fm))
    k = ops.n_modes - (ops.p + 1)
    R[k:, k:] = 0.0
    return np.abs(R).max()


def dump_operators(ops, directory):
    os.makedirs(directory, exist_ok=True)
    tag = f"{ops.variant}_p{ops.p}_c{ops.c:g}"
    for name, A in ops.as_dict().items():
        path = os.path.join(directory, f"{tag}_{name}.csv")
        np.savetxt(path, np.atleast_2d(A), delimiter=",", fmt="%.17g")
