"""Reference triangle, orthogonal polynomials, quadrature rules and nodal sets.

The reference element is the biunit triangle with vertices (-1,-1), (1,-1),
(-1,1). Facets are numbered counterclockwise starting from the bottom edge:

    facet 0: (-1,-1) -> (1,-1)   normal (0,-1)
    facet 1: (1,-1)  -> (-1,1)   normal (1,1)/sqrt(2)
    facet 2: (-1,1)  -> (-1,-1)  normal (-1,0)

A facet point with parameter s in [-1,1] sits at (1-s)/2*A + (1+s)/2*B for
the facet running from vertex A to vertex B.
"""
from dataclasses import dataclass, field
from math import comb, lgamma, exp, log, sqrt, pi, cos, sin

import numpy as np
from scipy.interpolate import BarycentricInterpolator


class ConstructionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# reference geometry


@dataclass(frozen=True)
class ReferenceTriangle:
    vertices: np.ndarray = field(
        default_factory=lambda: np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]]))

    @property
    def facet_vertices(self):
        v = self.vertices
        return [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])]

    @property
    def normals(self) -> np.ndarray:
        out = []
        for a, b in self.facet_vertices:
            t = b - a
            n = np.array([t[1], -t[0]])
            out.append(n / np.linalg.norm(n))
        return np.array(out)

    @property
    def facet_lengths(self) -> np.ndarray:
        return np.array([np.linalg.norm(b - a) for a, b in self.facet_vertices])

    @property
    def area(self) -> float:
        v = self.vertices
        e1, e2 = v[1] - v[0], v[2] - v[0]
        return 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])

    def facet_points(self, facet: int, s) -> np.ndarray:
        a, b = self.facet_vertices[facet]
        s = np.asarray(s, dtype=float)[:, None]
        return 0.5 * (1 - s) * a + 0.5 * (1 + s) * b


REF = ReferenceTriangle()


# ---------------------------------------------------------------------------
# Jacobi polynomials


def jacobi_eval(n, a, b, x, deriv=False):
    """P_n^(a,b)(x) by the three-term recurrence; with deriv=True the first
    derivative, via d/dx P_n^(a,b) = (n+a+b+1)/2 P_{n-1}^(a+1,b+1)."""
    x = np.asarray(x, dtype=float)
    if deriv:
        if n == 0:
            return np.zeros_like(x)
        return 0.5 * (n + a + b + 1) * jacobi_eval(n - 1, a + 1, b + 1, x)
    p0 = np.ones_like(x)
    if n == 0:
        return p0
    p1 = 0.5 * ((a + b + 2) * x + (a - b))
    for k in range(2, n + 1):
        s = 2 * k + a + b
        c1 = 2 * k * (k + a + b) * (s - 2)
        c2 = (s - 1) * (s * (s - 2) * x + a * a - b * b)
        c3 = 2 * (k + a - 1) * (k + b - 1) * s
        p0, p1 = p1, (c2 * p1 - c3 * p0) / c1
    return p1


def jacobi_norm2(n, a, b):
    """Squared L2 norm of P_n^(a,b) under the weight (1-x)^a (1+x)^b."""
    lg = (lgamma(n + a + 1) + lgamma(n + b + 1) - lgamma(n + a + b + 1) - lgamma(n + 1))
    return 2.0 ** (a + b + 1) / (2 * n + a + b + 1) * exp(lg)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (n,) on [-1,1] or (n, 2) on the triangle
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise ConstructionError("node and weight counts differ")
        if not np.all(np.isfinite(self.weights)):
            raise ConstructionError("non-finite quadrature weight")

    def __len__(self):
        return len(self.weights)


def _jacobi_roots(n, a, b, maxiter=100, tol=1e-15):
    # Newton with deflation from Chebyshev starting guesses
    roots = np.zeros(n)
    for k in range(n):
        x = -cos((2 * k + 1) * pi / (2 * n))
        if k > 0:
            x = 0.5 * (x + roots[k - 1])
        for _ in range(maxiter):
            f = float(jacobi_eval(n, a, b, x))
            df = float(jacobi_eval(n, a, b, x, deriv=True))
            s = np.sum(1.0 / (x - roots[:k]))
            dx = -f / (df - f * s)
            x += dx
            if abs(dx) <= tol:
                break
        else:
            raise ConstructionError(
                f"Newton iteration for roots of P_{n}^({a},{b}) did not converge")
        roots[k] = x
    return roots


def gauss_jacobi_rule(n, a=0.0, b=0.0) -> QuadratureRule:
    """n-point Gauss rule for the weight (1-x)^a (1+x)^b."""
    if n < 1:
        raise ValueError("need n >= 1")
    x = _jacobi_roots(n, a, b)
    dp = jacobi_eval(n, a, b, x, deriv=True)
    lc = (lgamma(n + a + 1) + lgamma(n + b + 1) - lgamma(n + a + b + 1) - lgamma(n + 1)
          + (a + b + 1) * log(2.0))
    w = exp(lc) / ((1 - x * x) * dp * dp)
    return QuadratureRule(x, w, 2 * n - 1)


def gauss_legendre_rule(n) -> QuadratureRule:
    return gauss_jacobi_rule(n, 0.0, 0.0)


def gauss_lobatto_rule(n) -> QuadratureRule:
    if n < 2:
        raise ValueError("Gauss-Lobatto needs n >= 2")
    # interior nodes: roots of P'_{n-1}, proportional to P_{n-2}^(1,1)
    inner = _jacobi_roots(n - 2, 1.0, 1.0) if n > 2 else np.zeros(0)
    x = np.concatenate([[-1.0], inner, [1.0]])
    w = 2.0 / (n * (n - 1) * jacobi_eval(n - 1, 0, 0, x) ** 2)
    return QuadratureRule(x, w, 2 * n - 3)


def triangle_volume_rule(degree) -> QuadratureRule:
    """Collapsed-coordinate rule: Gauss-Legendre in a times Gauss-Jacobi(1,0)
    in b, mapped by x1 = (1+a)(1-b)/2 - 1, x2 = b."""
    n = max(1, (degree + 2) // 2)
    ra = gauss_legendre_rule(n)
    rb = gauss_jacobi_rule(n, 1.0, 0.0)
    a, b = np.meshgrid(ra.nodes, rb.nodes, indexing="ij")
    wa, wb = np.meshgrid(ra.weights, rb.weights, indexing="ij")
    x1 = 0.5 * (1 + a) * (1 - b) - 1
    nodes = np.column_stack([x1.ravel(), b.ravel()])
    return QuadratureRule(nodes, 0.5 * (wa * wb).ravel(), degree)


def triangle_moment(i, j):
    """Exact integral of x1^i x2^j over the biunit triangle."""
    # shift s = x1+1, t = x2+1 onto {s,t >= 0, s+t <= 2}
    from fractions import Fraction
    from math import factorial
    total = Fraction(0)
    for k in range(i + 1):
        for l in range(j + 1):
            c = comb(i, k) * comb(j, l) * (-1) ** (i - k + j - l)
            total += c * Fraction(2 ** (k + l + 2) * factorial(k) * factorial(l),
                                  factorial(k + l + 2))
    return float(total)


def monomial_exactness_error(rule: QuadratureRule, degree=None) -> float:
    """Largest relative moment error over monomials of total degree <= degree."""
    degree = rule.degree if degree is None else degree
    x, y = rule.nodes[:, 0], rule.nodes[:, 1]
    worst = 0.0
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            exact = triangle_moment(i, j)
            q = rule.weights @ (x ** i * y ** j)
            worst = max(worst, abs(q - exact) / max(1.0, abs(exact)))
    return worst


def load_quadrature_rule(path) -> QuadratureRule:
    """Read a triangle rule: a `degree <d>` line followed by `x y w` rows."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0][0] != "degree" or len(lines[0]) != 2:
        raise ConstructionError(f"{path}: first line must be 'degree <d>'")
    degree = int(lines[0][1])
    try:
        data = np.array([[float(v) for v in ln] for ln in lines[1:]])
    except ValueError as exc:
        raise ConstructionError(f"{path}: malformed row ({exc})") from None
    if data.ndim != 2 or data.shape[1] != 3:
        raise ConstructionError(f"{path}: every row needs exactly 'x y w'")
    rule = QuadratureRule(data[:, :2].copy(), data[:, 2].copy(), degree)
    if abs(rule.weights.sum() - REF.area) > 1e-12:
        raise ConstructionError(f"{path}: weights sum to {rule.weights.sum()!r}, expected 2")
    err = monomial_exactness_error(rule)
    if err > 1e-13:
        raise ConstructionError(f"{path}: not exact to degree {degree} (moment error {err:.2e})")
    return rule


# ---------------------------------------------------------------------------
# bases


def multi_indices(p):
    """(i, j) with i+j <= p, ordered by total degree; the last p+1 entries
    are the degree-p modes."""
    return [(i, n - i) for n in range(p + 1) for i in range(n + 1)]


def num_modes(p):
    return (p + 1) * (p + 2) // 2


def _collapsed_legendre(p, x1, x2):
    """Q_i = ((1-x2)/2)^i P_i(a), a the collapsed coordinate, with gradients.

    Multiplying the Legendre recurrence through by s^(i+1), s = (1-x2)/2,
    turns it into a recurrence in a*s = x1 + (1+x2)/2 and s^2, both
    polynomials, so nothing is singular at the apex x2 = 1."""
    s = 0.5 * (1 - x2)
    a_s = x1 + 0.5 * (1 + x2)
    one = np.ones_like(x1)
    zero = np.zeros_like(x1)
    Q = [one]
    dQ = [(zero, zero)]
    if p >= 1:
        Q.append(a_s)
        dQ.append((one, 0.5 * one))
    for n in range(1, p):
        q = ((2 * n + 1) * a_s * Q[n] - n * s * s * Q[n - 1]) / (n + 1)
        d1 = ((2 * n + 1) * (Q[n] + a_s * dQ[n][0]) - n * s * s * dQ[n - 1][0]) / (n + 1)
        d2 = ((2 * n + 1) * (0.5 * Q[n] + a_s * dQ[n][1])
              - n * (-s * Q[n - 1] + s * s * dQ[n - 1][1])) / (n + 1)
        Q.append(q)
        dQ.append((d1, d2))
    return Q, dQ


class PKDBasis:
    """Orthonormal Proriol-Koornwinder-Dubiner basis of total degree p."""

    kind = "modal"

    def __init__(self, p):
        self.p = p
        self.indices = multi_indices(p)
        self.n = len(self.indices)
        # sqrt((2i+1)(i+j+1)/2) normalizes to unit L2 norm on the biunit triangle
        self.scale = np.array([sqrt((2 * i + 1) * (i + j + 1) / 2) for i, j in self.indices])

    def _parts(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x[:, 0], x[:, 1]

    def eval(self, x):
        x1, x2 = self._parts(x)
        Q, _ = _collapsed_legendre(self.p, x1, x2)
        out = np.empty((len(x1), self.n))
        for k, (i, j) in enumerate(self.indices):
            out[:, k] = self.scale[k] * Q[i] * jacobi_eval(j, 2 * i + 1, 0, x2)
        return out

    def grad(self, x):
        """Array of shape (2, npts, n) with d/dx1 and d/dx2."""
        x1, x2 = self._parts(x)
        Q, dQ = _collapsed_legendre(self.p, x1, x2)
        out = np.empty((2, len(x1), self.n))
        for k, (i, j) in enumerate(self.indices):
            pj = jacobi_eval(j, 2 * i + 1, 0, x2)
            dpj = jacobi_eval(j, 2 * i + 1, 0, x2, deriv=True)
            out[0, :, k] = self.scale[k] * dQ[i][0] * pj
            out[1, :, k] = self.scale[k] * (dQ[i][1] * pj + Q[i] * dpj)
        return out


class NodalBasis:
    """Lagrange basis on a unisolvent set, phi_i = sum_j [Vt^-T]_ij phi0_j."""

    kind = "nodal"

    def __init__(self, p, nodes, tol=1e-10):
        self.p = p
        self.nodes = np.asarray(nodes, dtype=float)
        self.modal = PKDBasis(p)
        self.n = self.modal.n
        if self.nodes.shape[0] != self.n:
            raise ConstructionError(f"need {self.n} nodes for degree {p}, got {len(self.nodes)}")
        Vt = self.modal.eval(self.nodes)
        sv = np.linalg.svd(Vt, compute_uv=False)
        if sv[-1] < tol * sv[0]:
            raise ConstructionError("nodal set is not unisolvent (singular Vandermonde)")
        self.vt = Vt
        self.vt_inv = np.linalg.inv(Vt)

    def eval(self, x):
        return self.modal.eval(x) @ self.vt_inv

    def grad(self, x):
        return self.modal.grad(x) @ self.vt_inv


def nodal_basis(p, nodes) -> NodalBasis:
    return NodalBasis(p, nodes)


def pkd_basis(p) -> PKDBasis:
    return PKDBasis(p)


def vandermonde(basis, nodes):
    return basis.eval(nodes)


def grad_vandermonde(basis, nodes, m):
    return basis.grad(nodes)[m]


# ---------------------------------------------------------------------------
# warp & blend nodes

# optimized blend parameters for p = 1..15
_ALPHA_OPT = [0.0000, 0.0000, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832,
              1.3648, 1.4773, 1.4959, 1.5743, 1.5770, 1.6223, 1.6258]


def _warp_factor(p, r):
    lgl = gauss_lobatto_rule(p + 1).nodes
    req = np.linspace(-1, 1, p + 1)
    warp = BarycentricInterpolator(req, lgl - req)(r)
    interior = np.abs(r) < 1 - 1e-10
    sf = 1 - (interior * r) ** 2
    return warp / sf + warp * (interior - 1)


def warp_blend_nodes(p):
    """Warp & blend nodes on the reference triangle, shape (N_p, 2)."""
    if not 1 <= p <= 8:
        raise ValueError("warp & blend blend parameters are tabulated for 1 <= p <= 8")
    alpha = _ALPHA_OPT[p - 1]
    L1, L3 = [], []
    for n in range(p + 1):
        for m in range(p + 1 - n):
            L1.append(n / p)
            L3.append(m / p)
    L1, L3 = np.array(L1), np.array(L3)
    L2 = 1 - L1 - L3
    x = -L2 + L3
    y = (-L2 - L3 + 2 * L1) / sqrt(3)
    warps = [_warp_factor(p, L3 - L2), _warp_factor(p, L1 - L3), _warp_factor(p, L2 - L1)]
    blends = [4 * L2 * L3, 4 * L1 * L3, 4 * L1 * L2]
    lam = [L1, L2, L3]
    for k in range(3):
        w = blends[k] * warps[k] * (1 + (alpha * lam[k]) ** 2)
        x = x + cos(2 * pi * k / 3) * w
        y = y + sin(2 * pi * k / 3) * w
    # equilateral -> biunit triangle
    l1 = (sqrt(3) * y + 1) / 3
    l2 = (-3 * x - sqrt(3) * y + 2) / 6
    l3 = (3 * x - sqrt(3) * y + 2) / 6
    nodes = np.column_stack([-l2 + l3 - l1, -l2 - l3 + l1])
    nodes[np.abs(nodes) < 1e-15] = 0.0
    _check_warp_blend(p, nodes)
    return nodes


def facet_node_indices(nodes, tol=1e-10):
    """For each facet, indices of the nodes lying on it, sorted by facet parameter."""
    out = []
    for a, b in REF.facet_vertices:
        t = b - a
        n = np.array([t[1], -t[0]])
        dist = (nodes - a) @ n / np.linalg.norm(n)
        idx = np.flatnonzero(np.abs(dist) < tol)
        s = 2 * ((nodes[idx] - a) @ t) / (t @ t) - 1
        out.append(idx[np.argsort(s)])
    return out


def _check_warp_blend(p, nodes):
    V = PKDBasis(p).eval(nodes)
    if np.linalg.matrix_rank(V) != num_modes(p):
        raise ConstructionError(f"warp & blend nodes for p={p} are not unisolvent")
    lgl = gauss_lobatto_rule(p + 1).nodes
    for f, idx in enumerate(facet_node_indices(nodes)):
        if len(idx) != p + 1:
            raise ConstructionError(f"facet {f}: expected {p + 1} nodes, found {len(idx)}")
        if np.max(np.abs(nodes[idx] - REF.facet_points(f, lgl))) > 1e-10:
            raise ConstructionError(f"facet {f}: trace does not match LGL nodes")
