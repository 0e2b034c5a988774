"""Split-Cartesian triangular meshes of the periodic square (0,L)^2, the
smooth warping map, geometric factors and periodic facet connectivity.

Square cell (i, j) is cut along one of its diagonals. The default
"alternating" pattern uses the diagonal from the lower-left to the
upper-right corner when i + j is even and the other diagonal otherwise;
"main" and "anti" use a single diagonal everywhere. The reference vertex
(-1,-1) is always sent to the right-angle corner, so reference facet 1
(the hypotenuse) is the diagonal:

    main diagonal:  lower-right (LR, UR, LL)   upper-left  (UL, LL, UR)
    anti diagonal:  lower-left  (LL, LR, UL)   upper-right (UR, UL, LR)

Elements 2*(j*M + i) and 2*(j*M + i) + 1 are the two triangles of cell
(i, j), in the order listed above.
"""
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from .refelem import REF, NodalBasis, warp_blend_nodes


class TopologyError(RuntimeError):
    pass


class OrientationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Mesh:
    L: float
    M: int
    p_map: int
    vertices: np.ndarray    # (K, 3, 2) straight-sided vertex positions before warping
    map_nodes: np.ndarray   # (K, N_map, 2) images of the mapping nodes
    warped: bool = False

    @property
    def K(self):
        return self.vertices.shape[0]

    @property
    def h(self):
        return self.L / self.M

    @property
    def affine(self):
        return self.p_map == 1

    def map_basis(self):
        return _map_basis(self.p_map)

    def map_points(self, xhat):
        """Physical coordinates of reference points, (K, n, 2)."""
        phi = self.map_basis().eval(xhat)
        return np.einsum("qi,kid->kqd", phi, self.map_nodes)

    def jacobian(self, xhat):
        """dX_d/dxhat_m at reference points, (K, n, 2, 2) indexed [k, q, d, m]."""
        g = self.map_basis().grad(xhat)
        return np.einsum("mqi,kid->kqdm", g, self.map_nodes)


@lru_cache(maxsize=None)
def _map_basis(p_map):
    return NodalBasis(p_map, warp_blend_nodes(p_map))


def _affine_image(vertices, xhat):
    v0, v1, v2 = vertices[:, 0], vertices[:, 1], vertices[:, 2]
    a = 0.5 * (xhat[:, 0] + 1)
    b = 0.5 * (xhat[:, 1] + 1)
    return (v0[:, None, :] + a[None, :, None] * (v1 - v0)[:, None, :]
            + b[None, :, None] * (v2 - v0)[:, None, :])


SPLIT_PATTERNS = ("alternating", "main", "anti")


def split_cartesian_mesh(M, L=1.0, pattern="alternating") -> Mesh:
    if M < 1 or L <= 0:
        raise ValueError("need M >= 1 and L > 0")
    if pattern not in SPLIT_PATTERNS:
        raise ValueError(f"split pattern must be one of {SPLIT_PATTERNS}")
    h = L / M
    verts = []
    for j in range(M):
        for i in range(M):
            ll = (i * h, j * h)
            lr = ((i + 1) * h, j * h)
            ur = ((i + 1) * h, (j + 1) * h)
            ul = (i * h, (j + 1) * h)
            main = pattern == "main" or (pattern == "alternating" and (i + j) % 2 == 0)
            if main:
                verts.append((lr, ur, ll))
                verts.append((ul, ll, ur))
            else:
                verts.append((ll, lr, ul))
                verts.append((ur, ul, lr))
    verts = np.array(verts, dtype=float)
    return Mesh(L, M, 1, verts, verts.copy(), False)


def warp_function(x, L):
    """Smooth periodic-compatible deformation of (0,L)^2; identity on its boundary."""
    x1, x2 = x[..., 0], x[..., 1]
    bump = np.sin(np.pi * x1 / L) * np.sin(np.pi * x2 / L)
    y1 = x1 + L / 5 * bump
    y2 = x2 + L / 5 * np.exp(1 - x2 / L) * bump
    return np.stack([y1, y2], axis=-1)


def warp_mesh(mesh: Mesh, p_map: int) -> Mesh:
    if p_map < 1:
        raise ValueError("p_map must be >= 1")
    nodes = warp_blend_nodes(p_map)
    straight = _affine_image(mesh.vertices, nodes)
    return Mesh(mesh.L, mesh.M, p_map, mesh.vertices, warp_function(straight, mesh.L), True)


def remap_mesh(mesh: Mesh, p_map: int) -> Mesh:
    """Same straight-sided mesh, represented with a degree-p_map mapping."""
    nodes = warp_blend_nodes(p_map)
    return Mesh(mesh.L, mesh.M, p_map, mesh.vertices, _affine_image(mesh.vertices, nodes), False)


# ---------------------------------------------------------------------------
# geometric factors


@dataclass(frozen=True)
class GeometricFactors:
    J: np.ndarray           # (K, N) Jacobian determinant at volume nodes
    metric: np.ndarray      # (K, N, 2, 2) entries J (dX/dxhat)^-1, indexed [k, q, m, n]
    J_facet: np.ndarray     # (K, 3, N_gamma) surface scaling
    normals: np.ndarray     # (K, 3, N_gamma, 2) unit outward normals
    x: np.ndarray           # (K, N, 2) physical volume nodes
    x_facet: np.ndarray     # (K, 3, N_gamma, 2) physical facet nodes


def _adjugate(jac):
    # J * inverse of [[a, b], [c, d]] is [[d, -b], [-c, a]]
    a, b = jac[..., 0, 0], jac[..., 0, 1]
    c, d = jac[..., 1, 0], jac[..., 1, 1]
    adj = np.empty_like(jac)
    adj[..., 0, 0], adj[..., 0, 1] = d, -b
    adj[..., 1, 0], adj[..., 1, 1] = -c, a
    return adj, a * d - b * c


def geometric_factors(mesh: Mesh, vol_nodes, facet_nodes) -> GeometricFactors:
    jac = mesh.jacobian(vol_nodes)
    metric, J = _adjugate(jac)
    if np.any(J <= 0):
        k = int(np.argwhere(J <= 0)[0, 0])
        raise OrientationError(f"orientation violated: nonpositive Jacobian in element {k}")
    nhat = REF.normals
    Jf, nf, xf = [], [], []
    for f in range(3):
        adj, Jfac = _adjugate(mesh.jacobian(facet_nodes[f]))
        if np.any(Jfac <= 0):
            k = int(np.argwhere(Jfac <= 0)[0, 0])
            raise OrientationError(f"orientation violated: nonpositive Jacobian on element {k}")
        # J (dX/dxhat)^-T nhat = adj^T nhat
        v = np.einsum("kqnm,n->kqm", adj, nhat[f])
        s = np.linalg.norm(v, axis=-1)
        Jf.append(s)
        nf.append(v / s[..., None])
        xf.append(mesh.map_points(facet_nodes[f]))
    return GeometricFactors(J, metric, np.stack(Jf, 1), np.stack(nf, 1),
                            mesh.map_points(vol_nodes), np.stack(xf, 1))


# ---------------------------------------------------------------------------
# periodic connectivity


@dataclass(frozen=True)
class Connectivity:
    neighbor: np.ndarray        # (K, 3) element across each facet
    neighbor_facet: np.ndarray  # (K, 3) facet index seen from the neighbour
    perm: np.ndarray            # (K, 3, N_gamma): exterior node i is neighbour facet node perm[i]
    shift: np.ndarray           # (K, 3, 2) translation taking neighbour nodes onto ours

    def gather_index(self):
        """Flat indices into (K, 3, N_gamma) facet arrays giving the exterior trace."""
        K, _, ng = self.perm.shape
        return ((self.neighbor[..., None] * 3 + self.neighbor_facet[..., None]) * ng + self.perm)


def periodic_connectivity(mesh: Mesh, x_facet) -> Connectivity:
    """Match facets of a doubly periodic mesh by coordinates of their nodes."""
    L = mesh.L
    K, _, ng, _ = x_facet.shape
    tol = 1e-10 * mesh.h
    cent = x_facet.mean(axis=2).reshape(-1, 2)
    wrapped = np.mod(cent, L)
    wrapped[wrapped >= L] -= L
    tree = cKDTree(wrapped, boxsize=L)
    dist, idx = tree.query(wrapped, k=min(3, len(wrapped)))
    shifts = np.array([[0, 0], [L, 0], [-L, 0], [0, L], [0, -L]], dtype=float)
    neighbor = np.empty((K, 3), dtype=int)
    nfacet = np.empty((K, 3), dtype=int)
    perm = np.empty((K, 3, ng), dtype=int)
    shift = np.empty((K, 3, 2))
    for g in range(3 * K):
        k, f = divmod(g, 3)
        cand = [j for d, j in zip(dist[g], idx[g]) if j != g and d < tol]
        if len(cand) != 1:
            kind = "unmatched" if not cand else "ambiguous"
            raise TopologyError(f"{kind} facet (element {k}, facet {f})")
        nb = cand[0]
        kn, fn = divmod(nb, 3)
        mine, theirs = x_facet[k, f], x_facet[kn, fn]
        found = None
        for t in shifts:
            d = np.linalg.norm(mine[:, None, :] - (theirs[None, :, :] + t), axis=-1)
            hit = d < tol
            if np.all(hit.sum(axis=1) == 1) and np.all(hit.sum(axis=0) == 1):
                if found is not None:
                    raise TopologyError(f"ambiguous translation for facet (element {k}, facet {f})")
                found = (t, np.argmax(hit, axis=1))
        if found is None:
            raise TopologyError(f"facet nodes do not align for (element {k}, facet {f})")
        neighbor[k, f], nfacet[k, f] = kn, fn
        shift[k, f], perm[k, f] = found
    conn = Connectivity(neighbor, nfacet, perm, shift)
    _check_mirror(conn)
    return conn


def _check_mirror(conn):
    K = conn.neighbor.shape[0]
    for k in range(K):
        for f in range(3):
            kn, fn = conn.neighbor[k, f], conn.neighbor_facet[k, f]
            if conn.neighbor[kn, fn] != k or conn.neighbor_facet[kn, fn] != f:
                raise TopologyError(f"interface records of (element {k}, facet {f}) are not mirrored")
            back = conn.perm[kn, fn][conn.perm[k, f]]
            if not np.array_equal(back, np.arange(len(back))):
                raise TopologyError(f"facet permutations of (element {k}, facet {f}) are not inverse")


def interface_weight_mismatch(conn, geo, Wf):
    """Worst violation of T^T (W J)_mine T = (W J)_theirs over all interfaces."""
    K = conn.neighbor.shape[0]
    worst = 0.0
    for k in range(K):
        for f in range(3):
            kn, fn = conn.neighbor[k, f], conn.neighbor_facet[k, f]
            T = np.eye(Wf[f].shape[0])[conn.perm[k, f]].T   # T[perm[i], i] = 1
            lhs = T @ (Wf[f] * geo.J_facet[k, f][None, :]) @ T.T
            # compare as bilinear forms acting on the neighbour's nodes
            rhs = Wf[fn] * geo.J_facet[kn, fn][None, :]
            worst = max(worst, np.abs(lhs - rhs).max())
    return worst


def dump_mesh(mesh: Mesh, conn: Connectivity, directory):
    os.makedirs(directory, exist_ok=True)
    corners = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    img = mesh.map_points(corners)
    with open(os.path.join(directory, "elements.csv"), "w") as fh:
        fh.write("element,x0,y0,x1,y1,x2,y2\n")
        for k in range(mesh.K):
            fh.write(f"{k}," + ",".join(f"{v:.17g}" for v in img[k].ravel()) + "\n")
    with open(os.path.join(directory, "interfaces.csv"), "w") as fh:
        fh.write("element,facet,neighbor,neighbor_facet,shift_x,shift_y,permutation\n")
        for k in range(mesh.K):
            for f in range(3):
                perm = " ".join(str(i) for i in conn.perm[k, f])
                sx, sy = conn.shift[k, f]
                fh.write(f"{k},{f},{conn.neighbor[k, f]},{conn.neighbor_facet[k, f]},"
                         f"{sx:.17g},{sy:.17g},{perm}\n")
