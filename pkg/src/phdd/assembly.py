"""Function spaces over one subdomain and assembly of the algebraic operators.

Assembled objects follow the block notation of the coupled system:

* ``M``: mass matrices with a scalar coefficient per subdomain;
* ``D``: mixed differential matrices ``D[i, j] = <row_i, op(col_j)>`` for
  ``op`` in ``{dxx, div, grad}``;
* ``T``: signed boolean trace matrices selecting the parent DOFs that carry a
  boundary trace (outward normal flux for ``RT``);
* ``Psi``: Gram matrix of two boundary bases on the same facets;
* ``B``: boundary input matrices, assembled directly by facet quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elements import (
    LOCAL_EDGES,
    REF_VERTICES,
    dg1d_eval,
    hermite_eval,
    quadrature,
    reference_element,
    shifted_legendre,
    _gauss_interval,
)
from .linalg import csr_from_arrays
from .mesh import GAMMA_1, GAMMA_2, GAMMA_INT, Mesh1D, Mesh2D, facets_by_tag

_FAMILY_ALIASES = {
    "her": "Hermite", "hermite": "Hermite",
    "dg1d": "DG1d",
    "cg": "CG", "lagrange": "CG",
    "dg": "DG",
    "rt": "RT",
    "ned": "NED", "nedelec": "NED",
}


def _canonical_family(family: str) -> str:
    try:
        return _FAMILY_ALIASES[family.lower()]
    except KeyError:
        raise ValueError(f"unknown element family {family!r}") from None


@dataclass(frozen=True)
class FacetRecord:
    """One tagged facet as seen from the subdomain cell that owns it.

    For 2D facets ``lo``/``hi`` are the global vertices with ``lo < hi``;
    the trace parameter ``s`` runs from ``lo`` to ``hi``.  ``sign`` is ``+1``
    when that direction is counterclockwise for ``cell`` (then the normal
    ``(t_y, -t_x)`` of ``t = x_hi - x_lo`` is outward).
    """

    cell: int
    local: int
    lo: int
    hi: int
    edge: int
    sign: int


class FunctionSpace:
    """Finite-element space of one family over the cells of one subdomain."""

    def __init__(self, mesh, tag: int, family: str, degree: int):
        self.mesh = mesh
        self.tag = int(tag)
        self.family = _canonical_family(family)
        self.degree = int(degree)
        self.cells = mesh.cells_of(self.tag)
        if self.cells.size == 0:
            raise ValueError(f"subdomain {tag} has no cells")
        if isinstance(mesh, Mesh1D):
            if self.family not in ("Hermite", "DG1d"):
                raise ValueError(f"family {self.family} is not defined on a 1D mesh")
            self.dim = 1
            self._init_1d()
        elif isinstance(mesh, Mesh2D):
            if self.family not in ("CG", "DG", "RT", "NED"):
                raise ValueError(f"family {self.family} is not defined on a 2D mesh")
            self.dim = 2
            self.element = reference_element(self.family, self.degree)
            self._init_2d()
        else:
            raise TypeError("unsupported mesh type")
        self._facets: dict = {}

    def __repr__(self):
        return f"FunctionSpace({self.family}{self.degree}, tag={self.tag}, ndofs={self.ndofs})"

    @property
    def value_shape(self):
        return (2,) if self.family in ("RT", "NED") else ()

    # ------------------------------------------------------------------ 1D
    def _init_1d(self):
        m = self.mesh
        cv = m.cells[self.cells]
        self.a = m.vertices[cv[:, 0]]
        self.h = m.vertices[cv[:, 1]] - m.vertices[cv[:, 0]]
        verts = np.unique(cv)
        self.vertex_index = {int(v): i for i, v in enumerate(verts)}
        nc = len(self.cells)
        if self.family == "Hermite":
            if self.degree != 3:
                raise ValueError("Hermite elements are cubic (degree 3)")
            loc = np.array([[self.vertex_index[int(a)], self.vertex_index[int(b)]] for a, b in cv])
            self.cell_dofs = np.column_stack([2 * loc[:, 0], 2 * loc[:, 0] + 1, 2 * loc[:, 1], 2 * loc[:, 1] + 1])
            self.ndofs = 2 * len(verts)
        else:
            if self.degree != 1:
                raise ValueError("DG1d elements are linear (degree 1)")
            self.cell_dofs = np.arange(2 * nc).reshape(nc, 2)
            self.ndofs = 2 * nc
        self.quad_degree = 3 if self.family == "Hermite" else 1

    def tabulate_1d(self, t, deriv: int = 0) -> np.ndarray:
        """Physical basis derivatives at reference points; shape ``(nc, nq, nloc)``."""
        t = np.asarray(t, dtype=float).ravel()
        h = self.h[:, None, None]
        if self.family == "Hermite":
            ref = hermite_eval(t, deriv)[None]  # (1, nq, 4)
            scale = np.array([1.0, 1.0, 1.0, 1.0])[None, None, :] * h ** (-deriv)
            slope = np.array([0.0, 1.0, 0.0, 1.0])[None, None, :]
            return ref * scale * (1.0 + slope * (h - 1.0))
        ref = dg1d_eval(t, deriv)[None]
        return ref * h ** (-deriv) * np.ones((len(self.cells), 1, 1))

    def points_1d(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float).ravel()
        return self.a[:, None] + self.h[:, None] * t[None, :]

    # ------------------------------------------------------------------ 2D
    def _init_2d(self):
        m = self.mesh
        el = self.element
        tri = m.triangles[self.cells]
        p = m.vertices[tri]
        self.x0 = p[:, 0]
        self.B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns
        self.detB = self.B[:, 0, 0] * self.B[:, 1, 1] - self.B[:, 0, 1] * self.B[:, 1, 0]
        self.Binv = np.linalg.inv(self.B)
        cedges = m.cell_edges[self.cells]
        self.signs = m.cell_edge_signs[self.cells]
        nc = len(self.cells)
        blocks = []
        offset = 0
        self.vertex_dof = {}
        self.edge_dofs = {}
        if el.dofs_per_vertex:
            verts = np.unique(tri)
            vmap = np.full(m.vertices.shape[0], -1, dtype=np.int64)
            vmap[verts] = np.arange(len(verts))
            self.vertex_dof = {int(v): int(vmap[v]) for v in verts}
            blocks.append(vmap[tri])
            offset = len(verts)
        if el.dofs_per_edge:
            ne = el.dofs_per_edge
            uniq = np.unique(cedges)
            emap = np.full(m.edges.shape[0], -1, dtype=np.int64)
            emap[uniq] = np.arange(len(uniq))
            for e in uniq:
                self.edge_dofs[int(e)] = list(offset + ne * emap[e] + np.arange(ne))
            loc = offset + ne * emap[cedges][:, :, None] + np.arange(ne)[None, None, :]
            blocks.append(loc.reshape(nc, 3 * ne))
            offset += ne * len(uniq)
        if el.dofs_per_cell:
            ni = el.dofs_per_cell
            blocks.append(offset + np.arange(nc * ni).reshape(nc, ni))
            offset += nc * ni
        self.cell_dofs = np.concatenate(blocks, axis=1).astype(np.int64)
        self.ndofs = int(offset)
        # per-cell basis coefficients, cached per orientation pattern
        keys = [tuple(int(s) for s in row) for row in self.signs]
        self.coeffs = np.stack([el.coefficients(kk) for kk in keys])
        self.quad_degree = self.degree if self.family != "DG" else self.degree

    def map_points(self, ref_pts) -> np.ndarray:
        """Physical coordinates of reference points; ``(nc, nq, 2)`` for shared points."""
        ref_pts = np.asarray(ref_pts, dtype=float)
        if ref_pts.ndim == 2:
            return self.x0[:, None, :] + np.einsum("cij,qj->cqi", self.B, ref_pts)
        return self.x0[:, None, :] + np.einsum("cij,cqj->cqi", self.B, ref_pts)

    def _select(self, cells):
        if cells is None:
            return slice(None)
        return np.asarray(cells, dtype=np.int64)

    def tabulate(self, ref_pts, cells=None) -> np.ndarray:
        """Physical basis values at reference points.

        ``ref_pts`` is ``(nq, 2)`` (same points on every cell) or
        ``(nc, nq, 2)`` (per selected cell).  Returns ``(nc, nq, nloc)`` for
        scalars and ``(nc, nq, nloc, 2)`` for vector families.
        """
        sel = self._select(cells)
        C = self.coeffs[sel]
        el = self.element
        ref_pts = np.asarray(ref_pts, dtype=float)
        if ref_pts.ndim == 2:
            P = el.prime_values(ref_pts)
            if el.value_shape == ():
                vals = np.einsum("cip,qp->cqi", C, P)
            else:
                vals = np.einsum("cip,qpd->cqid", C, P)
        else:
            nc, nq = ref_pts.shape[:2]
            P = el.prime_values(ref_pts.reshape(-1, 2)).reshape((nc, nq) + el.prime_values(ref_pts[0, :1]).shape[1:])
            if el.value_shape == ():
                vals = np.einsum("cip,cqp->cqi", C, P)
            else:
                vals = np.einsum("cip,cqpd->cqid", C, P)
        if self.family == "RT":
            B = self.B[sel]
            det = self.detB[sel]
            vals = np.einsum("cab,cqib->cqia", B, vals) / det[:, None, None, None]
        elif self.family == "NED":
            Binv = self.Binv[sel]
            vals = np.einsum("cba,cqib->cqia", Binv, vals)
        return vals

    def tabulate_deriv(self, ref_pts, cells=None) -> np.ndarray:
        """Physical gradient (scalar families), divergence (RT) or scalar curl (NED)."""
        sel = self._select(cells)
        C = self.coeffs[sel]
        el = self.element
        ref_pts = np.asarray(ref_pts, dtype=float)
        shared = ref_pts.ndim == 2
        flat = ref_pts if shared else ref_pts.reshape(-1, 2)
        if self.family in ("CG", "DG"):
            G = el.prime_grad(flat)
            if not shared:
                G = G.reshape(ref_pts.shape[:2] + G.shape[1:])
                g = np.einsum("cip,cqpd->cqid", C, G)
            else:
                g = np.einsum("cip,qpd->cqid", C, G)
            return np.einsum("cba,cqib->cqia", self.Binv[sel], g)
        D = el.prime_div(flat) if self.family == "RT" else el.prime_curl(flat)
        if not shared:
            D = D.reshape(ref_pts.shape[:2] + D.shape[1:])
            d = np.einsum("cip,cqp->cqi", C, D)
        else:
            d = np.einsum("cip,qp->cqi", C, D)
        return d / self.detB[sel][:, None, None]

    def to_reference(self, cell: int, x) -> np.ndarray:
        """Reference coordinates of physical points ``x`` in local cell ``cell``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - self.x0[cell]) @ self.Binv[cell].T

    # ------------------------------------------------------------ facets
    def facet_records(self, tag: int) -> list:
        """Tagged facets in midpoint order, each with its owning subdomain cell."""
        if tag in self._facets:
            return self._facets[tag]
        if self.dim == 1:
            raise TypeError("facet records are defined for 2D spaces only")
        m = self.mesh
        cell_pos = {int(c): i for i, c in enumerate(self.cells)}
        edge_owner = {}
        for i, c in enumerate(self.cells):
            for le in range(3):
                edge_owner.setdefault(int(m.cell_edges[c, le]), []).append((i, le))
        recs = []
        for v0, v1 in facets_by_tag(m, tag):
            e = m.edge_id(v0, v1)
            owners = edge_owner.get(e)
            if not owners:
                raise ValueError(f"facet ({v0},{v1}) with tag {tag} is not on subdomain {self.tag}")
            i, le = owners[0]
            lo, hi = min(v0, v1), max(v0, v1)
            recs.append(FacetRecord(i, le, lo, hi, e, int(self.signs[i, le])))
        del cell_pos
        self._facets[tag] = recs
        return recs

    def facet_ref_points(self, rec: FacetRecord, s) -> np.ndarray:
        """Reference points of the owning cell at trace parameters ``s``."""
        a0, a1 = LOCAL_EDGES[rec.local]
        p0, p1 = REF_VERTICES[a0], REF_VERTICES[a1]
        if rec.sign < 0:
            p0, p1 = p1, p0
        s = np.asarray(s, dtype=float)
        return p0 + s[:, None] * (p1 - p0)

    def facet_local_dofs(self, rec: FacetRecord) -> list:
        """Local cell DOF indices carrying the trace on a facet, ordered lo to hi."""
        el = self.element
        loc = []
        tri = self.mesh.triangles[self.cells[rec.cell]]
        if el.dofs_per_vertex:
            lv = {int(v): j for j, v in enumerate(tri)}
            loc.append(lv[rec.lo])
        if el.dofs_per_edge:
            base = 3 * el.dofs_per_vertex + el.dofs_per_edge * rec.local
            loc.extend(base + np.arange(el.dofs_per_edge))
        if el.dofs_per_vertex:
            loc.append(lv[rec.hi])
        return [int(x) for x in loc]


def build_space(mesh, tag: int, family: str, k: int) -> FunctionSpace:
    """Build a :class:`FunctionSpace`; Hermite spaces ignore ``k`` and are cubic."""
    fam = _canonical_family(family)
    if fam == "Hermite":
        k = 3
    return FunctionSpace(mesh, tag, fam, k)


# ---------------------------------------------------------------------------
# boundary (trace) spaces
# ---------------------------------------------------------------------------
@dataclass
class BoundarySpace:
    """Basis for boundary inputs/outputs on one facet tag.

    ``kind`` is ``"lagrange"`` (continuous ``P_k`` along the facets, nodal),
    ``"flux"`` (discontinuous ``P_{k-1}`` per facet, dual to Legendre moments)
    or ``"point"`` (1D endpoint jets, two components).  ``facet_dofs[f]`` lists
    the trace DOFs of facet ``f`` ordered along the trace parameter.
    """

    kind: str
    tag: int
    degree: int
    facets: list
    facet_dofs: list
    ndofs: int
    parent: FunctionSpace | None = None
    side: int = 0
    lengths: np.ndarray = field(default=None)

    def eval_facet(self, f: int, s) -> np.ndarray:
        """Basis values of facet ``f`` at parameters ``s``: ``(nq, n_facet_dofs)``."""
        s = np.asarray(s, dtype=float)
        if self.kind == "flux":
            L = self.lengths[f]
            return np.stack([(2 * j + 1) * shifted_legendre(j, s) / L for j in range(self.degree + 1)], axis=1)
        if self.kind == "lagrange":
            k = self.degree
            nodes = np.linspace(0.0, 1.0, k + 1)
            out = np.ones((s.size, k + 1))
            for j in range(k + 1):
                for m in range(k + 1):
                    if m != j:
                        out[:, j] *= (s - nodes[m]) / (nodes[j] - nodes[m])
            # DOF order along the facet is lo vertex, interior nodes, hi vertex
            return out[:, [0] + list(range(1, k)) + [k]]
        raise TypeError("point trace spaces have no facet parametrization")


def boundary_space(space: FunctionSpace, tag: int) -> BoundarySpace:
    """Trace space of ``space`` on ``tag`` with the matching DOF ordering."""
    if space.dim == 1:
        if space.family == "DG1d":
            return BoundarySpace("point", tag, 0, [], [], 0, space, space.tag)
        return BoundarySpace("point", tag, 3, facets_by_tag(space.mesh, tag), [[0, 1]], 2, space, space.tag)
    recs = space.facet_records(tag)
    verts = space.mesh.vertices
    lengths = np.array([np.linalg.norm(verts[r.hi] - verts[r.lo]) for r in recs])
    facets = [(r.lo, r.hi) for r in recs]
    if space.family == "CG":
        k = space.degree
        vid, fd, n = {}, [], 0
        for r in recs:
            d = []
            if r.lo not in vid:
                vid[r.lo] = n
                n += 1
            d.append(vid[r.lo])
            d.extend(range(n, n + k - 1))
            n += k - 1
            if r.hi not in vid:
                vid[r.hi] = n
                n += 1
            d.append(vid[r.hi])
            fd.append(d)
        return BoundarySpace("lagrange", tag, k, facets, fd, n, space, space.tag, lengths)
    if space.family in ("RT", "NED"):
        k = space.degree
        fd = [list(range(k * i, k * i + k)) for i in range(len(recs))]
        return BoundarySpace("flux", tag, k - 1, facets, fd, k * len(recs), space, space.tag, lengths)
    return BoundarySpace("flux", tag, 0, facets, [[] for _ in recs], 0, space, space.tag, lengths)


def dual_boundary_space(space: FunctionSpace, tag: int) -> BoundarySpace:
    """Input basis for ``space`` on ``tag``: the trace space of the dual family.

    Normal traces of ``RT_k`` pair with continuous ``P_k`` data, values of
    ``CG_k`` pair with discontinuous ``P_{k-1}`` flux data.  In 1D both
    sides use the two-component endpoint jet.
    """
    if space.dim == 1:
        return BoundarySpace("point", tag, 3, facets_by_tag(space.mesh, tag), [[0, 1]], 2, None, space.tag)
    recs = space.facet_records(tag)
    verts = space.mesh.vertices
    lengths = np.array([np.linalg.norm(verts[r.hi] - verts[r.lo]) for r in recs])
    facets = [(r.lo, r.hi) for r in recs]
    k = space.degree
    if space.family == "RT":
        vid, fd, n = {}, [], 0
        for r in recs:
            d = []
            if r.lo not in vid:
                vid[r.lo] = n
                n += 1
            d.append(vid[r.lo])
            d.extend(range(n, n + k - 1))
            n += k - 1
            if r.hi not in vid:
                vid[r.hi] = n
                n += 1
            d.append(vid[r.hi])
            fd.append(d)
        return BoundarySpace("lagrange", tag, k, facets, fd, n, None, space.tag, lengths)
    if space.family == "CG":
        fd = [list(range(k * i, k * i + k)) for i in range(len(recs))]
        return BoundarySpace("flux", tag, k - 1, facets, fd, k * len(recs), None, space.tag, lengths)
    raise ValueError(f"no dual boundary space for family {space.family}")


# ---------------------------------------------------------------------------
# 1D endpoint trace functionals
# ---------------------------------------------------------------------------
def _endpoint_role(space: FunctionSpace, tag: int):
    """Return (vertex index in space, 'a' or 'b') for a tagged endpoint."""
    m = space.mesh
    v = facets_by_tag(m, tag)[0]
    if int(v) not in space.vertex_index:
        raise ValueError(f"tag {tag} is not an endpoint of subdomain {space.tag}")
    lv = space.vertex_index[int(v)]
    end = "a" if lv == 0 else "b"
    return lv, end


# Hermite trace component (kind, sign) per end.  "beta" traces appear when the
# second-order term of the beta equation is integrated by parts (Omega_1),
# "alpha" traces for the alpha equation (Omega_2):
#   T_beta  f = (-f'(b), f'(a), f(b), -f(a))
#   T_alpha f = ( f(b),  f(a),  f'(b), f'(a))
# Restricted to one end the components are ordered (force-like, moment-like).
_HERMITE_TRACE = {
    ("beta", "b"): [(1, -1.0), (0, 1.0)],
    ("beta", "a"): [(1, 1.0), (0, -1.0)],
    ("alpha", "b"): [(0, 1.0), (1, 1.0)],
    ("alpha", "a"): [(0, 1.0), (1, 1.0)],
}


def hermite_trace_role(space: FunctionSpace) -> str:
    """Omega_1 carries Hermite in the beta slot, Omega_2 in the alpha slot."""
    return "beta" if space.tag == 1 else "alpha"


def trace_matrix(space: FunctionSpace, tag: int, role: str | None = None) -> sp.csr_matrix:
    """Signed boolean matrix localizing the boundary DOFs of ``space`` on ``tag``.

    Each row selects one parent DOF.  ``RT`` rows carry the orientation sign
    so that the selected coefficient is the outward normal-flux moment;
    ``NED`` rows likewise give outward-oriented tangential moments.  DG
    spaces have no trace DOFs and return a matrix with zero rows.
    """
    if tag not in (GAMMA_1, GAMMA_2, GAMMA_INT):
        raise ValueError(f"unknown facet tag {tag!r}")
    if space.family in ("DG", "DG1d"):
        return sp.csr_matrix((0, space.ndofs))
    if space.dim == 1:
        lv, end = _endpoint_role(space, tag)
        role = role or hermite_trace_role(space)
        rows, cols, vals = [], [], []
        for r, (comp, sgn) in enumerate(_HERMITE_TRACE[(role, end)]):
            rows.append(r)
            cols.append(2 * lv + comp)
            vals.append(sgn)
        return csr_from_arrays(2, space.ndofs, rows, cols, vals)
    bs = boundary_space(space, tag)
    rows, cols, vals = [], [], []
    for f, rec in enumerate(space.facet_records(tag)):
        gdofs = space.cell_dofs[rec.cell, space.facet_local_dofs(rec)]
        sgn = float(rec.sign) if space.family in ("RT", "NED") else 1.0
        for td, gd in zip(bs.facet_dofs[f], gdofs):
            rows.append(td)
            cols.append(gd)
            vals.append(sgn)
    T = csr_from_arrays(bs.ndofs, space.ndofs, rows, cols, vals)
    T.data[:] = np.sign(T.data)  # shared vertices are visited twice
    return T


# ---------------------------------------------------------------------------
# Gram matrices and boundary matrices
# ---------------------------------------------------------------------------
def psi_interface(bs1: BoundarySpace, bs2: BoundarySpace) -> sp.csr_matrix:
    """Gram matrix ``Psi[l, k] = <bs1_l, bs2_k>`` over the common facets.

    In 1D the pairing of two endpoint jets is the identity.
    """
    if bs1.kind == "point" or bs2.kind == "point":
        if bs1.ndofs != bs2.ndofs:
            raise ValueError("endpoint trace spaces differ in size")
        return sp.identity(bs1.ndofs, format="csr")
    if bs1.facets != bs2.facets:
        raise ValueError("boundary spaces live on different facets")
    deg = bs1.degree + bs2.degree
    s, w = _gauss_interval(max(1, (deg + 2) // 2))
    rows, cols, vals = [], [], []
    for f in range(len(bs1.facets)):
        L = bs1.lengths[f]
        A = bs1.eval_facet(f, s)
        Bv = bs2.eval_facet(f, s)
        G = L * np.einsum("q,ql,qk->lk", w, A, Bv)
        d1, d2 = bs1.facet_dofs[f], bs2.facet_dofs[f]
        for i, l in enumerate(d1):
            for j, k in enumerate(d2):
                rows.append(l)
                cols.append(k)
                vals.append(G[i, j])
    return csr_from_arrays(bs1.ndofs, bs2.ndofs, rows, cols, vals)


def assemble_B(space: FunctionSpace, bspace: BoundarySpace, tag: int, role: str | None = None) -> sp.csr_matrix:
    """Boundary matrix ``B[m, k] = <trace(phi_m), chi_k>`` by direct facet quadrature.

    The trace is the outward normal component for ``RT``, the value for
    ``CG`` and, in 1D, the signed endpoint jet of the Hermite function
    evaluated from its closed form.
    """
    if space.family in ("DG", "DG1d"):
        return sp.csr_matrix((space.ndofs, bspace.ndofs))
    if space.dim == 1:
        lv, end = _endpoint_role(space, tag)
        role = role or hermite_trace_role(space)
        cell = 0 if end == "a" else len(space.cells) - 1
        t = np.array([0.0 if end == "a" else 1.0])
        val = space.tabulate_1d(t, 0)[cell, 0]
        der = space.tabulate_1d(t, 1)[cell, 0]
        jet = (val, der)
        rows, cols, vals = [], [], []
        for r, (comp, sgn) in enumerate(_HERMITE_TRACE[(role, end)]):
            for j, gd in enumerate(space.cell_dofs[cell]):
                v = sgn * jet[comp][j]
                if v != 0.0:
                    rows.append(gd)
                    cols.append(r)
                    vals.append(v)
        return csr_from_arrays(space.ndofs, bspace.ndofs, rows, cols, vals)
    recs = space.facet_records(tag)
    if [(r.lo, r.hi) for r in recs] != bspace.facets:
        raise ValueError("boundary space facets do not match the tag")
    deg = space.degree + bspace.degree
    s, w = _gauss_interval(max(1, (deg + 2) // 2))
    verts = space.mesh.vertices
    rows, cols, vals = [], [], []
    for f, rec in enumerate(recs):
        ref = space.facet_ref_points(rec, s)
        phi = space.tabulate(ref[None], cells=[rec.cell])[0]  # (nq, nloc[, 2])
        t = verts[rec.hi] - verts[rec.lo]
        L = np.linalg.norm(t)
        if space.family == "RT":
            n_out = rec.sign * np.array([t[1], -t[0]]) / L
            tr = phi @ n_out
        elif space.family == "NED":
            tr = phi @ (rec.sign * t / L)
        else:
            tr = phi
        chi = bspace.eval_facet(f, s)
        G = L * np.einsum("q,qm,qk->mk", w, tr, chi)
        for i, gd in enumerate(space.cell_dofs[rec.cell]):
            for j, kd in enumerate(bspace.facet_dofs[f]):
                if G[i, j] != 0.0:
                    rows.append(gd)
                    cols.append(kd)
                    vals.append(G[i, j])
    return csr_from_arrays(space.ndofs, bspace.ndofs, rows, cols, vals)


def interface_coupling(Psi, T_beta, T_alpha) -> sp.csr_matrix:
    """``L = (Psi T_beta)^T T_alpha`` (rows: beta DOFs of Omega_1, cols: alpha DOFs of Omega_2)."""
    Psi = sp.csr_matrix(Psi)
    if Psi.shape[0] != T_alpha.shape[0] or Psi.shape[1] != T_beta.shape[0]:
        raise ValueError(
            f"dimension mismatch: Psi {Psi.shape}, T_beta {T_beta.shape}, T_alpha {T_alpha.shape}"
        )
    L = (Psi @ T_beta).T @ T_alpha
    L = sp.csr_matrix(L)
    L.eliminate_zeros()
    L.sort_indices()
    return L


# ---------------------------------------------------------------------------
# volume operators
# ---------------------------------------------------------------------------
def _scatter(space_r, space_c, local):
    nc, nr, ncl = local.shape
    R = np.repeat(space_r.cell_dofs[:, :, None], ncl, axis=2)
    C = np.repeat(space_c.cell_dofs[:, None, :], nr, axis=1)
    return csr_from_arrays(space_r.ndofs, space_c.ndofs, R.ravel(), C.ravel(), local.ravel())


def _poly_degree(space) -> int:
    if space.family == "Hermite":
        return 3
    if space.family == "DG1d":
        return 1
    return space.degree


def assemble_mass(space: FunctionSpace, coefficient: float = 1.0) -> sp.csr_matrix:
    """Mass matrix ``coefficient * <phi_i, phi_j>``."""
    if not coefficient > 0:
        raise ValueError("mass coefficient must be positive")
    p = _poly_degree(space)
    if space.dim == 1:
        q = quadrature("interval", 2 * p)
        phi = space.tabulate_1d(q.points[:, 0], 0)
        wq = space.h[:, None] * q.weights[None, :]
        local = np.einsum("cq,cqi,cqj->cij", wq, phi, phi)
    else:
        q = quadrature("triangle", 2 * p)
        phi = space.tabulate(q.points)
        wq = space.detB[:, None] * q.weights[None, :]
        if space.value_shape:
            local = np.einsum("cq,cqid,cqjd->cij", wq, phi, phi)
        else:
            local = np.einsum("cq,cqi,cqj->cij", wq, phi, phi)
    M = _scatter(space, space, coefficient * local)
    return M


def assemble_d(space_row: FunctionSpace, space_col: FunctionSpace, operator: str) -> sp.csr_matrix:
    """``D[i, j] = <row_i, op(col_j)>`` with ``op`` in ``{dxx, div, grad}``."""
    op = operator.lower()
    allowed = {
        "dxx": ("Hermite", ("DG1d",)),
        "div": ("RT", ("DG",)),
        "grad": ("CG", ("NED",)),
    }
    if op not in allowed:
        raise ValueError(f"unknown operator {operator!r}")
    col_fam, row_fams = allowed[op]
    if space_col.family != col_fam or space_row.family not in row_fams:
        raise ValueError(f"operator {op} maps {col_fam} into {row_fams}, got {space_col.family}->{space_row.family}")
    if space_row.mesh is not space_col.mesh or space_row.tag != space_col.tag:
        raise ValueError("row and column spaces must live on the same subdomain")
    p = _poly_degree(space_row) + _poly_degree(space_col)
    if space_col.dim == 1:
        q = quadrature("interval", p)
        t = q.points[:, 0]
        wq = space_col.h[:, None] * q.weights[None, :]
        local = np.einsum("cq,cqi,cqj->cij", wq, space_row.tabulate_1d(t, 0), space_col.tabulate_1d(t, 2))
    else:
        q = quadrature("triangle", p)
        wq = space_col.detB[:, None] * q.weights[None, :]
        rv = space_row.tabulate(q.points)
        cd = space_col.tabulate_deriv(q.points)
        if op == "grad":
            local = np.einsum("cq,cqid,cqjd->cij", wq, rv, cd)
        else:
            local = np.einsum("cq,cqi,cqj->cij", wq, rv, cd)
    return _scatter(space_row, space_col, local)


# ---------------------------------------------------------------------------
# interpolation and projection helpers
# ---------------------------------------------------------------------------
def interpolate(space: FunctionSpace, func) -> np.ndarray:
    """Apply the DOF functionals of ``space`` to a callable field.

    ``func(x)`` takes physical points ``(n, dim)`` and returns values
    ``(n,)`` (scalars) or ``(n, 2)`` (vectors).  For 1D Hermite spaces
    ``func(x, d)`` must return the ``d``-th derivative.
    """
    c = np.zeros(space.ndofs)
    if space.dim == 1:
        if space.family == "Hermite":
            xs = space.mesh.vertices[np.array(sorted(space.vertex_index, key=space.vertex_index.get))]
            c[0::2] = func(xs, 0)
            c[1::2] = func(xs, 1)
        else:
            xa = space.a
            xb = space.a + space.h
            c[0::2] = func(xa, 0)
            c[1::2] = func(xb, 0)
        return c
    el = space.element
    mesh = space.mesh
    verts = mesh.vertices
    if space.family in ("CG", "DG"):
        for i in range(len(space.cells)):
            nodes = el.lagrange_nodes(tuple(space.signs[i]))
            x = space.x0[i] + nodes @ space.B[i].T
            c[space.cell_dofs[i]] = func(x)
        return c
    k = space.degree
    s, w = _gauss_interval(k + 2)
    q = quadrature("triangle", 2 * k + 2)
    mons = None
    if el.dofs_per_cell:
        from .elements import _mon, monomial_exponents

        mons = _mon(monomial_exponents(k - 2), q.points)
    for i, cell in enumerate(space.cells):
        tri = mesh.triangles[cell]
        vals = []
        for le in range(3):
            a0, a1 = LOCAL_EDGES[le]
            va, vb = tri[a0], tri[a1]
            lo, hi = min(va, vb), max(va, vb)
            t = verts[hi] - verts[lo]
            x = verts[lo] + s[:, None] * t
            f = func(x)
            d = np.array([t[1], -t[0]]) if space.family == "RT" else t
            comp = f @ d
            for j in range(k):
                vals.append((w * shifted_legendre(j, s)) @ comp)
        if el.dofs_per_cell:
            x = space.x0[i] + q.points @ space.B[i].T
            f = func(x)
            if space.family == "RT":
                # <v, B^{-T} e_d m> over the physical cell
                tv = f @ space.Binv[i].T
            else:
                # <v, B e_d m> / det B over the physical cell
                tv = f @ space.B[i] / space.detB[i]
            for dcomp in range(2):
                for mm in range(mons.shape[1]):
                    vals.append(space.detB[i] * (q.weights * mons[:, mm]) @ tv[:, dcomp])
        c[space.cell_dofs[i]] = vals
    return c


def evaluate(space: FunctionSpace, coeffs, ref_pts, deriv: bool = False) -> np.ndarray:
    """Evaluate a discrete field at reference points on every cell."""
    coeffs = np.asarray(coeffs)
    loc = coeffs[space.cell_dofs]  # (nc, nloc)
    if space.dim == 1:
        tab = space.tabulate_1d(ref_pts, int(deriv))
        return np.einsum("cqi,ci->cq", tab, loc)
    tab = space.tabulate_deriv(ref_pts) if deriv else space.tabulate(ref_pts)
    if tab.ndim == 4:
        return np.einsum("cqid,ci->cqd", tab, loc)
    return np.einsum("cqi,ci->cq", tab, loc)


def boundary_projection(bspace: BoundarySpace, func, mesh) -> np.ndarray:
    """L2 projection of ``func(x)`` onto a 2D boundary space."""
    k = bspace.degree
    s, w = _gauss_interval(k + 4)
    verts = mesh.vertices
    rows, cols, vals = [], [], []
    rhs = np.zeros(bspace.ndofs)
    for f, (lo, hi) in enumerate(bspace.facets):
        L = bspace.lengths[f]
        x = verts[lo] + s[:, None] * (verts[hi] - verts[lo])
        chi = bspace.eval_facet(f, s)
        G = L * np.einsum("q,ql,qk->lk", w, chi, chi)
        b = L * (w * func(x)) @ chi
        d = bspace.facet_dofs[f]
        rhs[d] += b
        for i, a in enumerate(d):
            for j, bb in enumerate(d):
                rows.append(a)
                cols.append(bb)
                vals.append(G[i, j])
    Mb = csr_from_arrays(bspace.ndofs, bspace.ndofs, rows, cols, vals)
    from scipy.sparse.linalg import spsolve

    return np.atleast_1d(spsolve(Mb.tocsc(), rhs))


def inclusion_matrix(src: FunctionSpace, dst: FunctionSpace, operator: str) -> sp.csr_matrix:
    """Exact coefficients of ``op(phi_j)`` in ``dst`` for ``op(CG_k)`` inside ``dst``.

    ``operator="grad"`` maps ``CG_k`` into ``NED_k``; ``operator="rot"`` maps
    ``CG_k`` into ``RT_k`` with ``rot f = (d_y f, -d_x f)``.  The pulled-back
    fields are ``grad_xi`` and ``rot_xi`` of the reference basis, so the
    result does not depend on the cell geometry beyond orientation.
    """
    want = {"grad": "NED", "rot": "RT"}
    if operator not in want or src.family != "CG" or dst.family != want[operator]:
        raise ValueError(f"{operator} does not map {src.family} into {dst.family}")
    if src.mesh is not dst.mesh or src.tag != dst.tag or src.degree != dst.degree:
        raise ValueError("spaces must share mesh, subdomain and degree")
    entries = {}
    for i in range(len(src.cells)):
        Ccg = src.coeffs[i]

        def field(pts, Ccg=Ccg):
            g = np.einsum("bp,qpd->qbd", Ccg, src.element.prime_grad(pts))
            if operator == "rot":
                g = np.stack([g[:, :, 1], -g[:, :, 0]], axis=-1)
            return g

        loc = dst.element.apply_dofs(field, tuple(dst.signs[i]))
        for a, gi in enumerate(dst.cell_dofs[i]):
            for b, gj in enumerate(src.cell_dofs[i]):
                # shared DOFs get identical values from each neighbouring cell
                entries[(int(gi), int(gj))] = loc[a, b]
    keys = np.array(list(entries.keys()), dtype=np.int64).reshape(-1, 2)
    vals = np.array(list(entries.values()))
    vals[np.abs(vals) < 1e-14] = 0.0
    G = sp.coo_matrix((vals, (keys[:, 0], keys[:, 1])), shape=(dst.ndofs, src.ndofs)).tocsr()
    G.eliminate_zeros()
    return G
