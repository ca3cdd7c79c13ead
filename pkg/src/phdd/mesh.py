"""Decomposed interval and unit-square meshes with boundary-facet tags.

Tag conventions used throughout the package:

* subdomain tags: ``1`` for the Dirichlet-side subdomain Omega_1, ``2`` for the
  Neumann-side subdomain Omega_2;
* facet tags: ``GAMMA_1 = 1`` (Dirichlet boundary of Omega_1), ``GAMMA_2 = 2``
  (Neumann boundary of Omega_2) and ``GAMMA_INT = 3`` (shared interface).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GAMMA_1 = 1
GAMMA_2 = 2
GAMMA_INT = 3
FACET_TAGS = (GAMMA_1, GAMMA_2, GAMMA_INT)


class MeshFormatError(ValueError):
    """Malformed mesh file; the message carries the 1-based line number."""


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Interval ``[0, L]`` split at ``x_int`` into Omega_2 (left) and Omega_1 (right)."""

    vertices: np.ndarray
    cells: np.ndarray
    cell_tags: np.ndarray
    gamma1_vertex: int
    gamma2_vertex: int
    gamma_int_vertex: int

    dim = 1

    @property
    def length(self) -> float:
        return float(self.vertices[-1] - self.vertices[0])

    def cells_of(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.cell_tags == tag)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mesh1D):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.cells, other.cells)
            and np.array_equal(self.cell_tags, other.cell_tags)
            and (self.gamma1_vertex, self.gamma2_vertex, self.gamma_int_vertex)
            == (other.gamma1_vertex, other.gamma2_vertex, other.gamma_int_vertex)
        )


def build_interval_decomposed(L: float, n1: int, n2: int, x_int: float) -> Mesh1D:
    """Uniform cells on ``[0, x_int]`` (Omega_2, n2 cells) and ``[x_int, L]`` (Omega_1, n1 cells)."""
    if n1 < 1 or n2 < 1:
        raise ValueError("cell counts must be at least 1")
    if not (0.0 < x_int < L):
        raise ValueError("x_int must lie strictly inside (0, L)")
    left = np.linspace(0.0, x_int, n2 + 1)
    right = np.linspace(x_int, L, n1 + 1)
    verts = np.concatenate([left, right[1:]])
    nc = n1 + n2
    cells = np.column_stack([np.arange(nc), np.arange(1, nc + 1)])
    tags = np.array([2] * n2 + [1] * n1, dtype=np.int64)
    return Mesh1D(verts, cells, tags, gamma1_vertex=nc, gamma2_vertex=0, gamma_int_vertex=n2)


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Triangulation with subdomain tags and tagged boundary edges.

    Boundary edges are stored with the orientation that is counterclockwise
    for the owning cell; interface edges are counterclockwise for their
    Omega_1 cell.  With tangent ``t`` the outward normal is ``(t_y, -t_x)``,
    so the interface normal points from Omega_1 into Omega_2.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    cell_tags: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    _topo: dict = field(default_factory=dict, repr=False, compare=False)

    dim = 2

    def __post_init__(self):
        areas = self.signed_areas()
        if areas.size and areas.min() <= 0.0:
            bad = int(np.argmin(areas))
            raise ValueError(f"triangle {bad} has non-positive signed area")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mesh2D):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("vertices", "triangles", "cell_tags", "boundary_edges", "boundary_tags")
        )

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def cells_of(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.cell_tags == tag)

    # --- edge topology -------------------------------------------------
    def _build_topology(self):
        if self._topo:
            return self._topo
        tri = self.triangles
        # local edge i is opposite local vertex i: (v1,v2), (v2,v0), (v0,v1)
        loc = np.array([[1, 2], [2, 0], [0, 1]])
        pairs = tri[:, loc]  # (nt, 3, 2)
        lo = pairs.min(axis=2)
        hi = pairs.max(axis=2)
        key = np.stack([lo.ravel(), hi.ravel()], axis=1)
        edges, inv = np.unique(key, axis=0, return_inverse=True)
        cell_edges = inv.reshape(-1, 3)
        # +1 when the local counterclockwise direction matches low -> high
        cell_edge_signs = np.where(pairs[:, :, 0] < pairs[:, :, 1], 1, -1)
        self._topo["edges"] = edges
        self._topo["cell_edges"] = cell_edges
        self._topo["cell_edge_signs"] = cell_edge_signs
        index = {(int(a), int(b)): i for i, (a, b) in enumerate(edges)}
        self._topo["edge_index"] = index
        return self._topo

    @property
    def edges(self) -> np.ndarray:
        return self._build_topology()["edges"]

    @property
    def cell_edges(self) -> np.ndarray:
        return self._build_topology()["cell_edges"]

    @property
    def cell_edge_signs(self) -> np.ndarray:
        return self._build_topology()["cell_edge_signs"]

    def edge_id(self, a: int, b: int) -> int:
        return self._build_topology()["edge_index"][(min(a, b), max(a, b))]


def build_square_decomposed(n: int) -> Mesh2D:
    """Structured ``n x n`` triangulation of the unit square split along ``y = x``.

    Each square is cut by its lower-left to upper-right diagonal, so the global
    diagonal is a union of mesh edges.  Cells below the diagonal form Omega_1.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs)
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris, tags = [], []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tags.append(1 if i >= j else 2)
            tris.append((a, c, d))
            tags.append(1 if i > j else 2)
    tris = np.array(tris, dtype=np.int64)
    tags = np.array(tags, dtype=np.int64)

    bedges, btags = [], []
    # bottom (y=0) and right (x=1) sides belong to Omega_1, counterclockwise
    for i in range(n):
        bedges.append((vid(i, 0), vid(i + 1, 0)))
        btags.append(GAMMA_1)
    for j in range(n):
        bedges.append((vid(n, j), vid(n, j + 1)))
        btags.append(GAMMA_1)
    # top (y=1) and left (x=0) sides belong to Omega_2
    for i in range(n):
        bedges.append((vid(i + 1, n), vid(i, n)))
        btags.append(GAMMA_2)
    for j in range(n):
        bedges.append((vid(0, j + 1), vid(0, j)))
        btags.append(GAMMA_2)
    # interface: counterclockwise for the Omega_1 cell, i.e. from (i+1,i+1) to (i,i)
    for i in range(n):
        bedges.append((vid(i + 1, i + 1), vid(i, i)))
        btags.append(GAMMA_INT)
    bedges = np.array(bedges, dtype=np.int64)
    btags = np.array(btags, dtype=np.int64)
    order = _facet_order(verts, bedges, btags)
    return Mesh2D(verts, tris, tags, bedges[order], btags[order])


def _facet_order(verts, bedges, btags):
    mid = 0.5 * (verts[bedges[:, 0]] + verts[bedges[:, 1]])
    return np.lexsort((mid[:, 1], mid[:, 0], btags))


def facets_by_tag(mesh, tag: int):
    """Facets carrying ``tag``, ordered lexicographically by midpoint.

    For a :class:`Mesh1D` the facets are vertex indices; for a :class:`Mesh2D`
    they are oriented ``(v0, v1)`` vertex pairs.
    """
    if tag not in FACET_TAGS:
        raise ValueError(f"unknown facet tag {tag!r}")
    if isinstance(mesh, Mesh1D):
        v = {GAMMA_1: mesh.gamma1_vertex, GAMMA_2: mesh.gamma2_vertex, GAMMA_INT: mesh.gamma_int_vertex}
        return [v[tag]]
    sel = np.flatnonzero(mesh.boundary_tags == tag)
    edges = mesh.boundary_edges[sel]
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    order = np.lexsort((mid[:, 1], mid[:, 0]))
    return [tuple(int(x) for x in e) for e in edges[order]]


def write_mesh(mesh: Mesh2D, path) -> None:
    """Write the ``ph-mesh 2d 1`` text format."""
    lines = ["ph-mesh 2d 1", f"{len(mesh.vertices)} {len(mesh.triangles)} {len(mesh.boundary_edges)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c} {t}" for (a, b, c), t in zip(mesh.triangles, mesh.cell_tags)]
    lines += [f"{a} {b} {t}" for (a, b), t in zip(mesh.boundary_edges, mesh.boundary_tags)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_mesh(path) -> Mesh2D:
    """Read a ``ph-mesh 2d 1`` file; errors report the offending line number."""
    raw = Path(path).read_text(encoding="ascii").split("\n")
    if raw and raw[-1] == "":
        raw = raw[:-1]
    pos = 0

    def take(nfields, conv, lineno_hint):
        nonlocal pos
        if pos >= len(raw):
            raise MeshFormatError(f"line {pos + 1}: unexpected end of file ({lineno_hint})")
        parts = raw[pos].split()
        pos += 1
        if len(parts) != nfields:
            raise MeshFormatError(f"line {pos}: expected {nfields} fields, got {len(parts)}")
        try:
            return [c(p) for c, p in zip(conv, parts)]
        except ValueError as exc:
            raise MeshFormatError(f"line {pos}: {exc}") from None

    if not raw or raw[0].strip() != "ph-mesh 2d 1":
        raise MeshFormatError("line 1: expected header 'ph-mesh 2d 1'")
    pos = 1
    nv, nt, nbe = take(3, (int, int, int), "counts")
    verts = np.array([take(2, (float, float), "vertex") for _ in range(nv)], dtype=float).reshape(nv, 2)
    tri_lines_start = pos
    tri = np.array([take(4, (int,) * 4, "triangle") for _ in range(nt)], dtype=np.int64).reshape(nt, 4)
    be = np.array([take(3, (int,) * 3, "boundary edge") for _ in range(nbe)], dtype=np.int64).reshape(nbe, 3)
    if pos != len(raw):
        raise MeshFormatError(f"line {pos + 1}: trailing content")
    if tri.size and (tri[:, :3].min() < 0 or tri[:, :3].max() >= nv):
        raise MeshFormatError("triangle references a vertex out of range")
    p = verts[tri[:, :3]] if nt else np.zeros((0, 3, 2))
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    bad = np.flatnonzero(area <= 0.0)
    if bad.size:
        raise MeshFormatError(f"line {tri_lines_start + bad[0] + 1}: triangle has non-positive area")
    if be.size and not np.isin(be[:, 2], FACET_TAGS).all():
        raise MeshFormatError("boundary tag outside {1, 2, 3}")
    return Mesh2D(verts, tri[:, :3].copy(), tri[:, 3].copy(), be[:, :2].copy(), be[:, 2].copy())
