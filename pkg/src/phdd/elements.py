"""Reference finite elements and quadrature rules.

One dimension: cubic Hermite (value and slope DOFs) and discontinuous linears.
Triangles: Lagrange ``CG_k``, discontinuous ``DG_k``, Raviart-Thomas ``RT_k``
and first-kind Nedelec ``NED_k`` (``RT_1``/``NED_1`` are the lowest order with
three edge DOFs).

Triangle bases are built by a single dual-basis engine.  A "prime" spanning set
on the reference triangle is mapped to the physical cell, the DOF functionals
are applied to it to form a Vandermonde-type matrix ``V`` and the nodal basis
coefficients are ``inv(V).T``.  The maps are affine Piola transforms:

* scalars: ``phi(x) = phi_hat(xi)``;
* ``RT``: ``phi = B phi_hat / det B`` (divergence scales by ``1 / det B``);
* ``NED``: ``phi = B^{-T} phi_hat`` (scalar curl scales by ``1 / det B``).

With these maps and the interior moments chosen against mapped test vectors,
``V`` depends only on the orientation pattern of the three cell edges, so the
inverse is cached per pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
# local edge i is opposite local vertex i; counterclockwise start/end vertices
LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))

FAMILIES_2D = ("CG", "DG", "RT", "NED")
FAMILIES_1D = ("Hermite", "DG1d")


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class QuadratureRule:
    """Points in reference coordinates (interval ``[0,1]`` or unit triangle)."""

    points: np.ndarray
    weights: np.ndarray
    order: int


@lru_cache(maxsize=None)
def _gauss_interval(n: int):
    x, w = npleg.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def quadrature(domain: str, order: int) -> QuadratureRule:
    """Quadrature rule exact for polynomials of total degree ``order``.

    Interval rules are Gauss-Legendre on ``[0, 1]``.  Triangle rules are the
    centroid rule for ``order <= 1`` and a collapsed (Duffy) Gauss-Legendre by
    Gauss-Jacobi product otherwise.
    """
    if order < 0 or order > 10:
        raise ValueError("quadrature order must be in [0, 10]")
    n = max(1, math.ceil((order + 1) / 2))
    if domain == "interval":
        x, w = _gauss_interval(n)
        return QuadratureRule(x[:, None], w.copy(), order)
    if domain == "triangle":
        if order <= 1:
            return QuadratureRule(np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5]), order)
        u, wu = _gauss_interval(n)
        s, ws = roots_jacobi(n, 1.0, 0.0)
        v = 0.5 * (1.0 + s)
        wv = 0.25 * ws
        U, Vv = np.meshgrid(u, v, indexing="ij")
        WU, WV = np.meshgrid(wu, wv, indexing="ij")
        pts = np.column_stack([(U * (1.0 - Vv)).ravel(), Vv.ravel()])
        return QuadratureRule(pts, (WU * WV).ravel(), order)
    raise ValueError(f"unknown quadrature domain {domain!r}")


# ---------------------------------------------------------------------------
# 1D elements
# ---------------------------------------------------------------------------
def hermite_eval(t, deriv: int = 0) -> np.ndarray:
    """Cubic Hermite shape functions ``(h00, h10, h01, h11)`` on ``[0, 1]``.

    Derivatives are with respect to the reference coordinate.  On a physical
    cell of length ``h`` the slope functions ``h10, h11`` are multiplied by
    ``h`` and each derivative order divides by ``h``.
    """
    t = np.asarray(t, dtype=float)
    if deriv == 0:
        vals = [2 * t**3 - 3 * t**2 + 1, t**3 - 2 * t**2 + t, -2 * t**3 + 3 * t**2, t**3 - t**2]
    elif deriv == 1:
        vals = [6 * t**2 - 6 * t, 3 * t**2 - 4 * t + 1, -6 * t**2 + 6 * t, 3 * t**2 - 2 * t]
    elif deriv == 2:
        vals = [12 * t - 6, 6 * t - 4, -12 * t + 6, 6 * t - 2]
    else:
        raise ValueError("Hermite derivative order must be 0, 1 or 2")
    return np.stack(np.broadcast_arrays(*vals), axis=-1)


def dg1d_eval(t, deriv: int = 0) -> np.ndarray:
    """Linear Lagrange functions ``(1 - t, t)`` on ``[0, 1]``."""
    t = np.asarray(t, dtype=float)
    if deriv == 0:
        return np.stack([1.0 - t, t], axis=-1)
    if deriv == 1:
        return np.stack(np.broadcast_arrays(-np.ones_like(t), np.ones_like(t)), axis=-1)
    if deriv >= 2:
        return np.zeros(t.shape + (2,))
    raise ValueError("negative derivative order")


# ---------------------------------------------------------------------------
# monomials on the reference triangle
# ---------------------------------------------------------------------------
@lru_cache(maxsize=None)
def monomial_exponents(k: int) -> tuple:
    """Exponents ``(a, b)`` of ``xi^a eta^b`` with ``a + b <= k``, graded order."""
    return tuple((d - b, b) for d in range(k + 1) for b in range(d + 1))


def _mon(exps, pts, dx=0, dy=0):
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0:1], pts[:, 1:2]
    a = np.array([e[0] for e in exps], dtype=float)
    b = np.array([e[1] for e in exps], dtype=float)
    ca = np.ones_like(a)
    cb = np.ones_like(b)
    aa, bb = a.copy(), b.copy()
    for _ in range(dx):
        ca = ca * aa
        aa = aa - 1
    for _ in range(dy):
        cb = cb * bb
        bb = bb - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        val = ca * cb * np.where(ca * cb != 0, x ** np.maximum(aa, 0) * y ** np.maximum(bb, 0), 0.0)
    return val


def shifted_legendre(j: int, s) -> np.ndarray:
    """Legendre polynomial of degree ``j`` on ``[0, 1]``."""
    c = np.zeros(j + 1)
    c[j] = 1.0
    return npleg.legval(2.0 * np.asarray(s, dtype=float) - 1.0, c)


# ---------------------------------------------------------------------------
# reference elements
# ---------------------------------------------------------------------------
class ReferenceElement:
    """Triangle element defined by a prime spanning set and DOF functionals.

    Attributes:
        family: one of ``CG``, ``DG``, ``RT``, ``NED``.
        degree: polynomial degree ``k`` (``RT_k``/``NED_k`` contain ``P_{k-1}``
            fully; ``DG_k`` is the full ``P_k``).
        value_shape: ``()`` for scalars, ``(2,)`` for vector families.
        dofs_per_vertex, dofs_per_edge, dofs_per_cell: entity DOF counts; the
            local DOF order is vertices, then edges (local edge ``i`` opposite
            vertex ``i``), then interior.
    """

    def __init__(self, family: str, degree: int):
        if family not in FAMILIES_2D:
            raise ValueError(f"unknown triangle family {family!r}")
        k = int(degree)
        if family in ("RT", "NED", "CG") and not 1 <= k <= 3:
            raise ValueError(f"unsupported degree {k} for {family}")
        if family == "DG" and not 0 <= k <= 3:
            raise ValueError(f"unsupported degree {k} for DG")
        self.family = family
        self.degree = k
        self.exps = monomial_exponents(k)
        nm = len(self.exps)
        idx = {e: i for i, e in enumerate(self.exps)}
        if family in ("CG", "DG"):
            self.value_shape = ()
            self.prime = np.eye(nm)
            if family == "CG":
                self.dofs_per_vertex, self.dofs_per_edge = 1, k - 1
                self.dofs_per_cell = (k - 1) * (k - 2) // 2
            else:
                self.dofs_per_vertex, self.dofs_per_edge, self.dofs_per_cell = 0, 0, nm
        else:
            self.value_shape = (2,)
            rows = []
            for e in monomial_exponents(k - 1):
                px = np.zeros(nm)
                px[idx[e]] = 1.0
                rows.append((px, np.zeros(nm)))
                rows.append((np.zeros(nm), px.copy()))
            for b in range(k):
                a = k - 1 - b
                px, py = np.zeros(nm), np.zeros(nm)
                if family == "RT":
                    px[idx[(a + 1, b)]] = 1.0
                    py[idx[(a, b + 1)]] = 1.0
                else:
                    px[idx[(a, b + 1)]] = -1.0
                    py[idx[(a + 1, b)]] = 1.0
                rows.append((px, py))
            self.prime = np.stack([np.stack(r, axis=-1) for r in rows])  # (np, nm, 2)
            self.dofs_per_vertex, self.dofs_per_edge = 0, k
            self.dofs_per_cell = k * (k - 1)
        self.ndofs = 3 * self.dofs_per_vertex + 3 * self.dofs_per_edge + self.dofs_per_cell
        if self.ndofs != self.prime.shape[0]:
            raise AssertionError("prime set and DOF count disagree")
        self._coeff_cache: dict = {}

    # -- prime evaluation ----------------------------------------------------
    def prime_values(self, pts) -> np.ndarray:
        """Prime values: ``(npts, nprime)`` or ``(npts, nprime, 2)``."""
        m = _mon(self.exps, pts)
        if self.value_shape == ():
            return m @ self.prime.T
        return np.einsum("qm,pmc->qpc", m, self.prime)

    def prime_grad(self, pts) -> np.ndarray:
        """Scalar families: reference gradients ``(npts, nprime, 2)``."""
        gx = _mon(self.exps, pts, dx=1) @ self.prime.T
        gy = _mon(self.exps, pts, dy=1) @ self.prime.T
        return np.stack([gx, gy], axis=-1)

    def prime_div(self, pts) -> np.ndarray:
        dx = _mon(self.exps, pts, dx=1)
        dy = _mon(self.exps, pts, dy=1)
        return dx @ self.prime[:, :, 0].T + dy @ self.prime[:, :, 1].T

    def prime_curl(self, pts) -> np.ndarray:
        dx = _mon(self.exps, pts, dx=1)
        dy = _mon(self.exps, pts, dy=1)
        return dx @ self.prime[:, :, 1].T - dy @ self.prime[:, :, 0].T

    # -- DOF functionals -----------------------------------------------------
    def lagrange_nodes(self, signs=(1, 1, 1)) -> np.ndarray:
        """Reference nodes for the scalar families in local DOF order."""
        k = self.degree
        if self.family == "DG":
            if k == 0:
                return np.array([[1.0 / 3.0, 1.0 / 3.0]])
            return np.array([[a / k, b / k] for (a, b) in _lattice(k)])
        nodes = [REF_VERTICES[i] for i in range(3)]
        for i, (s0, s1) in enumerate(LOCAL_EDGES):
            p0, p1 = REF_VERTICES[s0], REF_VERTICES[s1]
            if signs[i] < 0:
                p0, p1 = p1, p0
            for m in range(1, k):
                nodes.append(p0 + (m / k) * (p1 - p0))
        for a in range(1, k):
            for b in range(1, k - a):
                nodes.append(np.array([a / k, b / k]))
        return np.array(nodes)

    def dual_matrix(self, signs=(1, 1, 1)) -> np.ndarray:
        """``V[i, j] = l_i(prime_j)`` for the edge orientation pattern ``signs``.

        ``signs[i] = +1`` means the DOF parameter on local edge ``i`` runs in
        the counterclockwise direction of the cell.
        """
        if self.value_shape == ():
            return self.prime_values(self.lagrange_nodes(signs))
        k = self.degree
        s, w = _gauss_interval(k + 1)
        rows = []
        for i, (a0, a1) in enumerate(LOCAL_EDGES):
            p0, p1 = REF_VERTICES[a0], REF_VERTICES[a1]
            if signs[i] < 0:
                p0, p1 = p1, p0
            t = p1 - p0
            pts = p0 + s[:, None] * t
            vals = self.prime_values(pts)  # (nq, np, 2)
            d = np.array([t[1], -t[0]]) if self.family == "RT" else t
            comp = vals @ d  # (nq, np)
            for j in range(k):
                rows.append((w * shifted_legendre(j, s)) @ comp)
        if self.dofs_per_cell:
            q = quadrature("triangle", 2 * k)
            vals = self.prime_values(q.points)
            mons = _mon(monomial_exponents(k - 2), q.points)
            for c in range(2):
                for m in range(mons.shape[1]):
                    rows.append((q.weights * mons[:, m]) @ vals[:, :, c])
        return np.array(rows)

    def apply_dofs(self, field, signs=(1, 1, 1)) -> np.ndarray:
        """Apply the vector DOF functionals to reference fields.

        ``field(pts)`` returns pulled-back vectors ``(npts, nfun, 2)`` (for
        ``RT``: ``det B B^{-1} v``; for ``NED``: ``B^T v``).  Returns the
        matrix ``F[i, f] = l_i(field_f)``.
        """
        if self.value_shape == ():
            raise TypeError("apply_dofs is defined for vector families")
        k = self.degree
        s, w = _gauss_interval(k + 1)
        rows = []
        for i, (a0, a1) in enumerate(LOCAL_EDGES):
            p0, p1 = REF_VERTICES[a0], REF_VERTICES[a1]
            if signs[i] < 0:
                p0, p1 = p1, p0
            t = p1 - p0
            d = np.array([t[1], -t[0]]) if self.family == "RT" else t
            comp = field(p0 + s[:, None] * t) @ d
            for j in range(k):
                rows.append((w * shifted_legendre(j, s)) @ comp)
        if self.dofs_per_cell:
            q = quadrature("triangle", 2 * k)
            vals = field(q.points)
            mons = _mon(monomial_exponents(k - 2), q.points)
            for c in range(2):
                for m in range(mons.shape[1]):
                    rows.append((q.weights * mons[:, m]) @ vals[:, :, c])
        return np.array(rows)

    def coefficients(self, signs=(1, 1, 1)) -> np.ndarray:
        """Basis coefficients ``C`` with ``phi_i = sum_j C[i, j] prime_j``."""
        key = tuple(int(x) for x in signs)
        if self.value_shape == () and self.degree <= 2:
            key = (1, 1, 1)  # node sets do not depend on orientation for k <= 2
        C = self._coeff_cache.get(key)
        if C is None:
            C = np.linalg.inv(self.dual_matrix(key)).T
            self._coeff_cache[key] = C
        return C

    # -- reference-cell basis evaluation (all edges counterclockwise) ---------
    def tabulate(self, pts, signs=(1, 1, 1)) -> np.ndarray:
        C = self.coefficients(signs)
        P = self.prime_values(pts)
        if self.value_shape == ():
            return P @ C.T
        return np.einsum("qpc,ip->qic", P, C)

    def tabulate_deriv(self, pts, signs=(1, 1, 1)) -> np.ndarray:
        """Gradient (scalars), divergence (RT) or scalar curl (NED)."""
        C = self.coefficients(signs)
        if self.family in ("CG", "DG"):
            return np.einsum("qpc,ip->qic", self.prime_grad(pts), C)
        if self.family == "RT":
            return self.prime_div(pts) @ C.T
        return self.prime_curl(pts) @ C.T


def _lattice(k):
    return [(a, b) for b in range(k + 1) for a in range(k + 1 - b)]


@lru_cache(maxsize=None)
def reference_element(family: str, degree: int) -> ReferenceElement:
    return ReferenceElement(family, degree)


def lagrange_eval(k: int, point, deriv: int = 0) -> np.ndarray:
    """Degree-``k`` Lagrange basis on the reference triangle.

    Returns values ``(nbasis,)`` or gradients ``(nbasis, 2)`` at one point.
    """
    el = reference_element("CG", k)
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    if deriv == 0:
        return el.tabulate(pts)[0]
    if deriv == 1:
        return el.tabulate_deriv(pts)[0]
    raise ValueError("deriv must be 0 or 1")


def dg_eval(k: int, point, deriv: int = 0) -> np.ndarray:
    """Discontinuous degree-``k`` basis on the reference triangle."""
    el = reference_element("DG", k)
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    if deriv == 0:
        return el.tabulate(pts)[0]
    if deriv == 1:
        return el.tabulate_deriv(pts)[0]
    raise ValueError("deriv must be 0 or 1")


def rt_eval(k: int, point) -> np.ndarray:
    """``RT_k`` basis on the reference triangle, fluxes outward; shape ``(nbasis, 2)``."""
    if k not in (1, 2, 3):
        raise ValueError(f"unsupported RT degree {k}")
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    return reference_element("RT", k).tabulate(pts)[0]


def ned_eval(k: int, point) -> np.ndarray:
    """``NED_k`` basis on the reference triangle, tangents counterclockwise."""
    if k not in (1, 2, 3):
        raise ValueError(f"unsupported NED degree {k}")
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    return reference_element("NED", k).tabulate(pts)[0]
