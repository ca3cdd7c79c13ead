from math import factorial

import numpy as np
import pytest

from phdd.elements import (
    LOCAL_EDGES,
    REF_VERTICES,
    dg1d_eval,
    dg_eval,
    hermite_eval,
    lagrange_eval,
    ned_eval,
    quadrature,
    reference_element,
    rt_eval,
)


def edge_integral(func, j, n=6):
    """Integrate ``func(point, tangent)`` along local edge ``j`` (counterclockwise)."""
    s, w = np.polynomial.legendre.leggauss(n)
    s, w = 0.5 * (s + 1), 0.5 * w
    p0, p1 = REF_VERTICES[LOCAL_EDGES[j][0]], REF_VERTICES[LOCAL_EDGES[j][1]]
    t = p1 - p0
    return sum(wi * func(p0 + si * t, t) for si, wi in zip(s, w))


class TestQuadrature:
    def test_interval_midpoint(self):
        q = quadrature("interval", 1)
        assert np.allclose(q.points.ravel(), [0.5]) and np.allclose(q.weights, [1.0])

    def test_triangle_centroid(self):
        q = quadrature("triangle", 1)
        assert np.allclose(q.points, [[1 / 3, 1 / 3]]) and np.allclose(q.weights, [0.5])

    def test_x2y2(self):
        q = quadrature("triangle", 4)
        val = np.sum(q.weights * q.points[:, 0] ** 2 * q.points[:, 1] ** 2)
        assert abs(val - 1 / 180) <= 1e-15

    @pytest.mark.parametrize("order", range(0, 11))
    def test_triangle_monomials(self, order):
        q = quadrature("triangle", order)
        assert np.all(q.weights > 0)
        for a in range(order + 1):
            for b in range(order + 1 - a):
                exact = factorial(a) * factorial(b) / factorial(a + b + 2)
                val = np.sum(q.weights * q.points[:, 0] ** a * q.points[:, 1] ** b)
                assert abs(val - exact) <= 1e-14

    @pytest.mark.parametrize("order", range(0, 11))
    def test_interval_monomials(self, order):
        q = quadrature("interval", order)
        assert np.all(q.weights > 0)
        for a in range(order + 1):
            assert abs(np.sum(q.weights * q.points[:, 0] ** a) - 1 / (a + 1)) <= 1e-14

    def test_bad_order(self):
        with pytest.raises(ValueError):
            quadrature("triangle", 11)
        with pytest.raises(ValueError):
            quadrature("square", 2)


class TestHermite:
    def test_left_node(self):
        assert np.allclose(hermite_eval(0.0, 0), [1, 0, 0, 0])

    def test_midpoint(self):
        assert np.allclose(hermite_eval(0.5, 0), [0.5, 0.125, 0.5, -0.125])

    def test_right_slope(self):
        assert np.allclose(hermite_eval(1.0, 1), [0, 0, 0, 1])

    def test_duality(self):
        D = np.array([hermite_eval(0.0, 0), hermite_eval(0.0, 1), hermite_eval(1.0, 0), hermite_eval(1.0, 1)])
        assert np.allclose(D, np.eye(4), atol=1e-12)

    def test_derivatives_match_finite_differences(self):
        t = np.linspace(0.1, 0.9, 5)
        eps = 1e-6
        for d in (1, 2):
            fd = (hermite_eval(t + eps, d - 1) - hermite_eval(t - eps, d - 1)) / (2 * eps)
            assert np.allclose(hermite_eval(t, d), fd, atol=1e-6)

    def test_bad_derivative(self):
        with pytest.raises(ValueError):
            hermite_eval(0.5, 3)


class TestDG1D:
    def test_mass(self):
        h = 0.3
        q = quadrature("interval", 2)
        phi = dg1d_eval(q.points[:, 0])
        M = h * (phi * q.weights[:, None]).T @ phi
        assert np.allclose(M, h / 6 * np.array([[2, 1], [1, 2]]), atol=1e-15)


class TestLagrange:
    def test_vertex(self):
        assert np.allclose(lagrange_eval(1, (0.0, 0.0)), [1, 0, 0])

    def test_centroid(self):
        assert np.allclose(lagrange_eval(1, (1 / 3, 1 / 3)), [1 / 3] * 3)

    def test_quadratic_edge_midpoint(self):
        v = lagrange_eval(2, (0.5, 0.0))
        assert np.allclose(v[:3], 0, atol=1e-14)
        # local edge 2 joins vertices 0 and 1; its node is DOF 3 + 2
        expected = np.zeros(6)
        expected[5] = 1.0
        assert np.allclose(v, expected, atol=1e-14)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_partition_of_unity(self, k, rng):
        pts = rng.dirichlet([1, 1, 1], size=10)[:, :2]
        for p in pts:
            assert abs(lagrange_eval(k, p).sum() - 1.0) <= 1e-12
            assert np.allclose(lagrange_eval(k, p, deriv=1).sum(axis=0), 0, atol=1e-11)

    def test_dg_shares_polynomials(self, rng):
        p = rng.dirichlet([1, 1, 1])[:2]
        assert np.allclose(dg_eval(1, p), lagrange_eval(1, p))
        assert np.allclose(dg_eval(0, p), [1.0])

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_dg_partition_of_unity(self, k, rng):
        p = rng.dirichlet([1, 1, 1])[:2]
        assert abs(dg_eval(k, p).sum() - 1) <= 1e-12

    def test_dg0_mass(self):
        q = quadrature("triangle", 0)
        assert np.isclose(np.sum(q.weights * dg_eval(0, q.points[0])[0] ** 2), 0.5)

    def test_unsupported(self):
        with pytest.raises(ValueError):
            lagrange_eval(5, (0.2, 0.2))


class TestRT:
    def test_flux_duality(self):
        for i in range(3):
            for j in range(3):
                flux = edge_integral(lambda p, t: rt_eval(1, p)[i] @ np.array([t[1], -t[0]]), j)
                assert abs(flux - (i == j)) <= 1e-12

    def test_divergence_constant_two(self):
        el = reference_element("RT", 1)
        q = quadrature("triangle", 2)
        d = el.tabulate_deriv(q.points)
        assert np.allclose(d, 2.0, atol=1e-12)
        assert np.allclose(q.weights @ d, 1.0)

    def test_unsupported(self):
        with pytest.raises(ValueError):
            rt_eval(4, (0.2, 0.2))


class TestNED:
    def test_tangential_duality(self):
        for i in range(3):
            for j in range(3):
                m = edge_integral(lambda p, t: ned_eval(1, p)[i] @ t, j)
                assert abs(m - (i == j)) <= 1e-12

    def test_circulation_and_curl(self):
        el = reference_element("NED", 1)
        for i in range(3):
            circ = sum(edge_integral(lambda p, t: ned_eval(1, p)[i] @ t, j) for j in range(3))
            assert np.isclose(circ, 1.0)
        q = quadrature("triangle", 2)
        assert np.allclose(el.tabulate_deriv(q.points), 2.0, atol=1e-12)

    def test_unsupported(self):
        with pytest.raises(ValueError):
            ned_eval(0, (0.2, 0.2))


class TestDuality:
    @pytest.mark.parametrize("family,k", [("CG", 1), ("CG", 2), ("CG", 3), ("DG", 0), ("DG", 1), ("DG", 2),
                                          ("RT", 1), ("RT", 2), ("RT", 3), ("NED", 1), ("NED", 2), ("NED", 3)])
    @pytest.mark.parametrize("signs", [(1, 1, 1), (-1, 1, -1), (-1, -1, -1)])
    def test_dual_matrix_identity(self, family, k, signs):
        el = reference_element(family, k)
        D = el.dual_matrix(signs) @ el.coefficients(signs).T
        assert np.allclose(D, np.eye(el.ndofs), atol=1e-12)

    @pytest.mark.parametrize("family,k,counts", [("CG", 2, (1, 1, 0)), ("RT", 2, (0, 2, 2)), ("NED", 1, (0, 1, 0)),
                                                 ("DG", 1, (0, 0, 3))])
    def test_entity_counts(self, family, k, counts):
        el = reference_element(family, k)
        assert (el.dofs_per_vertex, el.dofs_per_edge, el.dofs_per_cell) == counts

    @pytest.mark.parametrize("k", [1, 2])
    def test_rt_divergence_in_dg(self, k):
        # div RT_k has degree k - 1: the (k)-th differences vanish along a line
        el = reference_element("RT", k)
        q = quadrature("triangle", 2 * k)
        d = el.tabulate_deriv(q.points)
        dg = reference_element("DG", k - 1)
        P = dg.tabulate(q.points)
        coef, *_ = np.linalg.lstsq(P, d, rcond=None)
        assert np.allclose(P @ coef, d, atol=1e-12)
