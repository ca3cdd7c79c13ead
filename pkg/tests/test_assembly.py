import numpy as np
import pytest
import scipy.sparse as sp
from numpy.polynomial import polynomial as P

from phdd import assembly as asm
from phdd.elements import quadrature
from phdd.linalg import lu_factorize
from phdd.mesh import GAMMA_1, GAMMA_2, GAMMA_INT, build_interval_decomposed, build_square_decomposed
from phdd.models import BeamConfig, WaveConfig, build_beam_problem, build_wave_problem


def beam_mesh(n1=3, n2=3):
    return build_interval_decomposed(1.0, n1, n2, 0.5)


def l2_of_pointwise(space, vals):
    """L2 norm of a field given at the quadrature points of ``quadrature('triangle', 6)``."""
    q = quadrature("triangle", 6)
    w = space.detB[:, None] * q.weights[None, :]
    v2 = vals ** 2 if vals.ndim == 2 else (vals ** 2).sum(axis=-1)
    return np.sqrt(np.sum(w * v2))


class TestBuildSpace:
    def test_hermite_three_cells(self):
        assert asm.build_space(beam_mesh(), 1, "Hermite", 3).ndofs == 8

    def test_dg1_three_cells(self):
        assert asm.build_space(beam_mesh(), 1, "DG1d", 1).ndofs == 6

    def test_rt1_single_triangle(self):
        assert asm.build_space(build_square_decomposed(1), 1, "RT", 1).ndofs == 3

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_counts_2d(self, n):
        m = build_square_decomposed(n)
        cells = m.cells_of(1)
        edges = {tuple(sorted((t[i], t[(i + 1) % 3]))) for t in m.triangles[cells] for i in range(3)}
        verts = set(m.triangles[cells].ravel())
        assert asm.build_space(m, 1, "RT", 1).ndofs == len(edges)
        assert asm.build_space(m, 1, "NED", 1).ndofs == len(edges)
        assert asm.build_space(m, 1, "CG", 1).ndofs == len(verts)
        assert asm.build_space(m, 1, "DG", 0).ndofs == len(cells)
        assert asm.build_space(m, 1, "CG", 2).ndofs == len(verts) + len(edges)
        assert asm.build_space(m, 1, "RT", 2).ndofs == 2 * len(edges) + 2 * len(cells)

    def test_family_dimension_mismatch(self):
        with pytest.raises(ValueError):
            asm.build_space(beam_mesh(), 1, "RT", 1)
        with pytest.raises(ValueError):
            asm.build_space(build_square_decomposed(1), 1, "Hermite", 3)

    def test_dg_never_shares(self):
        m = build_square_decomposed(3)
        V = asm.build_space(m, 2, "DG", 1)
        assert len(np.unique(V.cell_dofs)) == V.cell_dofs.size

    def test_cg_shares(self):
        m = build_square_decomposed(3)
        V = asm.build_space(m, 2, "CG", 1)
        assert len(np.unique(V.cell_dofs)) < V.cell_dofs.size


class TestMass:
    def test_dg1_single_cell(self):
        m = build_interval_decomposed(1.0, 1, 1, 0.5)
        V = asm.build_space(m, 1, "DG1d", 1)
        h = 0.5
        assert np.allclose(asm.assemble_mass(V).toarray(), h / 6 * np.array([[2, 1], [1, 2]]), atol=1e-15)

    def test_cg1_area(self):
        V = asm.build_space(build_square_decomposed(4), 1, "CG", 1)
        M = asm.assemble_mass(V)
        one = np.ones(V.ndofs)
        assert abs(one @ M @ one - 0.5) <= 1e-14

    def test_coefficient_scales(self):
        V = asm.build_space(build_square_decomposed(2), 2, "NED", 1)
        assert np.allclose(asm.assemble_mass(V, 3.0).toarray(), 3.0 * asm.assemble_mass(V).toarray())

    def test_beam_alpha_mass_is_dg1_mass(self):
        P_ = build_beam_problem(BeamConfig(), 1)
        s1 = P_.system.sub1
        V = P_.spaces["alpha1"]
        assert np.allclose(s1.M[: s1.n_alpha, : s1.n_alpha].toarray(), asm.assemble_mass(V, 1.0).toarray())

    @pytest.mark.parametrize("family,k", [("CG", 1), ("CG", 2), ("DG", 0), ("DG", 1), ("RT", 1), ("RT", 2),
                                          ("NED", 1), ("NED", 2)])
    def test_spd(self, family, k):
        V = asm.build_space(build_square_decomposed(3), 1, family, k)
        M = asm.assemble_mass(V).toarray()
        assert np.allclose(M, M.T, atol=1e-15)
        np.linalg.cholesky(M)
        assert np.isfinite(np.linalg.cond(M))

    @pytest.mark.parametrize("family", ["Hermite", "DG1d"])
    def test_spd_1d(self, family):
        V = asm.build_space(beam_mesh(4, 3), 2, family, 3 if family == "Hermite" else 1)
        np.linalg.cholesky(asm.assemble_mass(V).toarray())

    def test_nonpositive_coefficient(self):
        with pytest.raises(ValueError):
            asm.assemble_mass(asm.build_space(beam_mesh(), 1, "DG1d", 1), 0.0)


class TestDifferentialMatrices:
    def test_div_single_triangle(self):
        m = build_square_decomposed(1)
        rt = asm.build_space(m, 1, "RT", 1)
        dg = asm.build_space(m, 1, "DG", 0)
        D = asm.assemble_d(dg, rt, "div").toarray()
        assert D.shape == (1, 3)
        assert np.allclose(np.abs(D), 1.0)

    def test_grad_of_constant(self):
        m = build_square_decomposed(3)
        cg = asm.build_space(m, 2, "CG", 1)
        ned = asm.build_space(m, 2, "NED", 1)
        D = asm.assemble_d(ned, cg, "grad")
        assert np.abs(D @ np.ones(cg.ndofs)).max() <= 1e-14

    def test_dxx_matches_symbolic_oracle(self):
        m = build_interval_decomposed(1.0, 1, 2, 0.5)
        her = asm.build_space(m, 2, "Hermite", 3)
        dg = asm.build_space(m, 2, "DG1d", 1)
        D = asm.assemble_d(dg, her, "dxx").toarray()
        h = 0.25
        # Hermite shape functions in t with physical slope scaling
        H = [P.Polynomial([1, 0, -3, 2]), h * P.Polynomial([0, 1, -2, 1]),
             P.Polynomial([0, 0, 3, -2]), h * P.Polynomial([0, 0, -1, 1])]
        Lg = [P.Polynomial([1, -1]), P.Polynomial([0, 1])]
        ref = np.zeros((4, 6))
        for c in range(2):
            for i, li in enumerate(Lg):
                for j, hj in enumerate(H):
                    integrand = li * hj.deriv(2) / h**2
                    val = h * (integrand.integ()(1.0) - integrand.integ()(0.0))
                    ref[2 * c + i, 2 * c + j] += val
        assert np.allclose(D, ref, atol=1e-13)

    def test_operator_space_mismatch(self):
        m = build_square_decomposed(2)
        with pytest.raises(ValueError):
            asm.assemble_d(asm.build_space(m, 1, "DG", 0), asm.build_space(m, 1, "CG", 1), "div")
        with pytest.raises(ValueError):
            asm.assemble_d(asm.build_space(m, 1, "DG", 0), asm.build_space(m, 1, "RT", 1), "curl")


class TestSubcomplex:
    """Applying the operator to a discrete field lands exactly in the row space."""

    @pytest.mark.parametrize("k", [1, 2])
    def test_div_rt_in_dg(self, k, rng):
        m = build_square_decomposed(3)
        rt = asm.build_space(m, 1, "RT", k)
        dg = asm.build_space(m, 1, "DG", k - 1)
        D = asm.assemble_d(dg, rt, "div")
        lu = lu_factorize(asm.assemble_mass(dg))
        q = quadrature("triangle", 6).points
        for _ in range(100):
            c = rng.normal(size=rt.ndofs)
            direct = asm.evaluate(rt, c, q, deriv=True)
            proj = asm.evaluate(dg, lu.solve(D @ c), q)
            assert l2_of_pointwise(rt, direct - proj) <= 1e-12

    @pytest.mark.parametrize("k", [1, 2])
    def test_grad_cg_in_ned(self, k, rng):
        m = build_square_decomposed(3)
        cg = asm.build_space(m, 2, "CG", k)
        ned = asm.build_space(m, 2, "NED", k)
        D = asm.assemble_d(ned, cg, "grad")
        lu = lu_factorize(asm.assemble_mass(ned))
        Gm = asm.inclusion_matrix(cg, ned, "grad")
        q = quadrature("triangle", 6).points
        for _ in range(100):
            c = rng.normal(size=cg.ndofs)
            direct = asm.evaluate(cg, c, q, deriv=True)
            proj = asm.evaluate(ned, lu.solve(D @ c), q)
            assert l2_of_pointwise(cg, direct - proj) <= 1e-12
            assert np.allclose(lu.solve(D @ c), Gm @ c, atol=1e-11)

    def test_dxx_hermite_in_dg1(self, rng):
        m = beam_mesh(4, 5)
        her = asm.build_space(m, 2, "Hermite", 3)
        dg = asm.build_space(m, 2, "DG1d", 1)
        D = asm.assemble_d(dg, her, "dxx")
        lu = lu_factorize(asm.assemble_mass(dg))
        q = quadrature("interval", 6)
        w = her.h[:, None] * q.weights[None, :]
        for _ in range(100):
            c = rng.normal(size=her.ndofs)
            direct = asm.evaluate(her, c, q.points[:, 0], deriv=2)
            proj = asm.evaluate(dg, lu.solve(D @ c), q.points[:, 0])
            assert np.sqrt(np.sum(w * (direct - proj) ** 2)) <= 1e-12 * max(1.0, np.abs(direct).max())

    def test_rot_cg_in_rt_is_divergence_free(self, rng):
        m = build_square_decomposed(3)
        cg = asm.build_space(m, 1, "CG", 1)
        rt = asm.build_space(m, 1, "RT", 1)
        R = asm.inclusion_matrix(cg, rt, "rot")
        q = quadrature("triangle", 2).points
        c = rng.normal(size=cg.ndofs)
        g = asm.evaluate(cg, c, q, deriv=True)
        v = asm.evaluate(rt, R @ c, q)
        assert np.allclose(v[..., 0], g[..., 1], atol=1e-12)
        assert np.allclose(v[..., 1], -g[..., 0], atol=1e-12)


class TestTraces:
    def test_hermite_gamma1(self):
        m = beam_mesh()
        her = asm.build_space(m, 1, "Hermite", 3)
        T = asm.trace_matrix(her, GAMMA_1)
        assert T.shape == (2, 8)
        assert set(T.indices) == {6, 7}
        assert np.allclose(np.abs(T.data), 1)

    def test_hermite_trace_components(self):
        # T_beta at x = b gives (-f'(b), f(b)); T_alpha at x = a gives (f(a), f'(a))
        m = beam_mesh()
        f = lambda x, d: x**3 - 2 * x if d == 0 else 3 * x**2 - 2
        b1 = asm.build_space(m, 1, "Hermite", 3)
        c = asm.interpolate(b1, f)
        assert np.allclose(asm.trace_matrix(b1, GAMMA_1) @ c, [-f(1.0, 1), f(1.0, 0)])
        assert np.allclose(asm.trace_matrix(b1, GAMMA_INT) @ c, [f(0.5, 1), -f(0.5, 0)])
        a2 = asm.build_space(m, 2, "Hermite", 3)
        c2 = asm.interpolate(a2, f)
        assert np.allclose(asm.trace_matrix(a2, GAMMA_2) @ c2, [f(0.0, 0), f(0.0, 1)])
        assert np.allclose(asm.trace_matrix(a2, GAMMA_INT) @ c2, [f(0.5, 0), f(0.5, 1)])

    def test_dg_has_no_trace(self):
        V = asm.build_space(beam_mesh(), 1, "DG1d", 1)
        for tag in (GAMMA_1, GAMMA_INT):
            assert asm.trace_matrix(V, tag).shape == (0, 6)
        W = asm.build_space(build_square_decomposed(2), 1, "DG", 0)
        assert asm.trace_matrix(W, GAMMA_1).shape[0] == 0

    def test_rt_interface_trace(self):
        V = asm.build_space(build_square_decomposed(2), 1, "RT", 1)
        T = asm.trace_matrix(V, GAMMA_INT)
        assert T.shape == (2, V.ndofs)
        assert np.all(np.diff(T.indptr) == 1)

    def test_rt_trace_is_outward_flux(self):
        m = build_square_decomposed(2)
        V = asm.build_space(m, 1, "RT", 1)
        c = asm.interpolate(V, lambda x: np.column_stack([np.ones(len(x)), np.zeros(len(x))]))
        # constant field (1, 0): outward flux through the right side x = 1 is +edge length
        T = asm.trace_matrix(V, GAMMA_1)
        bs = asm.boundary_space(V, GAMMA_1)
        fluxes = T @ c
        for (lo, hi), fl in zip(bs.facets, fluxes):
            a, b = m.vertices[lo], m.vertices[hi]
            if np.isclose(a[0], 1) and np.isclose(b[0], 1):
                assert np.isclose(fl, 0.5)
            else:
                assert np.isclose(fl, 0.0)

    def test_unknown_tag(self):
        with pytest.raises(ValueError):
            asm.trace_matrix(asm.build_space(beam_mesh(), 1, "Hermite", 3), 9)


class TestPsi:
    def test_beam_identity_pairing(self):
        P_ = build_beam_problem(BeamConfig(), 1)
        Psi = P_.system.sub2.P_int.toarray()
        assert Psi.shape == (2, 2)
        assert np.allclose(np.abs(Psi), np.eye(2))

    def test_wave_n1_against_quadrature(self):
        P_ = build_wave_problem(WaveConfig(n=1, k=1), 1)
        Psi = P_.extras["psi_int"].toarray()
        lag = P_.extras["bspaces"]["lag_int"]
        flx = P_.extras["bspaces"]["flx_int"]
        assert Psi.shape == (lag.ndofs, flx.ndofs) == (2, 1)
        m = P_.spaces["mesh"]
        (lo, hi), = lag.facets
        length = np.linalg.norm(m.vertices[hi] - m.vertices[lo])
        assert np.isclose(length, np.sqrt(2))
        # direct oracle: hat functions (1 - s, s) against the normal-trace density 1 / |e|
        s, w = np.polynomial.legendre.leggauss(4)
        s, w = 0.5 * (s + 1), 0.5 * w
        ref = np.array([[length * np.sum(w * (1 - s) / length)], [length * np.sum(w * s / length)]])
        assert np.allclose(Psi, ref, atol=1e-15)
        assert np.isclose(Psi.sum(), 1.0)

    def test_self_pairing_is_spd(self):
        V = asm.build_space(build_square_decomposed(3), 2, "CG", 2)
        bs = asm.boundary_space(V, GAMMA_INT)
        G = asm.psi_interface(bs, bs).toarray()
        assert np.allclose(G, G.T)
        np.linalg.cholesky(G)

    def test_facet_mismatch(self):
        V = asm.build_space(build_square_decomposed(2), 2, "CG", 1)
        with pytest.raises(ValueError):
            asm.psi_interface(asm.boundary_space(V, GAMMA_INT), asm.boundary_space(V, GAMMA_2))


class TestBoundaryMatrices:
    @pytest.mark.parametrize("n,k", [(2, 1), (3, 1), (2, 2), (4, 2)])
    def test_wave_interface_factorization(self, n, k):
        P_ = build_wave_problem(WaveConfig(n=n, k=k), 1)
        for sub in (P_.system.sub1, P_.system.sub2):
            direct = sub.B_int.toarray()
            factored = (sub.T_int.T @ sub.P_int).toarray()
            assert np.abs(direct - factored).max() <= 1e-13

    def test_wave_alpha_beta_factorizations(self):
        P_ = build_wave_problem(WaveConfig(n=2, k=1), 1)
        Psi = P_.extras["psi_int"]
        s1, s2 = P_.system.sub1, P_.system.sub2
        # B_alpha = T_alpha^T Psi and B_beta = T_beta^T Psi^T
        assert np.abs(s2.B_int - s2.T_int.T @ Psi).max() <= 1e-13
        assert np.abs(s1.B_int - s1.T_int.T @ Psi.T).max() <= 1e-13

    def test_beam_interface_factorization(self):
        P_ = build_beam_problem(BeamConfig(), 1)
        for sub in (P_.system.sub1, P_.system.sub2):
            assert np.abs(sub.B_int - sub.T_int.T @ sub.P_int).max() <= 1e-13
            assert np.abs(sub.B_ext - sub.T_ext.T @ sub.P_ext).max() <= 1e-13

    def test_beam_gamma1_rows(self):
        m = beam_mesh()
        b1 = asm.build_space(m, 1, "Hermite", 3)
        B = asm.assemble_B(b1, asm.dual_boundary_space(b1, GAMMA_1), GAMMA_1)
        assert B.shape == (8, 2)
        assert sorted(set(B.tocoo().row)) == [6, 7]


class TestInterfaceCoupling:
    def test_beam_block(self):
        P_ = build_beam_problem(BeamConfig(), 1)
        s = P_.system
        na1, na2 = s.sub1.n_alpha, s.sub2.n_alpha
        Lb = s.L[na1:, :na2].toarray()
        assert Lb.shape == (8, 8)
        r, c = np.nonzero(Lb)
        assert len(set(r)) == 2 and len(set(c)) == 2
        assert s.L[:na1].nnz == 0 and s.L[:, na2:].nnz == 0

    def test_wave_n1_rank_one(self):
        P_ = build_wave_problem(WaveConfig(n=1, k=1), 1)
        assert np.linalg.matrix_rank(P_.system.L.toarray()) == 1

    def test_matches_explicit_formula(self):
        P_ = build_wave_problem(WaveConfig(n=3, k=1), 1)
        b1, a2 = P_.spaces["beta1"], P_.spaces["alpha2"]
        Tb = asm.trace_matrix(b1, GAMMA_INT)
        Ta = asm.trace_matrix(a2, GAMMA_INT)
        L = asm.interface_coupling(P_.extras["psi_int"], Tb, Ta)
        s = P_.system
        na1, na2 = s.sub1.n_alpha, s.sub2.n_alpha
        assert np.abs(L - s.L[na1:, :na2]).max() <= 1e-15

    def test_zero_psi(self):
        P_ = build_wave_problem(WaveConfig(n=2, k=1), 1)
        b1, a2 = P_.spaces["beta1"], P_.spaces["alpha2"]
        Tb = asm.trace_matrix(b1, GAMMA_INT)
        Ta = asm.trace_matrix(a2, GAMMA_INT)
        Z = sp.csr_matrix((Ta.shape[0], Tb.shape[0]))
        assert asm.interface_coupling(Z, Tb, Ta).nnz == 0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            asm.interface_coupling(sp.identity(3), sp.identity(2), sp.identity(2))


class TestInterpolation:
    def test_hermite_reproduces_cubic(self):
        m = beam_mesh(2, 3)
        V = asm.build_space(m, 2, "Hermite", 3)
        f = lambda x, d: 2 * x**3 - x + 1 if d == 0 else 6 * x**2 - 1
        c = asm.interpolate(V, f)
        t = np.linspace(0, 1, 7)
        x = V.a[:, None] + V.h[:, None] * t[None, :]
        assert np.allclose(asm.evaluate(V, c, t), f(x, 0), atol=1e-13)

    @pytest.mark.parametrize("family,k", [("RT", 1), ("RT", 2), ("NED", 1), ("NED", 2)])
    def test_vector_reproduces_polynomials(self, family, k):
        m = build_square_decomposed(2)
        V = asm.build_space(m, 2, family, k)
        if k == 1:
            f = (lambda x: np.column_stack([1 + x[:, 0], 2 + x[:, 1]])) if family == "RT" else \
                (lambda x: np.column_stack([1 - x[:, 1], 2 + x[:, 0]]))
        else:
            f = lambda x: np.column_stack([2 * x[:, 0] - x[:, 1], 1 - x[:, 0] + 3 * x[:, 1]])
        c = asm.interpolate(V, f)
        q = quadrature("triangle", 3).points
        got = asm.evaluate(V, c, q)
        x = V.map_points(q)
        assert np.allclose(got, f(x.reshape(-1, 2)).reshape(got.shape), atol=1e-12)
