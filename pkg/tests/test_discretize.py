"""Grid construction, second-order assembly, and fractional restriction."""

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.special import jn_zeros

from fracspec.discretize import (
    Grid,
    OperatorMatrix,
    PolarDiskGrid,
    TorusMultiplier,
    assemble_polar_laplacian,
    assemble_second_order,
    build_grid,
    fractional_restricted,
    materialize_torus_operator,
    poisson_extension,
    schur_dtn,
    spectral_fractional_dirichlet,
)
from fracspec.errors import ConfigurationError, NotPositiveError, NumericError
from fracspec.quadrature import DomainSpec
from fracspec.symbols import SecondOrderCoeffs


def laplacian(n):
    return SecondOrderCoeffs.laplacian(n)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


class TestBuildGrid:
    def test_interval_counts(self):
        g = build_grid(DomainSpec.unit_interval(), 16)
        assert g.shape == (32,)
        assert g.interior_idx.size == 15
        # x- face is Sigma+, the other endpoint falls to Sigma-
        assert g.sigma_plus_idx.size == 1
        assert g.sigma_minus_idx.size == 1
        assert g.h == pytest.approx(1.0 / 16.0)

    def test_square_counts(self):
        g = build_grid(DomainSpec.unit_square(sigma_plus=("y-",)), 16)
        assert g.shape == (32, 32)
        assert g.interior_idx.size == 15 * 15
        assert g.sigma_plus_idx.size == 15
        # three remaining open faces plus four corners
        assert g.sigma_minus_idx.size == 3 * 15 + 4

    def test_corners_are_sigma_minus(self):
        g = build_grid(DomainSpec.unit_square(sigma_plus=("x-", "x+", "y-", "y+")), 16)
        assert g.sigma_plus_idx.size == 4 * 15
        assert g.sigma_minus_idx.size == 4
        corners = g.points(g.sigma_minus_idx)
        for c in corners:
            assert set(np.round(c, 12)) <= {0.0, 1.0}

    def test_disk_interior_area(self):
        g = build_grid(DomainSpec.disk(), 32)
        area = g.interior_idx.size * g.h**2
        assert abs(area - np.pi) / np.pi < 0.03

    def test_node_sets_partition_torus(self):
        g = build_grid(DomainSpec.unit_square(), 12)
        allidx = np.concatenate([g.interior_idx, g.sigma_plus_idx, g.sigma_minus_idx, g.exterior_idx])
        assert np.array_equal(np.sort(allidx), np.arange(g.size))

    def test_distance_field(self):
        g = build_grid(DomainSpec.unit_square(), 16)
        pts = g.points(g.interior_idx)
        expect = np.minimum.reduce([pts[:, 0], 1 - pts[:, 0], pts[:, 1], 1 - pts[:, 1]])
        assert np.allclose(g.d[g.interior_idx], expect)

    def test_too_few_nodes_rejected(self):
        with pytest.raises(ConfigurationError):
            build_grid(DomainSpec.unit_interval(), 4)


# ---------------------------------------------------------------------------
# second-order assembly
# ---------------------------------------------------------------------------


class TestAssembly:
    def test_1d_dirichlet_tridiagonal(self):
        g = build_grid(DomainSpec.unit_interval(), 16)
        A = assemble_second_order(laplacian(1), g, bc="dirichlet")
        h = g.h
        ref = (np.diag(np.full(15, 2.0)) + np.diag(np.full(14, -1.0), 1) + np.diag(np.full(14, -1.0), -1)) / h**2
        assert np.abs(A.toarray() - ref).max() == 0.0

    def test_1d_dirichlet_eigenvalues(self):
        g = build_grid(DomainSpec.unit_interval(), 16)
        A = assemble_second_order(laplacian(1), g, bc="dirichlet")
        h, m = g.h, 15
        w = np.sort(sla.eigvalsh(A.toarray()))
        k = np.arange(1, m + 1)
        exact = (2.0 - 2.0 * np.cos(k * np.pi * h)) / h**2
        assert np.allclose(w, np.sort(exact), rtol=1e-12)

    def test_periodic_circulant_symbol(self):
        g = build_grid(DomainSpec.unit_interval(), 16)
        one = SecondOrderCoeffs(n=1, a=np.eye(1), a0=1.0)
        A = assemble_second_order(one, g, bc="periodic", a0=1.0)
        assert A.meta["circulant"]
        vals = np.fft.fft(A.toarray()[0]).real
        N, h = g.shape[0], g.h
        k = np.arange(N)
        sym = (2.0 - 2.0 * np.cos(2.0 * np.pi * k / N)) / h**2 + 1.0
        assert np.allclose(np.sort(vals), np.sort(sym), rtol=1e-12)

    def test_mixed_below_dirichlet(self):
        g = build_grid(DomainSpec.unit_square(sigma_plus=("y-",)), 8)
        Am = assemble_second_order(laplacian(2), g, bc="mixed", sigma=0.0)
        Ad = assemble_second_order(laplacian(2), g, bc="dirichlet")
        wm = sla.eigvalsh(Am.toarray())
        wd = sla.eigvalsh(Ad.toarray())
        assert wm[0] > 0.0
        assert wm[0] < wd[0]

    def test_mixed_requires_sigma(self):
        g = build_grid(DomainSpec.unit_square(), 8)
        with pytest.raises(ConfigurationError):
            assemble_second_order(laplacian(2), g, bc="mixed")

    def test_unknown_bc(self):
        g = build_grid(DomainSpec.unit_square(), 8)
        with pytest.raises(ConfigurationError):
            assemble_second_order(laplacian(2), g, bc="neumann")

    def test_robin_increases_energy(self):
        g = build_grid(DomainSpec.unit_square(sigma_plus=("y-",)), 8)
        A0 = assemble_second_order(laplacian(2), g, bc="mixed", sigma=0.0)
        A1 = assemble_second_order(laplacian(2), g, bc="mixed", sigma=2.0)
        d = A1.toarray() - A0.toarray()
        assert sla.eigvalsh(d).min() >= -1e-12
        assert np.any(d > 0)

    def test_variable_diagonal_coefficient(self):
        # -(c(x) u')' with c(x) = 1 + x; assembled entries are edge-midpoint samples
        g = build_grid(DomainSpec.unit_interval(), 16)
        coeffs = SecondOrderCoeffs(n=1, a=lambda x: np.array([[1.0 + float(np.atleast_1d(x)[0])]]))
        A = assemble_second_order(coeffs, g, bc="dirichlet")
        h = g.h
        x = g.points(g.interior_idx)[:, 0]
        Ad = A.toarray()
        c_right = 1.0 + (x + 0.5 * h)
        assert np.allclose(np.diag(Ad, 1), -c_right[:-1] / h**2, rtol=1e-12)

    def test_variable_cross_rejected(self):
        g = build_grid(DomainSpec.unit_square(), 8)
        coeffs = SecondOrderCoeffs(n=2, a=lambda x: np.array([[2.0, x[0]], [x[0], 2.0]]))
        with pytest.raises(ConfigurationError):
            assemble_second_order(coeffs, g, bc="dirichlet")

    def test_cross_term_interior_stencil(self):
        # constant a12: interior stencil couples diagonal neighbours with -a12/(2h^2)
        g = build_grid(DomainSpec.unit_square(), 8)
        a = np.array([[2.0, 0.5], [0.5, 2.0]])
        A = assemble_second_order(SecondOrderCoeffs(n=2, a=a), g, bc="dirichlet")
        Ad = A.toarray()
        h = g.h
        pts = g.points(g.interior_idx)
        mid = np.array([0.5, 0.5])
        i0 = int(np.argmin(np.linalg.norm(pts - mid, axis=1)))
        i_diag = int(np.argmin(np.linalg.norm(pts - (pts[i0] + [h, h]), axis=1)))
        i_anti = int(np.argmin(np.linalg.norm(pts - (pts[i0] + [h, -h]), axis=1)))
        assert Ad[i0, i_diag] == pytest.approx(-0.5 / (2 * h**2), rel=1e-12)
        assert Ad[i0, i_anti] == pytest.approx(+0.5 / (2 * h**2), rel=1e-12)
        assert Ad[i0, i0] == pytest.approx(2.0 * (2.0 + 2.0) / h**2, rel=1e-12)

    def test_cross_term_positive(self):
        g = build_grid(DomainSpec.unit_square(), 8)
        a = np.array([[2.0, 1.0], [1.0, 2.0]])
        A = assemble_second_order(SecondOrderCoeffs(n=2, a=a), g, bc="dirichlet")
        assert sla.eigvalsh(A.toarray()).min() > 0.0

    def test_matrix_symmetry_guard(self):
        with pytest.raises(ValueError, match="symmetric"):
            OperatorMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]), "bad")


# ---------------------------------------------------------------------------
# fractional restriction
# ---------------------------------------------------------------------------


class TestFractional:
    def test_two_node_toy(self):
        R = fractional_restricted(np.diag([2.0, 8.0]), 0.5)
        assert np.allclose(R.toarray(), np.diag([np.sqrt(2.0), 2.0 * np.sqrt(2.0)]), rtol=1e-14)

    def test_whole_torus_eigenvalues_are_multiplier_powers(self):
        g = build_grid(DomainSpec.unit_interval(), 16)
        mult = TorusMultiplier(lambda xi: xi[..., 0] ** 2 + 1.0)
        R = fractional_restricted(mult, 0.5, g, interior=np.arange(g.size))
        w = np.sort(sla.eigvalsh(R.toarray()))
        xi = g.frequencies()[0]
        expect = np.sort((xi**2 + 1.0) ** 0.5)
        assert np.allclose(w, expect, rtol=1e-10)

    def test_exponent_one_is_exact_submatrix(self):
        rng = np.random.default_rng(7)
        B = rng.standard_normal((12, 12))
        base = B @ B.T
        idx = np.array([0, 3, 5, 11])
        R = fractional_restricted(base, 1.0, interior=idx)
        assert np.array_equal(R.toarray(), base[np.ix_(idx, idx)])

    def test_restricted_below_spectral(self):
        # half-circle restriction of the 1D periodic Laplacian
        g = build_grid(DomainSpec.unit_interval(), 64)
        Ap = assemble_second_order(laplacian(1), g, bc="periodic")
        Rr = fractional_restricted(Ap, 0.5, g)
        Ad = assemble_second_order(laplacian(1), g, bc="dirichlet")
        Rs = spectral_fractional_dirichlet(Ad, 0.5)
        wr = sla.eigvalsh(Rr.toarray())
        ws = sla.eigvalsh(Rs.toarray())
        assert Rr.shape == Rs.shape
        assert wr[0] <= ws[0] + 1e-12

    def test_fast_and_dense_paths_agree(self):
        g = build_grid(DomainSpec.unit_interval(), 16)
        mult = TorusMultiplier(lambda xi: xi[..., 0] ** 2 + 1.0)
        Rfast = fractional_restricted(mult, 0.5, g)
        dense = materialize_torus_operator(mult, g, circulant_hint=False)
        Rdense = fractional_restricted(dense, 0.5, g)
        assert np.abs(Rfast.toarray() - Rdense.toarray()).max() < 1e-10

    def test_restricted_positive_definite(self):
        g = build_grid(DomainSpec.unit_square(), 8)
        mult = TorusMultiplier(lambda xi: xi[..., 0] ** 2 + xi[..., 1] ** 2)
        R = fractional_restricted(mult, 0.5, g)
        w = sla.eigvalsh(R.toarray())
        assert w.min() > 0.0
        assert np.abs(R.toarray() - R.toarray().T).max() == 0.0

    def test_truncation_never_raises_eigenvalues_of_enlargement(self):
        # ordered eigenvalues of the restriction to a LARGER node set sit
        # below those of the smaller set (minimax over a larger trial space)
        g = build_grid(DomainSpec.unit_square(), 8)
        mult = TorusMultiplier(lambda xi: xi[..., 0] ** 2 + xi[..., 1] ** 2)
        small = g.interior_idx[: g.interior_idx.size // 2]
        R_small = fractional_restricted(mult, 0.5, g, interior=small)
        R_big = fractional_restricted(mult, 0.5, g)
        w_small = np.sort(sla.eigvalsh(R_small.toarray()))
        w_big = np.sort(sla.eigvalsh(R_big.toarray()))
        assert np.all(w_big[: w_small.size] <= w_small + 1e-10)

    def test_negative_multiplier_rejected(self):
        g = build_grid(DomainSpec.unit_interval(), 16)
        mult = TorusMultiplier(lambda xi: xi[..., 0] ** 2 - 5.0)
        with pytest.raises(NotPositiveError):
            fractional_restricted(mult, 0.5, g)

    def test_nonpositive_exponent_rejected(self):
        with pytest.raises(ValueError):
            fractional_restricted(np.eye(2), 0.0)
        with pytest.raises(ValueError):
            fractional_restricted(np.eye(2), -0.5)

    def test_dense_cap(self):
        class FakeBig:
            shape = (9000, 9000)

            def __array__(self, dtype=None, copy=None):
                raise AssertionError("capped path must not materialize")

        big = np.zeros((8193, 8193))
        with pytest.raises(NumericError, match="8192"):
            fractional_restricted(big, 0.5)


class TestSpectralFractional:
    def test_diagonal_example(self):
        A = OperatorMatrix(np.diag([1.0, 4.0]), "interior")
        S = spectral_fractional_dirichlet(A, 0.5)
        assert np.allclose(S.toarray(), np.diag([1.0, 2.0]), atol=1e-14)

    def test_exponent_one_identity(self):
        rng = np.random.default_rng(3)
        B = rng.standard_normal((9, 9))
        A = OperatorMatrix(B @ B.T + 9 * np.eye(9), "interior")
        S = spectral_fractional_dirichlet(A, 1.0)
        assert np.abs(S.toarray() - A.toarray()).max() < 1e-12

    def test_1d_interval_sine_eigenvalues(self):
        g = build_grid(DomainSpec.unit_interval(), 64)
        A = assemble_second_order(laplacian(1), g, bc="dirichlet")
        S = spectral_fractional_dirichlet(A, 0.5)
        w = np.sort(sla.eigvalsh(S.toarray()))
        h, m = g.h, 63
        k = np.arange(1, m + 1)
        exact = np.sqrt((2.0 - 2.0 * np.cos(k * np.pi * h)) / h**2)
        assert np.allclose(w, np.sort(exact), rtol=1e-10)

    def test_indefinite_rejected(self):
        A = OperatorMatrix(np.diag([1.0, -1.0]), "interior")
        with pytest.raises(NotPositiveError):
            spectral_fractional_dirichlet(A, 0.5)


# ---------------------------------------------------------------------------
# Poisson extension and Schur DtN
# ---------------------------------------------------------------------------


def _square_all_faces(nodes=16):
    dom = DomainSpec.unit_square(sigma_plus=("x-", "x+", "y-", "y+"))
    g = build_grid(dom, nodes)
    A = assemble_second_order(laplacian(2), g, bc="mixed", sigma=0.0)
    return g, A


class TestPoissonExtension:
    def test_1d_linear_interpolant(self):
        dom = DomainSpec.unit_interval(sigma_plus=("x-", "x+"))
        g = build_grid(dom, 16)
        A = assemble_second_order(laplacian(1), g, bc="mixed", sigma=0.0)
        ext = poisson_extension(A)
        alpha, beta = 2.0, -1.0
        u = ext.apply(np.array([alpha, beta]))
        nodes = A.meta["node_ids"]
        x = g.points(nodes)[:, 0]
        assert np.allclose(u, alpha + (beta - alpha) * x, atol=1e-12)

    def test_zero_data(self):
        _, A = _square_all_faces(8)
        ext = poisson_extension(A)
        u = ext.apply(np.zeros(A.rows("sigma_plus").size))
        assert np.abs(u).max() == 0.0

    def test_constant_data_extends_exactly(self):
        _, A = _square_all_faces(16)
        ext = poisson_extension(A)
        u = ext.apply(np.ones(A.rows("sigma_plus").size))
        assert np.abs(u - 1.0).max() < 1e-10

    def test_discrete_harmonicity(self):
        _, A = _square_all_faces(12)
        ext = poisson_extension(A)
        rng = np.random.default_rng(11)
        phi = rng.standard_normal(A.rows("sigma_plus").size)
        u = ext.apply(phi)
        r = (A.matrix @ u)[A.rows("interior")]
        scale = np.abs(A.matrix @ u).max()
        assert np.abs(r).max() <= 1e-10 * scale

    def test_singular_interior_rejected(self):
        # interior block with a zero row pair: singular
        bad = OperatorMatrix(
            np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
            "toy",
            meta={"row_sets": {"interior": [0, 1], "sigma_plus": [2]}},
        )
        with pytest.raises(NumericError):
            poisson_extension(bad)


class TestSchurDtn:
    def test_two_node_toy(self):
        A = OperatorMatrix(
            np.array([[2.0, -1.0], [-1.0, 1.5]]),
            "toy",
            meta={"row_sets": {"interior": [0], "sigma_plus": [1]}, "h": 1.0},
        )
        P, L = schur_dtn(A)
        assert P.toarray() == pytest.approx(np.array([[-1.0]]))
        assert L.toarray() == pytest.approx(np.array([[1.0]]))

    def test_1d_interval_dtn_is_minus_one(self):
        dom = DomainSpec.unit_interval()
        g = build_grid(dom, 32)
        A = assemble_second_order(laplacian(1), g, bc="mixed", sigma=0.0)
        P, L = schur_dtn(A)
        assert P.toarray() == pytest.approx(np.array([[-1.0]]), rel=1e-12)
        assert L.toarray() == pytest.approx(np.array([[1.0]]), rel=1e-12)

    def test_energy_identity(self):
        _, A = _square_all_faces(12)
        ext = poisson_extension(A)
        P, L = schur_dtn(A)
        S_alg = P.meta["algebraic_schur"]
        rng = np.random.default_rng(5)
        nb = A.rows("sigma_plus").size
        phi = rng.standard_normal(nb)
        psi = rng.standard_normal(nb)
        u, v = ext.apply(phi), ext.apply(psi)
        lhs = u @ (A.matrix @ v)
        rhs = phi @ (S_alg @ psi)
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)

    def test_full_sigma_plus_keeps_everything(self):
        _, A = _square_all_faces(8)
        P, L = schur_dtn(A)
        assert L.shape == P.shape
        assert np.allclose(L.toarray(), -P.toarray())

    def test_sigma_minus_elimination_matches_submatrix(self):
        # Schur over Sigma+ after Dirichlet-dropping Sigma- equals the
        # Sigma+ principal submatrix of the full-boundary Schur complement
        pg = PolarDiskGrid(radius=1.0, n_r=10, n_theta=16, arc=(0.0, np.pi))
        F = assemble_polar_laplacian(pg)
        P, L = schur_dtn(F, boundary_weights=np.full(pg.n_theta, pg.radius * pg.dtheta))
        n_plus = pg.sigma_plus_idx.size
        assert L.shape == (n_plus, n_plus)
        assert np.allclose(L.toarray(), -P.toarray()[:n_plus, :n_plus], atol=1e-12)

    def test_positive_after_shift(self):
        _, A = _square_all_faces(8)
        _, L = schur_dtn(A)
        assert sla.eigvalsh(L.toarray()).min() > 0.0


# ---------------------------------------------------------------------------
# polar disk grid
# ---------------------------------------------------------------------------


class TestPolarDisk:
    def test_counts_and_sets(self):
        pg = PolarDiskGrid(radius=1.0, n_r=8, n_theta=16, arc=(0.0, np.pi))
        assert pg.size == 1 + 8 * 16
        assert pg.interior_idx.size == 1 + 7 * 16
        assert pg.boundary_idx.size == 16
        # arc (0, pi): strictly inside among 16 angles -> k = 1..7
        assert pg.sigma_plus_idx.size == 7

    def test_volumes_sum_to_disk_area(self):
        pg = PolarDiskGrid(radius=1.0, n_r=32, n_theta=64, arc=(0.0, np.pi))
        assert pg.volumes().sum() == pytest.approx(np.pi, rel=1e-3)

    def test_dirichlet_eigenvalues_match_bessel_zeros(self):
        pg = PolarDiskGrid(radius=1.0, n_r=48, n_theta=72, arc=(0.0, np.pi))
        F = assemble_polar_laplacian(pg)
        I = F.rows("interior")
        FI = F.matrix[I][:, I].toarray()
        VI = np.diag(F.meta["volumes"][I])
        w = np.sort(sla.eigvalsh(FI, VI))
        t1 = jn_zeros(0, 1)[0] ** 2
        t2 = jn_zeros(1, 1)[0] ** 2
        assert abs(w[0] - t1) / t1 < 2e-3
        assert abs(w[1] - t2) / t2 < 2e-3

    def test_radius_scaling(self):
        pg1 = PolarDiskGrid(radius=1.0, n_r=24, n_theta=48, arc=(0.0, np.pi))
        pg2 = PolarDiskGrid(radius=2.0, n_r=24, n_theta=48, arc=(0.0, np.pi))
        F1 = assemble_polar_laplacian(pg1)
        F2 = assemble_polar_laplacian(pg2)
        I = F1.rows("interior")
        w1 = sla.eigvalsh(F1.matrix[I][:, I].toarray(), np.diag(F1.meta["volumes"][I]))
        w2 = sla.eigvalsh(F2.matrix[I][:, I].toarray(), np.diag(F2.meta["volumes"][I]))
        # -div grad scales as 1/R^2 on a disk of radius R
        assert w1[0] == pytest.approx(4.0 * w2[0], rel=1e-12)

    def test_form_constant_in_kernel_without_boundary_terms(self):
        pg = PolarDiskGrid(radius=1.0, n_r=8, n_theta=16, arc=(0.0, np.pi))
        F = assemble_polar_laplacian(pg)
        ones = np.ones(pg.size)
        assert np.abs(F.matrix @ ones).max() < 1e-12

    def test_too_small_rejected(self):
        with pytest.raises(ConfigurationError):
            PolarDiskGrid(radius=1.0, n_r=2, n_theta=16, arc=(0.0, np.pi))


# ---------------------------------------------------------------------------
# export round trips
# ---------------------------------------------------------------------------


class TestExport:
    def test_text_round_trip(self, tmp_path):
        A = OperatorMatrix(np.array([[2.0, -1.0], [-1.0, 1.5]]), "toy", descriptor="toy matrix")
        p = tmp_path / "m.txt"
        A.to_text(p)
        B = OperatorMatrix.from_text(p)
        assert np.array_equal(A.toarray(), B.toarray())
        assert B.descriptor == "toy matrix"
        assert B.index_label == "toy"

    def test_binary_round_trip(self, tmp_path):
        g = build_grid(DomainSpec.unit_interval(), 16)
        A = assemble_second_order(laplacian(1), g, bc="dirichlet")
        p = tmp_path / "m.npz"
        A.to_binary(p)
        B = OperatorMatrix.from_binary(p)
        assert np.array_equal(A.toarray(), B.toarray())
        assert "bc=dirichlet" in B.descriptor
