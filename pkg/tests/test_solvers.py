import csv

import numpy as np
import pytest

from igamf import (FDPreconditioner, IndefiniteOperatorError, KrylovReport,
                   assemble_rhs, assemble_sgq, bicgstab, build_tensor_rule,
                   cg, identity_map, make_uniform_knots, oscillating_case,
                   quarter_ring_map, setup_stiffness, stopping_tolerance,
                   tensor_space)
from igamf.solvers import univariate_parametric_matrices


class TestUnivariateMatrices:
    @pytest.mark.parametrize("p,n_el", [(1, 4), (4, 8), (8, 32)])
    def test_generalized_eigendecomposition_residual(self, p, n_el):
        kv = make_uniform_knots(p, n_el)
        K, M = univariate_parametric_matrices(kv)
        import scipy.linalg
        lam, U = scipy.linalg.eigh(K, M)
        assert np.abs(K @ U - M @ U @ np.diag(lam)).max() <= 1e-10
        assert np.abs(U.T @ M @ U - np.eye(len(lam))).max() <= 1e-10
        assert lam.min() > 0

    def test_matches_gauss_gram(self):
        from igamf import exact_gram
        kv = make_uniform_knots(3, 6)
        K, M = univariate_parametric_matrices(kv)
        assert np.allclose(M, exact_gram(kv, 0, 0).toarray()[1:-1, 1:-1],
                           atol=1e-14)
        assert np.allclose(K, exact_gram(kv, 1, 1).toarray()[1:-1, 1:-1],
                           atol=1e-12)


class TestFDPreconditioner:
    @pytest.mark.parametrize("p,n_el", [(2, 8), (5, 8), (7, 8), (3, 16)])
    def test_self_inverse(self, p, n_el):
        # p = 8 sits at the double-precision floor of the B-spline basis
        # (the univariate mass matrix condition number reaches ~1e8) and is
        # covered separately by the acceptance suite
        space = tensor_space(p, n_el, 3)
        P = FDPreconditioner(space)
        v = np.random.default_rng(0).standard_normal(space.n_dofs)
        back = P.apply(P.apply_forward(v))
        assert np.linalg.norm(back - v) <= 1e-10 * np.linalg.norm(v)

    def test_zero_residual(self):
        space = tensor_space(2, 4, 3)
        P = FDPreconditioner(space)
        assert np.array_equal(P.apply(np.zeros(space.n_dofs)),
                              np.zeros(space.n_dofs))

    def test_1d_exact_solve(self):
        space = tensor_space(3, 8, 1)
        P = FDPreconditioner(space)
        K, _ = univariate_parametric_matrices(space.knotvectors[0])
        rng = np.random.default_rng(1)
        v = rng.standard_normal(space.n_dofs)
        assert np.allclose(P.apply(K @ v), v, atol=1e-10)

    def test_sigma_shift(self):
        space = tensor_space(2, 4, 3)
        P0 = FDPreconditioner(space)
        P1 = FDPreconditioner(space, sigma=10.0)
        v = np.ones(space.n_dofs)
        # the shift strictly damps the inverse
        assert np.linalg.norm(P1.apply(v)) < np.linalg.norm(P0.apply(v))

    def test_near_exact_on_parametric_laplacian(self):
        # identity cube, exact assembly: CG with FD needs one iteration
        space = tensor_space(2, 8, 3)
        A = assemble_sgq(space, identity_map(3), kind="stiffness").matrix
        P = FDPreconditioner(space)
        b = np.random.default_rng(2).standard_normal(space.n_dofs)
        _, report = cg(lambda v: A @ v, b, P.apply, tol=1e-8)
        assert report.converged and report.iterations <= 3


class TestCG:
    def test_identity_system_one_iteration(self):
        b = np.random.default_rng(0).standard_normal(50)
        x, report = cg(lambda v: v, b, tol=1e-12)
        assert report.iterations == 1
        assert np.allclose(x, b)

    def test_zero_rhs(self):
        x, report = cg(lambda v: v, np.zeros(10))
        assert report.iterations == 0
        assert np.array_equal(x, np.zeros(10))

    def test_indefinite_detected(self):
        with pytest.raises(IndefiniteOperatorError):
            cg(lambda v: -v, np.ones(5))

    def test_true_residual_matches_reported(self):
        rng = np.random.default_rng(3)
        Q = np.linalg.qr(rng.standard_normal((40, 40)))[0]
        A = Q @ np.diag(rng.uniform(1, 100, 40)) @ Q.T
        b = rng.standard_normal(40)
        x, report = cg(lambda v: A @ v, b, tol=1e-10)
        true_rel = np.linalg.norm(b - A @ x) / np.linalg.norm(b)
        assert true_rel <= 10 * report.residuals[-1]

    def test_maxit_flagged_not_raised(self):
        rng = np.random.default_rng(4)
        Q = np.linalg.qr(rng.standard_normal((60, 60)))[0]
        A = Q @ np.diag(rng.uniform(1e-3, 1e3, 60)) @ Q.T
        _, report = cg(lambda v: A @ v, rng.standard_normal(60),
                       tol=1e-14, maxit=3)
        assert not report.converged
        assert report.iterations == 3


class TestBiCGStab:
    def test_agrees_with_cg_on_spd(self):
        rng = np.random.default_rng(5)
        Q = np.linalg.qr(rng.standard_normal((40, 40)))[0]
        A = Q @ np.diag(rng.uniform(1, 50, 40)) @ Q.T
        b = rng.standard_normal(40)
        x1, _ = cg(lambda v: A @ v, b, tol=1e-12)
        x2, rep = bicgstab(lambda v: A @ v, b, tol=1e-12)
        assert rep.converged
        assert np.linalg.norm(x1 - x2) <= 1e-8 * np.linalg.norm(x1)

    def test_zero_rhs(self):
        x, report = bicgstab(lambda v: v, np.zeros(10))
        assert np.array_equal(x, np.zeros(10))
        assert report.iterations == 0

    def test_nonsymmetric_system(self):
        rng = np.random.default_rng(6)
        A = np.eye(30) + 0.3 * rng.standard_normal((30, 30))
        b = rng.standard_normal(30)
        x, report = bicgstab(lambda v: A @ v, b, tol=1e-8, maxit=200)
        assert report.converged
        assert np.linalg.norm(A @ x - b) <= 1e-6 * np.linalg.norm(b)

    def test_quarter_ring_system_converges(self):
        space = tensor_space(3, 8, 3)
        rule = build_tensor_rule(space)
        geom = quarter_ring_map()
        stiff = setup_stiffness(space, rule, geom)
        rhs = assemble_rhs(space, geom, oscillating_case().f)
        P = FDPreconditioner(space)
        x, report = bicgstab(stiff.apply, rhs, P.apply, tol=1e-8)
        assert report.converged
        true = np.linalg.norm(rhs - stiff.apply(x)) / np.linalg.norm(rhs)
        assert true <= 10 * report.residuals[-1]

    def test_determinism(self):
        space = tensor_space(2, 4, 3)
        rule = build_tensor_rule(space)
        geom = quarter_ring_map()
        stiff = setup_stiffness(space, rule, geom)
        rhs = assemble_rhs(space, geom, oscillating_case().f)
        P = FDPreconditioner(space)
        x1, r1 = bicgstab(stiff.apply, rhs, P.apply, tol=1e-10)
        x2, r2 = bicgstab(stiff.apply, rhs, P.apply, tol=1e-10)
        assert r1.iterations == r2.iterations
        assert np.array_equal(x1, x2)


class TestStoppingTolerance:
    def test_table_value_p2(self):
        assert stopping_tolerance(7.1e-2) == pytest.approx(7.1e-3)

    def test_table_value_p3(self):
        assert stopping_tolerance(3.3e-2) == pytest.approx(3.3e-3)

    def test_unit_error(self):
        assert stopping_tolerance(1.0, 0.1) == pytest.approx(0.1)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            stopping_tolerance(0.0)
        with pytest.raises(ValueError):
            stopping_tolerance(-1e-3)


class TestKrylovReport:
    def test_csv_export(self, tmp_path):
        report = KrylovReport(2, [1.0, 0.5, 1e-9], True, 2, 3)
        path = tmp_path / "resid.csv"
        report.write_csv(path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iteration", "relative_residual"]
        assert len(rows) == 4
        assert float(rows[-1][1]) == pytest.approx(1e-9)

    def test_history_invariant(self):
        b = np.random.default_rng(7).standard_normal(20)
        _, report = cg(lambda v: 2 * v, b, tol=1e-12)
        assert report.residuals[0] == 1.0
        assert report.residuals[-1] <= 1e-12
