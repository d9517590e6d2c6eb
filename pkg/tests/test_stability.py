import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twolocal.localizer import CouplingMatrixJ, LocalizationProblem, cost_and_gradient, localize
from twolocal.pauli import LocalHamiltonian, enumerate_basis
from twolocal.spectra import sample_spectrum
from twolocal.stability import (
    MetricMatrix,
    diagonal_expectations,
    eigen_operators,
    estimate_lambda_k,
    full_hessian,
    gram_schmidt_polynomials,
    lambda2_bruteforce,
    lambda2_closed_form,
    metric_at_minimum,
    polynomial_fit_residual,
    rank_lower_bound,
    save_eigenoperator_csv,
    save_metric_csv,
)


def random_j(n, rng):
    A = rng.standard_normal((n, n))
    J = (A + A.T) / 2
    np.fill_diagonal(J, 0)
    return J


def minimum(n, flavor="real_2local", seed=0):
    T = sample_spectrum(n, seed)
    r = localize(LocalizationProblem(T, enumerate_basis(n, flavor)), seed=seed)
    return T, r.hamiltonian()


@pytest.fixture(scope="module")
def min5():
    return minimum(5)


@pytest.fixture(scope="module")
def min6():
    return minimum(6, seed=1)


class TestMetric:

    @pytest.mark.parametrize("n", [3, 6, 9])
    def test_z_only_is_identity(self, n):
        b = enumerate_basis(n, "z_only_2local")
        h0 = LocalHamiltonian(b, np.random.default_rng(n).standard_normal(len(b)))
        m = metric_at_minimum(h0)
        assert m.is_identity
        np.testing.assert_allclose(m.g, np.eye(len(b)), atol=1e-12)

    def test_h0_is_top_eigenvector(self, min5):
        T, h0 = min5
        m = metric_at_minimum(h0, T)
        np.testing.assert_allclose(m.g @ h0.couplings, h0.couplings, atol=1e-8)
        assert m.eigenvalues[0] == pytest.approx(1.0, abs=1e-8)
        v = m.eigenvectors[:, 0]
        assert abs(v @ h0.couplings) / np.linalg.norm(h0.couplings) == pytest.approx(1.0, abs=1e-8)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from(["complex_2local", "real_2local", "one_local_real"]))
    def test_g_h_equals_h_and_eigenvalues_bounded(self, seed, flavor):
        # holds at any h: sum_n e_n <n|tau|n> = Tr(H' tau) = 2^N h_tau
        b = enumerate_basis(3, flavor)
        h0 = LocalHamiltonian(b, np.random.default_rng(seed).standard_normal(len(b)))
        m = metric_at_minimum(h0)
        np.testing.assert_allclose(m.g @ h0.couplings, h0.couplings, atol=1e-10)
        assert m.eigenvalues.min() >= -1e-10 and m.eigenvalues.max() <= 1 + 1e-10

    def test_warns_away_from_minimum(self):
        b = enumerate_basis(3, "real_2local")
        h0 = LocalHamiltonian(b, np.random.default_rng(0).standard_normal(len(b)))
        with pytest.warns(RuntimeWarning):
            metric_at_minimum(h0, sample_spectrum(3, 0))

    def test_no_warning_at_minimum(self, min5):
        T, h0 = min5
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            metric_at_minimum(h0, T)

    def test_matches_finite_difference_hessian(self):
        T, h0 = minimum(4)
        p = LocalizationProblem(T, h0.basis)
        x = h0.couplings
        step = 1e-4
        fd = np.empty((x.size, x.size))
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = step
            fd[i] = (cost_and_gradient(x + e, p)[1] - cost_and_gradient(x - e, p)[1]) / (2 * step)
        g = metric_at_minimum(h0, T).g
        assert np.abs(g - fd).max() < 1e-5
        assert np.abs(full_hessian(x, h0.basis, T) - g).max() < 1e-8

    def test_full_hessian_away_from_minimum(self):
        b = enumerate_basis(3, "real_2local")
        T = sample_spectrum(3, 2)
        p = LocalizationProblem(T, b)
        x = np.random.default_rng(1).standard_normal(len(b))
        step = 1e-5
        fd = np.empty((x.size, x.size))
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = step
            fd[i] = (cost_and_gradient(x + e, p)[1] - cost_and_gradient(x - e, p)[1]) / (2 * step)
        H = full_hessian(x, b, T)
        assert np.abs(H - fd).max() < 1e-6 * max(1.0, np.abs(fd).max())
        assert np.abs(H - metric_at_minimum(LocalHamiltonian(b, x)).g).max() > 1e-3

    def test_full_hessian_degenerate(self):
        b = enumerate_basis(2, "z_only_2local")
        with pytest.raises(ValueError):
            full_hessian(np.ones(1), b, sample_spectrum(2, 0))

    def test_diagonal_expectations_match_dense(self):
        b = enumerate_basis(4, "z_only_2local")
        h0 = LocalHamiltonian(b, np.random.default_rng(2).standard_normal(len(b)))
        e, Q = diagonal_expectations(h0)
        np.testing.assert_allclose(Q.T @ e / 16, h0.couplings, atol=1e-12)
        assert set(np.unique(Q)) <= {-1.0, 1.0}


class TestEigenOperators:

    def test_first_is_hamiltonian(self, min5):
        T, h0 = min5
        ops = eigen_operators(metric_at_minimum(h0, T), h0, 3)
        op = ops[0]
        np.testing.assert_allclose(op.expectations, op.energies / np.linalg.norm(h0.couplings), atol=1e-8)
        assert len(op.curve) == 32
        for o in ops:
            assert np.linalg.norm(o.coefficients) == pytest.approx(1.0)
            assert np.abs(o.expectations).max() <= np.abs(o.coefficients).sum() + 1e-12

    def test_bad_count(self, min5):
        T, h0 = min5
        m = metric_at_minimum(h0, T)
        with pytest.raises(ValueError):
            eigen_operators(m, h0, len(h0.basis) + 1)

    def test_polynomial_fit_residual(self):
        x = np.linspace(-1, 1, 50)
        assert polynomial_fit_residual(x, 3 * x**4 - x) < 1e-12
        assert polynomial_fit_residual(x, np.sign(np.sin(9 * x))) > 0.1
        with pytest.raises(ValueError):
            polynomial_fit_residual(x[:5], x[:5])

    def test_csv_export(self, min5, tmp_path):
        T, h0 = min5
        m = metric_at_minimum(h0, T)
        save_metric_csv(m, tmp_path / "g.csv")
        save_eigenoperator_csv(eigen_operators(m, h0, 2), tmp_path / "o.csv")
        assert (tmp_path / "g.csv").read_text().splitlines()[0] == "k,eigenvalue"
        assert len((tmp_path / "o.csv").read_text().splitlines()) == 1 + 2 * 32
        assert isinstance(m, MetricMatrix) and m.to_dict()["eigenvalues"][0] == pytest.approx(1)


class TestPolynomialEstimates:

    def test_gram_schmidt_orthonormal(self):
        e = np.sort(np.random.default_rng(0).standard_normal(64))
        F = gram_schmidt_polynomials(e, 5)
        np.testing.assert_allclose(F @ F.T, np.eye(6), atol=1e-8)
        # F_k spans polynomials of degree k
        V = np.vander(e / np.abs(e).max(), 6, increasing=True)
        resid = V - F.T @ (F @ V)
        assert np.abs(resid).max() < 1e-10

    def test_second_polynomial_is_traceless_square_for_symmetric_spectrum(self):
        half = np.random.default_rng(1).uniform(0.1, 2, 8)
        e = np.sort(np.concatenate([-half, half]))
        F2 = gram_schmidt_polynomials(e, 2)[2]
        f = e**2 - np.mean(e**2)
        np.testing.assert_allclose(F2, f / np.linalg.norm(f), atol=1e-12)

    def test_dependence_detected(self):
        with pytest.raises(np.linalg.LinAlgError):
            gram_schmidt_polynomials(np.array([-1.0, -1.0, 1.0, 1.0]), 2)
        with pytest.raises(ValueError):
            gram_schmidt_polynomials(np.zeros(4), 1)

    @pytest.mark.parametrize("method", ["ratio", "ritz"])
    def test_k1_is_one_at_minimum(self, min5, method):
        _, h0 = min5
        assert estimate_lambda_k(h0, 1, method) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_lower_bound(self, min6, k):
        T, h0 = min6
        exact = metric_at_minimum(h0, T).eigenvalues
        for method in ("ratio", "ritz"):
            est = estimate_lambda_k(h0, k, method)
            assert 0 <= est <= exact[k - 1] + 1e-8

    def test_ratio_equals_ritz_for_k2(self, min6):
        _, h0 = min6
        assert estimate_lambda_k(h0, 2, "ratio") == pytest.approx(estimate_lambda_k(h0, 2, "ritz"), rel=1e-10)

    def test_arguments(self, min5):
        _, h0 = min5
        with pytest.raises(ValueError):
            estimate_lambda_k(h0, 0)
        with pytest.raises(ValueError):
            estimate_lambda_k(h0, 2, "exact")
        with pytest.raises(TypeError):
            estimate_lambda_k(h0.couplings, 2)


class TestLambda2:

    @pytest.mark.parametrize("n", [5, 6, 7, 8])
    def test_closed_form_matches_trace_evaluation(self, n):
        rng = np.random.default_rng(100 + n)
        for _ in range(13):
            J = random_j(n, rng)
            assert lambda2_closed_form(J).value == pytest.approx(lambda2_bruteforce(J), rel=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
    def test_scale_invariant(self, seed, c):
        J = random_j(5, np.random.default_rng(seed))
        a, b = lambda2_closed_form(J), lambda2_closed_form(c * J)
        assert b.value == pytest.approx(a.value, rel=1e-10)
        assert b.bound == pytest.approx(a.bound, rel=1e-10)

    def test_value_in_unit_interval(self):
        rng = np.random.default_rng(3)
        for n in range(3, 9):
            lam = lambda2_closed_form(CouplingMatrixJ(random_j(n, rng)))
            # at N = 3 the traceless square is itself a sum of pairs, so lambda_2 = 1
            assert 0 < lam.value <= 1 + 1e-12
            assert 0 < lam.asymptote < 1

    def test_rank_one_bound(self):
        v = np.random.default_rng(0).standard_normal(200)
        J = np.outer(v, v)
        np.fill_diagonal(J, 0)
        assert lambda2_closed_form(J).bound == pytest.approx(4.0, rel=0.05)

    def test_zero_j(self):
        with pytest.raises(ValueError):
            lambda2_closed_form(np.zeros((3, 3)))


class TestRankBound:

    def test_three_qubits(self):
        r = rank_lower_bound(3)
        assert r.generic == pytest.approx(8 / 37)
        assert r.tighter == pytest.approx(4 / 3)
        assert r.best == pytest.approx(4 / 3)

    def test_ten_qubits(self):
        assert rank_lower_bound(10).generic == pytest.approx(1024 / (1 + 30 + 405))

    def test_one_qubit(self):
        r = rank_lower_bound(1)
        assert r.generic == 0.5 and r.tighter is None

    def test_custom_basis(self):
        assert rank_lower_bound(4, enumerate_basis(4, "z_only_2local")).generic == pytest.approx(16 / 7)
        with pytest.raises(ValueError):
            rank_lower_bound(3, enumerate_basis(4, "z_only_2local"))
        with pytest.raises(ValueError):
            rank_lower_bound(0)
