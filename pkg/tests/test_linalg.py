import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from qcascade.balance import f_lambda
from qcascade.errors import EigFailure, NotHurwitz, SolverSingular
from qcascade.linalg import (
    J2,
    duplication_matrix,
    is_hurwitz,
    quantum_psd_margin,
    solve_lyapunov,
    solve_sylvester,
    sylvester_kron_solve,
    symmetric_matrix_function,
    symplectic_exponential,
    symplectic_form,
    symplectic_residual,
    vech,
    vech_to_symmetric,
)


def rotation(phi):
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, s], [-s, c]])


def hurwitz_shifted(rng, n):
    # random matrix shifted left of the imaginary axis
    g = rng.standard_normal((n, n))
    return g - (np.max(np.abs(np.linalg.eigvals(g).real)) + 0.5) * np.eye(n)


sym_2x2 = hnp.arrays(
    np.float64,
    (2, 2),
    elements=st.floats(-3.0, 3.0, allow_nan=False),
).map(lambda x: 0.5 * (x + x.T))


class TestSylvester:
    def test_identity_pair(self):
        sigma = solve_sylvester(-np.eye(2), -np.eye(2), np.eye(2))
        np.testing.assert_allclose(sigma, 0.5 * np.eye(2), atol=1e-14)

    def test_scalar(self):
        sigma = solve_sylvester(np.array([[-2.0]]), np.array([[-3.0]]), np.array([[10.0]]))
        np.testing.assert_allclose(sigma, [[2.0]], atol=1e-14)

    @pytest.mark.parametrize("n,p", [(2, 3), (4, 4), (6, 5), (3, 6)])
    def test_kron_oracle_agrees_with_production_route(self, n, p):
        rng = np.random.default_rng(n * 10 + p)
        alpha = hurwitz_shifted(rng, n)
        beta = hurwitz_shifted(rng, p)
        gamma = rng.standard_normal((n, p))
        a = sylvester_kron_solve(alpha, beta, gamma)
        b = solve_sylvester(alpha, beta, gamma)
        assert np.max(np.abs(a - b)) <= 1e-10 * max(1.0, np.max(np.abs(a)))

    def test_large_orders_use_schur_route(self):
        # above the kron cutoff the scipy route must satisfy the same residual bound
        rng = np.random.default_rng(3)
        alpha = hurwitz_shifted(rng, 12)
        beta = hurwitz_shifted(rng, 9)
        gamma = rng.standard_normal((12, 9))
        sigma = solve_sylvester(alpha, beta, gamma)
        res = alpha @ sigma + sigma @ beta.T + gamma
        assert np.linalg.norm(res) <= 1e-9 * np.linalg.norm(sigma) * np.linalg.norm(alpha)

    def test_rejects_unstable_alpha(self):
        with pytest.raises(NotHurwitz):
            solve_sylvester(np.eye(2), -np.eye(2), np.eye(2))

    def test_rejects_unstable_beta(self):
        with pytest.raises(NotHurwitz):
            solve_sylvester(-np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(2))

    def test_residual_certificate_rejects_non_finite_data(self):
        gamma = np.array([[np.inf, 0.0], [0.0, 1.0]])
        with pytest.raises(SolverSingular):
            solve_sylvester(-np.eye(2), -np.eye(2), gamma)

    def test_kron_route_singular_spectrum(self):
        # alpha and beta^T spectra overlap on the imaginary axis
        with pytest.raises(SolverSingular):
            sylvester_kron_solve(J2, J2, np.eye(2))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_residual_certificate_property(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        p = int(rng.integers(1, 7))
        alpha = hurwitz_shifted(rng, n)
        beta = hurwitz_shifted(rng, p)
        gamma = rng.standard_normal((n, p))
        sigma = solve_sylvester(alpha, beta, gamma)
        res = alpha @ sigma + sigma @ beta.T + gamma
        scale = np.linalg.norm(sigma) * max(np.linalg.norm(alpha), np.linalg.norm(beta))
        assert np.linalg.norm(res) <= 1e-9 * max(1.0, scale)


class TestLyapunov:
    def test_identity_drift_halves_forcing(self):
        rng = np.random.default_rng(0)
        q = rng.standard_normal((5, 5))
        q = q + q.T
        sigma = solve_lyapunov(-np.eye(5), q)
        np.testing.assert_allclose(sigma, q / 2.0, atol=1e-12)

    def test_result_is_exactly_symmetric(self):
        rng = np.random.default_rng(1)
        a = hurwitz_shifted(rng, 6)
        q = rng.standard_normal((6, 6))
        sigma = solve_lyapunov(a, q + q.T)
        assert np.array_equal(sigma, sigma.T)


class TestVechDuplication:
    def test_duplication_order_two(self):
        expected = np.array(
            [
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        np.testing.assert_array_equal(duplication_matrix(2), expected)

    def test_duplication_order_one(self):
        np.testing.assert_array_equal(duplication_matrix(1), [[1.0]])

    @pytest.mark.parametrize("r", [1, 2, 3, 5])
    def test_gram_diagonal_counts_offdiagonal_entries_twice(self, r):
        ups = duplication_matrix(r)
        gram = ups.T @ ups
        assert np.array_equal(gram, np.diag(np.diag(gram)))
        assert set(np.diag(gram).tolist()) <= {1.0, 2.0}
        assert np.linalg.norm(ups, 2) <= np.sqrt(2.0) + 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5))
    def test_vech_round_trip(self, seed, r):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((r, r))
        x = x + x.T
        v = vech(x)
        assert v.shape == (r * (r + 1) // 2,)
        np.testing.assert_array_equal(vech_to_symmetric(v, r), x)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_duplication_reconstructs_column_vectorization(self, seed, r):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((r, r))
        x = x + x.T
        np.testing.assert_allclose(
            duplication_matrix(r) @ vech(x), x.flatten(order="F"), atol=1e-13
        )


class TestMatrixFunction:
    def test_identity_function(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((4, 4))
        x = x + x.T
        np.testing.assert_allclose(symmetric_matrix_function(lambda z: z, x), x, atol=1e-12)

    def test_square_on_diagonal(self):
        got = symmetric_matrix_function(lambda z: z * z, np.diag([1.0, 2.0]))
        np.testing.assert_allclose(got, np.diag([1.0, 4.0]), atol=1e-13)

    def test_multiplier_kernel_on_diagonal(self):
        got = symmetric_matrix_function(lambda z: f_lambda(z, 2.0), np.diag([0.0, 1.0]))
        np.testing.assert_allclose(
            got, np.diag([1.0, 2.0 / (1.0 + np.sqrt(5.0))]), atol=1e-13
        )

    @given(sym_2x2)
    @settings(max_examples=50, deadline=None)
    def test_commutes_with_argument(self, x):
        fx = symmetric_matrix_function(np.tanh, x)
        assert np.max(np.abs(fx @ x - x @ fx)) <= 1e-10 * max(1.0, np.max(np.abs(x)) ** 2)

    def test_non_finite_input_raises(self):
        bad = np.array([[np.nan, 0.0], [0.0, 1.0]])
        with pytest.raises(EigFailure):
            symmetric_matrix_function(lambda z: z, bad)


class TestHurwitz:
    def test_negative_identity(self):
        stable, margin = is_hurwitz(-np.eye(3))
        assert stable
        assert margin == pytest.approx(-1.0, abs=1e-14)

    def test_rotation_generator_is_marginal(self):
        stable, margin = is_hurwitz(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        assert not stable
        assert margin == pytest.approx(0.0, abs=1e-12)

    def test_reference_oscillators_are_stable(self, reference_cascade):
        for k, nk in enumerate(reference_cascade.dims):
            lo = sum(reference_cascade.dims[:k])
            a_k = reference_cascade.a[lo : lo + nk, lo : lo + nk]
            stable, _ = is_hurwitz(a_k)
            assert stable


class TestSymplectic:
    def test_identity_is_member(self):
        chk = symplectic_residual(np.eye(2), 0.5 * J2)
        assert chk.residual == 0.0
        assert chk.det == pytest.approx(1.0)

    @pytest.mark.parametrize("phi", [0.1, -0.7, 2.0])
    def test_rotations_are_members(self, phi):
        chk = symplectic_residual(rotation(phi), 0.5 * J2)
        assert chk.residual <= 1e-15

    def test_reciprocal_squeeze_is_member(self):
        chk = symplectic_residual(np.diag([2.0, 0.5]), 0.5 * J2)
        assert chk.residual <= 1e-15

    def test_uniform_dilation_is_not(self):
        chk = symplectic_residual(np.diag([2.0, 2.0]), J2)
        assert chk.residual == pytest.approx(np.linalg.norm(3.0 * J2))

    @settings(max_examples=40, deadline=None)
    @given(sym_2x2)
    def test_exponential_lands_in_group(self, h):
        s = symplectic_exponential(h)
        chk = symplectic_residual(s, J2)
        assert chk.residual <= 1e-9 * max(1.0, np.linalg.norm(s) ** 2)
        assert chk.det == pytest.approx(1.0, rel=1e-9)

    def test_form_builder_block_structure(self):
        np.testing.assert_array_equal(symplectic_form(2), J2)
        j4 = symplectic_form(4)
        np.testing.assert_array_equal(j4[:2, 2:], np.eye(2))
        np.testing.assert_array_equal(j4[2:, :2], -np.eye(2))


class TestPsdMargin:
    def test_classical_margin_is_min_eigenvalue(self):
        assert quantum_psd_margin(np.eye(2), np.zeros((2, 2))) == pytest.approx(1.0)
        rng = np.random.default_rng(5)
        p = rng.standard_normal((4, 4))
        p = p + p.T
        margin = quantum_psd_margin(p, np.zeros((4, 4)))
        assert margin == pytest.approx(np.linalg.eigvalsh(p)[0], abs=1e-12)

    def test_pure_state_sits_on_the_boundary(self):
        assert quantum_psd_margin(0.5 * np.eye(2), 0.5 * J2) == pytest.approx(0.0, abs=1e-12)
