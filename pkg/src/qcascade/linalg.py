"""Dense linear-algebra kernels for small real matrices.

Sylvester and Lyapunov solvers with stability preconditions, the
duplication matrix for half-vectorization, eigendecomposition-based
functions of symmetric matrices, and residual certificates for
symplectic membership and quantum admissibility.

Two solver routes are kept side by side: a dense Kronecker
vectorization used up to order ``KRON_CUTOFF`` (and as an independent
oracle in the test suite), and a Schur-based route delegated to scipy
for larger problems.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .errors import EigFailure, NotHurwitz, SolverSingular

Matrix = np.ndarray

HURWITZ_TOL = 1e-9
RESIDUAL_TOL = 1e-9
KRON_CUTOFF = 8

#: generator of the antisymmetric matrices of order 2
J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def symplectic_form(r: int) -> Matrix:
    """Canonical antisymmetric matrix [[0, I], [-I, 0]] of even order r."""
    if r % 2:
        raise ValueError(f"order must be even, got {r}")
    return np.kron(J2, np.eye(r // 2))


def symplectic_exponential(h: Matrix) -> Matrix:
    """exp(J h) for symmetric h, symplectic for the canonical form.

    The generator J h satisfies (J h) J + J (J h)^T = 0, so the
    exponential preserves J and every scalar multiple of it, and has
    unit determinant.
    """
    return scipy.linalg.expm(symplectic_form(h.shape[0]) @ h)


def symmetric_part(x: Matrix) -> Matrix:
    return 0.5 * (x + x.T)


def antisymmetric_part(x: Matrix) -> Matrix:
    return 0.5 * (x - x.T)


def vech(x: Matrix) -> np.ndarray:
    """Column-wise vectorization of the lower triangle, diagonal included."""
    r = x.shape[0]
    return np.concatenate([x[j:, j] for j in range(r)])


def vech_to_symmetric(v: np.ndarray, r: int) -> Matrix:
    """Inverse of :func:`vech` onto the symmetric matrices of order r."""
    out = np.zeros((r, r))
    pos = 0
    for j in range(r):
        out[j:, j] = v[pos : pos + r - j]
        pos += r - j
    return out + np.tril(out, -1).T


def duplication_matrix(r: int) -> Matrix:
    """0/1 matrix mapping vech(M) to vec(M) for symmetric M of order r.

    Columns follow the :func:`vech` ordering; vec is column-major.
    """
    if r < 1:
        raise ValueError("order must be positive")
    ups = np.zeros((r * r, r * (r + 1) // 2))
    col = 0
    for j in range(r):
        for i in range(j, r):
            ups[j * r + i, col] = 1.0
            ups[i * r + j, col] = 1.0
            col += 1
    return ups


def is_hurwitz(a: Matrix, tol: float = HURWITZ_TOL) -> tuple[bool, float]:
    """Stability test. Returns (flag, max real part of the spectrum)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"square matrix expected, got shape {a.shape}")
    try:
        margin = float(np.max(np.linalg.eigvals(a).real))
    except np.linalg.LinAlgError as exc:
        raise EigFailure(f"eigensolve failed: {exc}") from exc
    return margin < -tol, margin


def sylvester_kron_solve(alpha: Matrix, beta: Matrix, gamma: Matrix) -> Matrix:
    """Solve alpha*s + s*beta^T + gamma = 0 by dense vectorization.

    Brute-force route: vec(s) = -(beta (+) alpha)^{-1} vec(gamma) with
    column-major vec. Serves as the independent oracle for the Schur
    route and as the production solver for small orders.
    """
    n, p = gamma.shape
    op = np.kron(np.eye(p), alpha) + np.kron(beta, np.eye(n))
    try:
        x = np.linalg.solve(op, -gamma.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise SolverSingular(f"vectorized system singular: {exc}") from exc
    return x.reshape((n, p), order="F")


def _check_sylvester_inputs(alpha, beta, gamma, hurwitz_tol):
    if alpha.shape[0] != alpha.shape[1] or beta.shape[0] != beta.shape[1]:
        raise ValueError("coefficient matrices must be square")
    if gamma.shape != (alpha.shape[0], beta.shape[0]):
        raise ValueError(
            f"constant term shape {gamma.shape} inconsistent with "
            f"({alpha.shape[0]}, {beta.shape[0]})"
        )
    for name, mat in (("alpha", alpha), ("beta", beta)):
        ok, margin = is_hurwitz(mat, hurwitz_tol)
        if not ok:
            raise NotHurwitz(f"{name} is not Hurwitz: max Re eig = {margin:.3e}")


def solve_sylvester(
    alpha: Matrix,
    beta: Matrix,
    gamma: Matrix,
    *,
    hurwitz_tol: float = HURWITZ_TOL,
    residual_tol: float = RESIDUAL_TOL,
) -> Matrix:
    """Unique solution s of alpha*s + s*beta^T + gamma = 0.

    Parameters
    ----------
    alpha, beta
        Hurwitz matrices (all eigenvalue real parts below -hurwitz_tol),
        of orders n and p.
    gamma
        Constant term, n x p.

    Returns
    -------
    s : (n, p) ndarray

    Raises
    ------
    NotHurwitz
        If either coefficient matrix fails the stability precondition.
    SolverSingular
        If the vectorized system is numerically singular or the residual
        certificate fails.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    _check_sylvester_inputs(alpha, beta, gamma, hurwitz_tol)
    if max(alpha.shape[0], beta.shape[0]) <= KRON_CUTOFF:
        sigma = sylvester_kron_solve(alpha, beta, gamma)
    else:
        try:
            sigma = scipy.linalg.solve_sylvester(alpha, beta.T, -gamma)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverSingular(f"Schur solve failed: {exc}") from exc
    residual = np.linalg.norm(alpha @ sigma + sigma @ beta.T + gamma)
    scale = (
        np.linalg.norm(alpha) * np.linalg.norm(sigma)
        + np.linalg.norm(sigma) * np.linalg.norm(beta)
        + np.linalg.norm(gamma)
    )
    if not residual <= residual_tol * max(scale, np.finfo(float).tiny):
        raise SolverSingular(
            f"residual {residual:.3e} exceeds {residual_tol:.1e} x scale {scale:.3e}"
        )
    return sigma


def solve_lyapunov(
    a: Matrix,
    q: Matrix,
    *,
    hurwitz_tol: float = HURWITZ_TOL,
    residual_tol: float = RESIDUAL_TOL,
) -> Matrix:
    """Unique solution P of a*P + P*a^T + q = 0 for Hurwitz a, symmetric q.

    The returned matrix is exactly symmetric.
    """
    q = symmetric_part(np.asarray(q, dtype=float))
    p = solve_sylvester(
        a, a, q, hurwitz_tol=hurwitz_tol, residual_tol=residual_tol
    )
    return symmetric_part(p)


def symmetric_matrix_function(f: Callable[[float], float], x: Matrix) -> Matrix:
    """Evaluate a scalar function at a real symmetric matrix.

    Uses the eigendecomposition x = V diag(w) V^T with orthogonal V and
    returns V diag(f(w)) V^T, which commutes with x.
    """
    x = np.asarray(x, dtype=float)
    try:
        w, v = np.linalg.eigh(x)
    except np.linalg.LinAlgError as exc:
        raise EigFailure(f"symmetric eigensolve failed: {exc}") from exc
    # eigh propagates NaN silently on some BLAS backends
    if not np.all(np.isfinite(w)):
        raise EigFailure("symmetric eigensolve returned non-finite spectrum")
    fw = np.array([f(wi) for wi in w], dtype=float)
    return symmetric_part((v * fw) @ v.T)


class SymplecticCheck(NamedTuple):
    residual: float
    det: float


def symplectic_residual(s: Matrix, theta: Matrix) -> SymplecticCheck:
    """Distance of S from the group preserving the form theta.

    Returns ||S theta S^T - theta|| together with det S; members have
    residual 0 and determinant 1.
    """
    s = np.asarray(s, dtype=float)
    theta = np.asarray(theta, dtype=float)
    residual = float(np.linalg.norm(s @ theta @ s.T - theta))
    return SymplecticCheck(residual, float(np.linalg.det(s)))


def quantum_psd_margin(p: Matrix, theta: Matrix) -> float:
    """Minimum eigenvalue of the Hermitian matrix P + i*theta.

    Computed from the real symmetric embedding [[P, -theta], [theta, P]],
    in which each Hermitian eigenvalue appears twice; a nonnegative
    result certifies admissibility of P as a quantum covariance real
    part. For theta = 0 this degenerates to the minimum eigenvalue of P.
    """
    p = np.asarray(p, dtype=float)
    theta = np.asarray(theta, dtype=float)
    embedding = np.block([[p, -theta], [theta, p]])
    try:
        return float(np.linalg.eigvalsh(embedding)[0])
    except np.linalg.LinAlgError as exc:
        raise EigFailure(f"embedding eigensolve failed: {exc}") from exc
