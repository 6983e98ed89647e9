"""Gradients of the steady-state log-determinant V = ln det P.

V is differentiated with respect to the energy matrix R_k (symmetric
direction, gradient ``rho``) and the coupling matrix M_k (gradient
``mu``) of each oscillator. Sign convention: rho_k = +dV/dR_k and
mu_k = -dV/dM_k under the Frobenius inner product. V is invariant
under reflecting any coupling matrix (M_k -> -M_k conjugates the
cascade by a signature matrix), so the coupling gradient is defined
only up to this orientation; the package fixes it as above, and every
route here (direct, recursive, finite differences) reports it the
same way.

Three independent routes are implemented: a direct formula through the
observability Gramian of the whole cascade, a recursive formula that
works tail by tail through the Schur complements, and a finite
difference oracle. First-order covariance perturbations are also
exposed for the Fisher-information analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .covariance import SteadyStateResult, invariant_covariance_direct, steady_state
from .errors import NonPositive, NotHurwitz, NotSymplectic
from .linalg import (
    Matrix,
    antisymmetric_part,
    solve_lyapunov,
    solve_sylvester,
    symmetric_part,
    symplectic_residual,
    vech,
)
from .oscillator import CascadeModel, OscillatorParams, assemble_cascade

SYMPLECTIC_TOL = 1e-9


@dataclass(frozen=True)
class GradientSet:
    """Per-oscillator gradients of V, plus optional Gramian data.

    ``rho[k]`` is symmetric of the oscillator order, ``mu[k]`` has the
    coupling shape (field channels x oscillator order) and carries the
    package orientation mu_k = -dV/dM_k. ``q_gramian`` and
    ``hankelian`` hold the observability Gramian Q and the product
    Q P of the full cascade when the producing route computes them.
    """

    rho: tuple[Matrix, ...]
    mu: tuple[Matrix, ...]
    q_gramian: Matrix | None = None
    hankelian: Matrix | None = None

    def d_vector(self, k: int) -> np.ndarray:
        """Stacked [vech rho_k; vec mu_k], columns first."""
        return np.concatenate([vech(self.rho[k]), self.mu[k].reshape(-1, order="F")])


def _pd_inverse(mat: Matrix, label: str) -> Matrix:
    try:
        factor = cho_factor(mat, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NonPositive(f"{label} is not positive definite: {exc}") from exc
    inv = cho_solve(factor, np.eye(mat.shape[0]))
    return 0.5 * (inv + inv.T)


def observability_gramian_and_hankelian(
    a: Matrix, p_full: Matrix
) -> tuple[Matrix, Matrix]:
    """Gramian Q solving A^T Q + Q A + P^{-1} = 0 and the product Q P.

    Q P is similar to the symmetric P^{1/2} Q P^{1/2}, so its spectrum
    is real and nonnegative.
    """
    p_inv = _pd_inverse(p_full, "covariance")
    q = solve_sylvester(a.T, a.T, p_inv)
    q = 0.5 * (q + q.T)
    return q, q @ p_full


def _mu_coupling_terms(
    cascade: CascadeModel, k: int, h_cols: Matrix
) -> Matrix:
    """Common 8 J (...) part of the coupling gradient.

    ``h_cols`` holds the first n_k columns of the relevant Hankelian-like
    matrix, rows running over oscillators k..N.
    """
    nk = cascade.dims[k]
    theta_k = cascade.params[k].theta
    acc = cascade.params[k].m_coupling @ antisymmetric_part(theta_k @ h_cols[:nk, :])
    loc = nk
    for j in range(k + 1, cascade.n_oscillators):
        nj = cascade.dims[j]
        acc += (
            cascade.params[j].m_coupling
            @ cascade.params[j].theta
            @ h_cols[loc : loc + nj, :]
        )
        loc += nj
    return 8.0 * cascade.j_ito @ acc


def purity_gradients_direct(
    cascade: CascadeModel, p_full: Matrix | None = None
) -> GradientSet:
    """Gradients from one Gramian of the whole cascade.

    rho_k is minus four times the symmetric part of theta_k H_kk, with H
    the product Q P restricted to the (k, k) block; mu_k combines the
    input-side term B^T Q theta_k with coupling corrections from all
    blocks of H interacting with oscillator k.
    """
    if p_full is None:
        p_full = invariant_covariance_direct(cascade)
    q, h = observability_gramian_and_hankelian(cascade.a, p_full)
    rho: list[Matrix] = []
    mu: list[Matrix] = []
    for k in range(cascade.n_oscillators):
        blk = cascade.block(k)
        theta_k = cascade.params[k].theta
        h_kk = h[blk, blk]
        rho.append(-4.0 * symmetric_part(theta_k @ h_kk))
        mu_k = 4.0 * cascade.b.T @ q[:, blk] @ theta_k
        mu_k += _mu_coupling_terms(cascade, k, h[cascade.offset(k) :, blk])
        for j in range(k):
            blj = cascade.block(j)
            mu_k += (
                8.0
                * cascade.j_ito
                @ cascade.params[j].m_coupling
                @ h[blk, blj].T
                @ theta_k
            )
        mu.append(-mu_k)
    return GradientSet(rho=tuple(rho), mu=tuple(mu), q_gramian=q, hankelian=h)


def purity_gradients_recursive(
    cascade: CascadeModel, steady: SteadyStateResult | None = None
) -> GradientSet:
    """Gradients from tail subproblems, one oscillator at a time.

    For each k the tail covariance (the Schur complement of the leading
    block) obeys its own Lyapunov equation with an effective input
    matrix; its Gramian, together with one Sylvester correction that
    accounts for the dependence of the leading covariance on oscillator
    k, reproduces the direct gradients.
    """
    if steady is None:
        steady = steady_state(cascade)
    p = steady.p_full
    rho: list[Matrix] = []
    mu: list[Matrix] = []
    q_full: Matrix | None = None
    hank: Matrix | None = None
    for k in range(cascade.n_oscillators):
        off = cascade.offset(k)
        nk = cascade.dims[k]
        theta_k = cascade.params[k].theta
        a_tail = cascade.a[off:, off:]
        b_lead = cascade.b[:off, :]
        b_tilde = cascade.b[off:, :] - steady.t_k[k] @ b_lead
        pi_tail = steady.pi_tail_k[k]
        pi_inv = _pd_inverse(pi_tail, f"tail covariance at oscillator {k}")
        q_tail = solve_sylvester(a_tail.T, a_tail.T, pi_inv)
        q_tail = 0.5 * (q_tail + q_tail.T)
        h_cols = (q_tail @ pi_tail)[:, :nk]
        mu_k = 4.0 * b_tilde.T @ q_tail[:, :nk] @ theta_k
        if k > 0:
            a_lead = cascade.a[:off, :off]
            c_lead = cascade.c[:, :off]
            p_lead = p[:off, :off]
            q_k = p[off : off + nk, :off]
            try:
                lead_factor = cho_factor(p_lead, lower=True)
            except np.linalg.LinAlgError as exc:
                raise NonPositive(
                    f"leading covariance before oscillator {k} is singular: {exc}"
                ) from exc
            w = cho_solve(lead_factor, b_lead @ b_tilde.T)
            y = solve_sylvester(a_tail.T, a_lead.T, q_tail @ w.T)
            h_cols = h_cols - y @ q_k.T
            mu_k -= 4.0 * (c_lead @ p_lead + b_lead.T) @ y[:nk, :].T @ theta_k
        rho.append(-4.0 * symmetric_part(theta_k @ h_cols[:nk, :]))
        mu_k += _mu_coupling_terms(cascade, k, h_cols)
        mu.append(-mu_k)
        if k == 0:
            q_full = q_tail
            hank = q_tail @ pi_tail
    return GradientSet(rho=tuple(rho), mu=tuple(mu), q_gramian=q_full, hankelian=hank)


def _log_det_covariance(cascade: CascadeModel) -> float:
    p = invariant_covariance_direct(cascade)
    sign, logdet = np.linalg.slogdet(p)
    if sign <= 0:
        raise NonPositive("perturbed covariance lost positive definiteness")
    return float(logdet)


def _perturbed(
    cascade: CascadeModel, k: int, field: str, delta: Matrix
) -> CascadeModel:
    params = list(cascade.params)
    params[k] = replace(params[k], **{field: getattr(params[k], field) + delta})
    return assemble_cascade(params)


def _fd_value(cascade: CascadeModel, k: int, field: str, delta: Matrix, label: str) -> float:
    try:
        return _log_det_covariance(_perturbed(cascade, k, field, delta))
    except NotHurwitz as exc:
        raise NotHurwitz(f"perturbation of {label} leaves the stability domain: {exc}") from exc


def gradient_fd_oracle(cascade: CascadeModel, h: float = 1e-5) -> GradientSet:
    """Central finite differences of V, matching the gradient convention.

    Off-diagonal energy entries are perturbed in symmetric pairs, so the
    difference quotient carries a factor 1/(4h) there and 1/(2h) on the
    diagonal and for coupling entries. Coupling slopes are reported with
    the package orientation mu_k = -dV/dM_k.
    """
    rho: list[Matrix] = []
    mu: list[Matrix] = []
    for k in range(cascade.n_oscillators):
        nk = cascade.dims[k]
        m = cascade.m
        rho_k = np.zeros((nk, nk))
        for i in range(nk):
            for j in range(i + 1):
                direction = np.zeros((nk, nk))
                direction[i, j] = h
                direction[j, i] = h
                label = f"R_{k}[{i},{j}]"
                plus = _fd_value(cascade, k, "r_energy", direction, label)
                minus = _fd_value(cascade, k, "r_energy", -direction, label)
                slope = (plus - minus) / (4.0 * h) if i != j else (plus - minus) / (2.0 * h)
                rho_k[i, j] = slope
                rho_k[j, i] = slope
        mu_k = np.zeros((m, nk))
        for col in range(nk):
            for row in range(m):
                direction = np.zeros((m, nk))
                direction[row, col] = h
                label = f"M_{k}[{row},{col}]"
                plus = _fd_value(cascade, k, "m_coupling", direction, label)
                minus = _fd_value(cascade, k, "m_coupling", -direction, label)
                mu_k[row, col] = (minus - plus) / (2.0 * h)
        rho.append(rho_k)
        mu.append(mu_k)
    return GradientSet(rho=tuple(rho), mu=tuple(mu))


def transform_gradients(
    gradients: GradientSet,
    transforms: Sequence[Matrix],
    thetas: Sequence[Matrix],
    tol: float = SYMPLECTIC_TOL,
) -> GradientSet:
    """Gradients after the symplectic change of variables X_k -> S_k X_k.

    The energy gradient maps by congruence S rho S^T, the coupling
    gradient by mu S^T. Gramian data transforms contragrediently when
    present.
    """
    if len(transforms) != len(gradients.rho):
        raise ValueError("one transform per oscillator required")
    for k, (s, theta) in enumerate(zip(transforms, thetas)):
        check = symplectic_residual(s, theta)
        if check.residual > tol * max(1.0, float(np.linalg.norm(theta))):
            raise NotSymplectic(
                f"transform {k} has symplectic residual {check.residual:.3e}"
            )
    rho = tuple(s @ r @ s.T for s, r in zip(transforms, gradients.rho))
    mu = tuple(u @ s.T for s, u in zip(transforms, gradients.mu))
    q_new = None
    h_new = None
    if gradients.q_gramian is not None and gradients.hankelian is not None:
        from scipy.linalg import block_diag

        s_full = block_diag(*transforms)
        s_inv = np.linalg.inv(s_full)
        q_new = s_inv.T @ gradients.q_gramian @ s_inv
        h_new = s_inv.T @ gradients.hankelian @ s_full.T
    return GradientSet(rho=rho, mu=mu, q_gramian=q_new, hankelian=h_new)


def covariance_derivatives(
    cascade: CascadeModel, p_full: Matrix | None = None
) -> tuple[tuple[Matrix, ...], ...]:
    """First-order covariance responses along the parameter basis.

    For oscillator k the directions run over the lower-triangular energy
    entries (symmetric pairs, diagonal included, columns first) followed
    by the coupling entries in column-major order, matching
    :meth:`GradientSet.d_vector`. Each response solves the Lyapunov
    equation A dP + dP A^T + 2 Sym(dA P + B dB^T) = 0.

    dA and dB are formed as exact half-differences of the assembled
    matrices, which is exact because A is at most quadratic and B linear
    in the parameters.
    """
    if p_full is None:
        p_full = invariant_covariance_direct(cascade)
    out: list[tuple[Matrix, ...]] = []
    for k in range(cascade.n_oscillators):
        nk = cascade.dims[k]
        m = cascade.m
        directions: list[tuple[str, Matrix]] = []
        for j in range(nk):
            for i in range(j, nk):
                d = np.zeros((nk, nk))
                d[i, j] = 1.0
                d[j, i] = 1.0
                directions.append(("r_energy", d))
        for col in range(nk):
            for row in range(m):
                d = np.zeros((m, nk))
                d[row, col] = 1.0
                directions.append(("m_coupling", d))
        responses: list[Matrix] = []
        for field, d in directions:
            plus = _perturbed(cascade, k, field, d)
            minus = _perturbed(cascade, k, field, -d)
            da = 0.5 * (plus.a - minus.a)
            db = 0.5 * (plus.b - minus.b)
            force = da @ p_full + p_full @ da.T + db @ cascade.b.T + cascade.b @ db.T
            responses.append(solve_lyapunov(cascade.a, force))
        out.append(tuple(responses))
    return tuple(out)
