"""Steady-state covariance analysis of oscillator cascades.

The invariant covariance of the composite state solves the algebraic
Lyapunov equation A P + P A^T + B B^T = 0. Two independent routes are
provided: a direct solve on the composite matrices and a block recursion
that adds one oscillator at a time. Schur complements of the leading
blocks split the log-determinant of P into per-oscillator terms, which
is the quantity the gradient and balancing modules act on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky

from .errors import NonPositive, NotHurwitz, SingularLeadingBlock, SingularTheta
from .linalg import Matrix, is_hurwitz, solve_lyapunov, solve_sylvester
from .oscillator import CascadeModel

PSD_TOL = 1e-9


@dataclass(frozen=True)
class SteadyStateResult:
    """Invariant covariance together with its Schur-complement split.

    ``pi_k[k]`` is the conditional covariance of oscillator k given its
    predecessors, ``pi_tail_k[k]`` the conditional covariance of the
    whole tail from k on, ``t_k[k]`` the regression gain of the tail on
    the leading block. ``v_k`` are the per-oscillator log-determinant
    contributions summing to ``v_logdet``.
    """

    p_full: Matrix
    pi_k: tuple[Matrix, ...]
    pi_tail_k: tuple[Matrix, ...]
    t_k: tuple[Matrix, ...]
    purity: float
    v_logdet: float
    v_k: tuple[float, ...]


def invariant_covariance_direct(cascade: CascadeModel) -> Matrix:
    """Steady-state covariance from one Lyapunov solve on the composite."""
    stable, margin = is_hurwitz(cascade.a)
    if not stable:
        raise NotHurwitz(
            f"composite dynamics matrix has spectral abscissa {margin:.3e}"
        )
    p = solve_lyapunov(cascade.a, cascade.b @ cascade.b.T)
    floor = np.linalg.eigvalsh(p)[0]
    if floor < -PSD_TOL * max(1.0, np.linalg.norm(p)):
        raise NonPositive(f"covariance has eigenvalue {floor:.3e}")
    return p


def invariant_covariance_recursive(cascade: CascadeModel) -> Matrix:
    """Steady-state covariance built one oscillator at a time.

    Step k solves a Sylvester equation for the cross block between
    oscillator k and its predecessors, then a Lyapunov equation for the
    new diagonal block. Agrees with the direct route to round-off.
    """
    for k, (flag, margin) in enumerate(cascade.hurwitz):
        if not flag:
            raise NotHurwitz(
                f"oscillator {k} has spectral abscissa {margin:.3e}"
            )
    r1 = cascade.realizations[0]
    p = solve_lyapunov(r1.a, r1.b @ r1.b.T)
    a_lead = r1.a
    b_lead = r1.b
    c_lead = r1.c
    for rk in cascade.realizations[1:]:
        q_k = solve_sylvester(rk.a, a_lead, rk.b @ (c_lead @ p + b_lead.T))
        forcing = rk.b @ c_lead @ q_k.T
        p_kk = solve_lyapunov(rk.a, forcing + forcing.T + rk.b @ rk.b.T)
        p = np.block([[p, q_k.T], [q_k, p_kk]])
        a_lead = np.block(
            [
                [a_lead, np.zeros((a_lead.shape[0], rk.a.shape[0]))],
                [rk.b @ c_lead, rk.a],
            ]
        )
        b_lead = np.vstack([b_lead, rk.b])
        c_lead = np.hstack([c_lead, rk.c])
    return p


@dataclass(frozen=True)
class SchurSplit:
    pi_k: tuple[Matrix, ...]
    pi_tail_k: tuple[Matrix, ...]
    t_k: tuple[Matrix, ...]


def schur_complements(p_full: Matrix, dims: Sequence[int]) -> SchurSplit:
    """Schur complements of the nested leading blocks of a covariance.

    For each block index k this removes the influence of blocks before k:
    the tail complement is P_tail - T Q^T with T the regression gain
    Q P_lead^{-1}, computed through a Cholesky factorization of the
    leading block, never an explicit inverse.
    """
    dims = tuple(int(d) for d in dims)
    n = p_full.shape[0]
    if sum(dims) != n:
        raise ValueError(f"block dims {dims} do not sum to order {n}")
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    pi_k: list[Matrix] = [p_full[: dims[0], : dims[0]].copy()]
    pi_tail: list[Matrix] = [p_full.copy()]
    t_k: list[Matrix] = [np.zeros((n, 0))]
    for k in range(1, len(dims)):
        off = offsets[k]
        lead = p_full[:off, :off]
        q_tail = p_full[off:, :off]
        try:
            factor = cho_factor(lead, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularLeadingBlock(
                f"leading block of order {off} is not positive definite: {exc}"
            ) from exc
        t = cho_solve(factor, q_tail.T).T
        tail = p_full[off:, off:] - t @ q_tail.T
        tail = 0.5 * (tail + tail.T)
        pi_tail.append(tail)
        t_k.append(t)
        pi_k.append(tail[: dims[k], : dims[k]].copy())
    return SchurSplit(pi_k=tuple(pi_k), pi_tail_k=tuple(pi_tail), t_k=tuple(t_k))


def schur_tail_step(pi_tail_prev: Matrix, n_prev: int) -> Matrix:
    """One step of the tail recursion: complement out the leading block."""
    gamma = pi_tail_prev[:n_prev, :n_prev]
    beta = pi_tail_prev[n_prev:, :n_prev]
    alpha = pi_tail_prev[n_prev:, n_prev:]
    try:
        factor = cho_factor(gamma, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularLeadingBlock(
            f"leading block of order {n_prev} is not positive definite: {exc}"
        ) from exc
    out = alpha - beta @ cho_solve(factor, beta.T)
    return 0.5 * (out + out.T)


def purity_and_logdet(p: Matrix, theta: Matrix) -> tuple[float, float]:
    """Purity sqrt(det theta / det p) and V = ln det p.

    Both determinants go through triangular factorizations: Cholesky for
    the covariance, LU (through slogdet) for the commutation matrix.
    """
    try:
        chol = cholesky(p, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NonPositive(f"covariance is not positive definite: {exc}") from exc
    v = 2.0 * float(np.sum(np.log(np.diag(chol))))
    sign, logdet_theta = np.linalg.slogdet(theta)
    if sign <= 0 or not np.isfinite(logdet_theta):
        raise SingularTheta("commutation matrix has nonpositive determinant")
    purity = float(np.exp(0.5 * (logdet_theta - v)))
    return purity, v


def steady_state(cascade: CascadeModel, method: str = "recursive") -> SteadyStateResult:
    """Full steady-state summary of a cascade.

    Parameters
    ----------
    cascade : CascadeModel
    method : {"recursive", "direct"}
        Which covariance route to use; both satisfy the same Lyapunov
        equation and agree to solver accuracy.
    """
    if method == "direct":
        p = invariant_covariance_direct(cascade)
    elif method == "recursive":
        p = invariant_covariance_recursive(cascade)
    else:
        raise ValueError(f"unknown method {method!r}")
    split = schur_complements(p, cascade.dims)
    v_k = []
    for k, pi in enumerate(split.pi_k):
        sign, logdet = np.linalg.slogdet(pi)
        if sign <= 0:
            raise NonPositive(f"conditional covariance of oscillator {k} is singular")
        v_k.append(float(logdet))
    purity, v = purity_and_logdet(p, cascade.theta)
    return SteadyStateResult(
        p_full=p,
        pi_k=split.pi_k,
        pi_tail_k=split.pi_tail_k,
        t_k=split.t_k,
        purity=purity,
        v_logdet=v,
        v_k=tuple(v_k),
    )


def _simpson_panel(
    f: Callable[[float], np.ndarray],
    lo: float,
    hi: float,
    f_lo: np.ndarray,
    f_mid: np.ndarray,
    f_hi: np.ndarray,
    tol: float,
    depth: int,
) -> np.ndarray:
    mid = 0.5 * (lo + hi)
    lm = 0.5 * (lo + mid)
    rm = 0.5 * (mid + hi)
    f_lm = f(lm)
    f_rm = f(rm)
    s_whole = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
    s_left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_lm + f_mid)
    s_right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_rm + f_hi)
    refined = s_left + s_right
    err = np.linalg.norm(refined - s_whole)
    if err <= 15.0 * tol or depth <= 0:
        return refined + (refined - s_whole) / 15.0
    return _simpson_panel(
        f, lo, mid, f_lo, f_lm, f_mid, 0.5 * tol, depth - 1
    ) + _simpson_panel(f, mid, hi, f_mid, f_rm, f_hi, 0.5 * tol, depth - 1)


def frequency_domain_covariance(
    a: Matrix,
    b: Matrix,
    j_ito: Matrix,
    rel_tol: float = 1e-8,
    panels: int = 64,
) -> tuple[Matrix, Matrix]:
    """Covariance by frequency-domain quadrature, independent of any
    Lyapunov solver.

    Integrates F(i lam) Omega F(i lam)^* / (2 pi) with Omega = I + i J
    over [-L, L] by adaptive Simpson panels and adds the analytic
    O(1/lam^2) tail beyond L. Returns (real part, imaginary part); the
    real part estimates the covariance, the imaginary part the
    commutation matrix.
    """
    n = a.shape[0]
    stable, margin = is_hurwitz(a)
    if not stable:
        raise NotHurwitz(f"dynamics matrix has spectral abscissa {margin:.3e}")
    omega = np.eye(j_ito.shape[0]) + 1j * j_ito
    radius = float(np.max(np.abs(np.linalg.eigvals(a))))
    lam_max = 100.0 * max(1.0, radius)
    eye = np.eye(n)
    b_c = b.astype(complex)

    def integrand(lam: float) -> np.ndarray:
        f = np.linalg.solve(1j * lam * eye - a, b_c)
        return (f @ omega @ f.conj().T) / (2.0 * np.pi)

    scale = max(1.0, float(np.linalg.norm(b @ b.T)))
    tol_total = rel_tol * scale
    grid = np.linspace(-lam_max, lam_max, panels + 1)
    values = [integrand(g) for g in grid]
    total = np.zeros((n, n), dtype=complex)
    for i in range(panels):
        lo, hi = grid[i], grid[i + 1]
        mid = 0.5 * (lo + hi)
        total += _simpson_panel(
            integrand,
            lo,
            hi,
            values[i],
            integrand(mid),
            values[i + 1],
            tol_total / panels,
            depth=28,
        )
    # |lam| > L: F ~ B / (i lam), even term integrates to 1/(pi L)
    total += (b @ omega @ b.T) / (np.pi * lam_max)
    return np.real(total), np.imag(total)
