"""Uncertainty propagation from oscillator parameters to the purity.

Parameter errors of oscillator k are modelled as a Gaussian vector
de_k = [vech dR_k; vec dM_k] with covariance Sigma_k (columns-first
conventions throughout). To first order the log-determinant responds by
dV = g_k^T de_k with g_k the duplication-weighted gradient stack, so the
variance of dV is the sensitivity index Z = sum_k g_k^T Sigma_k g_k.

The module provides the index itself, a Monte-Carlo validation of the
first-order law, the Fisher-information counterpart defined through the
covariance responses, and Gaussian relative-entropy helpers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag, cho_factor, cho_solve

from .covariance import invariant_covariance_direct
from .errors import NonPositive, TooManyRejections
from .gradients import GradientSet, covariance_derivatives
from .linalg import HURWITZ_TOL, Matrix, duplication_matrix
from .oscillator import CascadeModel

MC_CHUNK = 2048
MC_REJECTION_CAP = 0.01


@dataclass(frozen=True)
class OscillatorUncertainty:
    """Error model of one oscillator.

    Either isotropic bounds (``energy_weight`` a_k for the vech R block,
    ``coupling_weight`` b_k for the vec M block) or a full ``sigma``
    covariance over [vech dR; vec dM].
    """

    energy_weight: float | None = None
    coupling_weight: float | None = None
    sigma: Matrix | None = None

    def sigma_matrix(self, n: int, m: int) -> Matrix:
        d_r = n * (n + 1) // 2
        d_m = m * n
        if self.sigma is not None:
            if self.sigma.shape != (d_r + d_m, d_r + d_m):
                raise ValueError(
                    f"sigma has shape {self.sigma.shape}, expected {(d_r + d_m,) * 2}"
                )
            return self.sigma
        if self.energy_weight is None or self.coupling_weight is None:
            raise ValueError("either sigma or both weights must be set")
        return block_diag(
            self.energy_weight * np.eye(d_r), self.coupling_weight * np.eye(d_m)
        )

    def weights(self) -> tuple[float, float]:
        if self.energy_weight is None or self.coupling_weight is None:
            raise ValueError("weight-form bounds are not available")
        return float(self.energy_weight), float(self.coupling_weight)


@dataclass(frozen=True)
class UncertaintyModel:
    oscillators: tuple[OscillatorUncertainty, ...]

    @classmethod
    def from_weights(
        cls, weights: Sequence[tuple[float, float]]
    ) -> "UncertaintyModel":
        return cls(
            oscillators=tuple(
                OscillatorUncertainty(energy_weight=a, coupling_weight=b)
                for a, b in weights
            )
        )


@dataclass(frozen=True)
class SensitivityIndex:
    z_total: float
    z_k: tuple[float, ...]


def duplication_weighted_gradient(gradients: GradientSet, k: int) -> np.ndarray:
    """g_k = [dup^T vec rho_k; vec mu_k], doubling off-diagonal entries."""
    rho = gradients.rho[k]
    dup = duplication_matrix(rho.shape[0])
    g_r = dup.T @ rho.reshape(-1, order="F")
    return np.concatenate([g_r, gradients.mu[k].reshape(-1, order="F")])


def sensitivity_index(
    gradients: GradientSet, uncertainty: UncertaintyModel
) -> SensitivityIndex:
    """First-order variance of V under the per-oscillator error model."""
    if len(uncertainty.oscillators) != len(gradients.rho):
        raise ValueError("one uncertainty entry per oscillator required")
    z_k = []
    for k, unc in enumerate(uncertainty.oscillators):
        n = gradients.rho[k].shape[0]
        m = gradients.mu[k].shape[0]
        g = duplication_weighted_gradient(gradients, k)
        sigma = unc.sigma_matrix(n, m)
        z_k.append(float(g @ sigma @ g))
    return SensitivityIndex(z_total=float(sum(z_k)), z_k=tuple(z_k))


def _transformed_pair(
    gradients: GradientSet, k: int, s: Matrix
) -> tuple[Matrix, Matrix]:
    return s @ gradients.rho[k] @ s.T, gradients.mu[k] @ s.T


def phi_transformed(
    gradients: GradientSet, uncertainty: UncertaintyModel, k: int, s: Matrix
) -> float:
    """Exact index contribution of oscillator k after X_k -> S X_k."""
    rho_s, mu_s = _transformed_pair(gradients, k, s)
    dup = duplication_matrix(rho_s.shape[0])
    g = np.concatenate(
        [dup.T @ rho_s.reshape(-1, order="F"), mu_s.reshape(-1, order="F")]
    )
    sigma = uncertainty.oscillators[k].sigma_matrix(rho_s.shape[0], mu_s.shape[0])
    return float(g @ sigma @ g)


def psi_transformed(
    gradients: GradientSet, uncertainty: UncertaintyModel, k: int, s: Matrix
) -> float:
    """Upper bound 2 a_k |S rho S^T|^2 + b_k |mu S^T|^2 on phi."""
    a_k, b_k = uncertainty.oscillators[k].weights()
    rho_s, mu_s = _transformed_pair(gradients, k, s)
    return float(
        2.0 * a_k * np.linalg.norm(rho_s) ** 2 + b_k * np.linalg.norm(mu_s) ** 2
    )


@dataclass(frozen=True)
class MonteCarloResult:
    variance: float
    predicted: float
    ratio: float
    samples: int
    rejected: int


def _sigma_sqrt(sigma: Matrix) -> Matrix:
    sigma = 0.5 * (sigma + sigma.T)
    w, v = np.linalg.eigh(sigma)
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    if np.any(w < -1e-12 * scale):
        raise NonPositive(f"uncertainty covariance has eigenvalue {w.min():.3e}")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def _vech_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    rows = []
    cols = []
    for j in range(n):
        for i in range(j, n):
            rows.append(i)
            cols.append(j)
    return np.asarray(rows), np.asarray(cols)


def monte_carlo_variance(
    cascade: CascadeModel,
    uncertainty: UncertaintyModel,
    gradients: GradientSet,
    samples: int = 100_000,
    epsilon: float = 1e-6,
    seed: int = 0,
    chunk: int = MC_CHUNK,
) -> MonteCarloResult:
    """Sample variance of dV against the first-order prediction eps Z.

    Draws de_k ~ N(0, eps Sigma_k) independently per oscillator, rebuilds
    the composite model for every sample in vectorized chunks, solves the
    Lyapunov equations in batch through Kronecker form and compares the
    sample variance of dV with eps Z. Samples whose perturbed model is
    unstable are rejected; more than one percent of rejections aborts.

    Results are reproducible for a fixed (seed, samples, chunk) triple;
    the chunk size takes part in how the random stream is consumed.
    """
    n = cascade.n
    nosc = cascade.n_oscillators
    theta = cascade.theta
    j_ito = cascade.j_ito
    eye = np.eye(n)
    p0 = invariant_covariance_direct(cascade)
    sign0, v0 = np.linalg.slogdet(p0)
    if sign0 <= 0:
        raise NonPositive("base covariance is not positive definite")
    z_total = sensitivity_index(gradients, uncertainty).z_total
    predicted = epsilon * z_total

    sqrt_factors = []
    vech_idx = []
    for k in range(nosc):
        nk = cascade.dims[k]
        sigma = uncertainty.oscillators[k].sigma_matrix(nk, cascade.m)
        sqrt_factors.append(_sigma_sqrt(epsilon * sigma))
        vech_idx.append(_vech_indices(nk))

    rng = np.random.default_rng(seed)
    deltas: list[np.ndarray] = []
    rejected = 0
    done = 0
    while done < samples:
        s_chunk = min(chunk, samples - done)
        r_samples = []
        m_samples = []
        for k in range(nosc):
            nk = cascade.dims[k]
            d_r = nk * (nk + 1) // 2
            d_all = d_r + cascade.m * nk
            draw = rng.standard_normal((s_chunk, d_all)) @ sqrt_factors[k].T
            rows, cols = vech_idx[k]
            dr = np.zeros((s_chunk, nk, nk))
            dr[:, rows, cols] = draw[:, :d_r]
            dr[:, cols, rows] = draw[:, :d_r]
            dm = draw[:, d_r:].reshape(s_chunk, nk, cascade.m).transpose(0, 2, 1)
            r_samples.append(cascade.params[k].r_energy + dr)
            m_samples.append(cascade.params[k].m_coupling + dm)

        r_full = np.zeros((s_chunk, n, n))
        for k in range(nosc):
            bk = cascade.block(k)
            r_full[:, bk, bk] = r_samples[k]
            for jx in range(k + 1, nosc):
                bj = cascade.block(jx)
                blk = np.einsum(
                    "sai,ab,sbj->sij", m_samples[jx], j_ito, m_samples[k]
                )
                r_full[:, bj, bk] = blk
                r_full[:, bk, bj] = blk.transpose(0, 2, 1)
        m_full = np.concatenate(m_samples, axis=2)
        inner = np.einsum("sai,ab,sbj->sij", m_full, j_ito, m_full)
        a_s = 2.0 * theta @ (r_full + inner)
        b_s = 2.0 * theta @ m_full.transpose(0, 2, 1)
        bbt = b_s @ b_s.transpose(0, 2, 1)

        stable = np.ones(s_chunk, dtype=bool)
        for k in range(nosc):
            bk = cascade.block(k)
            evs = np.linalg.eigvals(a_s[:, bk, bk])
            stable &= np.max(evs.real, axis=1) < -HURWITZ_TOL

        kmat = np.einsum("ac,sbd->sabcd", eye, a_s).reshape(s_chunk, n * n, n * n)
        kmat += np.einsum("sac,bd->sabcd", a_s, eye).reshape(s_chunk, n * n, n * n)
        vec_p = np.linalg.solve(
            kmat[stable], -bbt[stable].reshape(-1, n * n)[:, :, None]
        )[:, :, 0]
        p_s = vec_p.reshape(-1, n, n)
        p_s = 0.5 * (p_s + p_s.transpose(0, 2, 1))
        sign, logdet = np.linalg.slogdet(p_s)
        good = sign > 0
        rejected += int(s_chunk - np.count_nonzero(stable)) + int(
            np.count_nonzero(~good)
        )
        deltas.append(logdet[good] - v0)
        done += s_chunk

    if rejected > MC_REJECTION_CAP * samples:
        raise TooManyRejections(
            f"{rejected} of {samples} samples left the stability domain"
        )
    dv = np.concatenate(deltas)
    variance = float(np.var(dv, ddof=1)) if dv.size > 1 else 0.0
    ratio = variance / predicted if predicted > 0 else float("nan")
    return MonteCarloResult(
        variance=variance,
        predicted=predicted,
        ratio=ratio,
        samples=samples,
        rejected=rejected,
    )


@dataclass(frozen=True)
class FisherResult:
    z_total: float
    z_k: tuple[float, ...]
    gram_k: tuple[Matrix, ...]


def fisher_metric(p: Matrix, dp: Matrix) -> float:
    """Information-metric norm <dP, P^{-1} dP P^{-1}> of a perturbation."""
    try:
        factor = cho_factor(p, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NonPositive(f"covariance is not positive definite: {exc}") from exc
    y = cho_solve(factor, dp)
    return float(np.trace(y @ y))


def fisher_sensitivity(
    cascade: CascadeModel,
    uncertainty: UncertaintyModel,
    derivatives: tuple[tuple[Matrix, ...], ...] | None = None,
    p_full: Matrix | None = None,
) -> FisherResult:
    """Information-metric sensitivity sum_k Tr(G_k Sigma_k).

    G_k is the Gram matrix of the covariance responses under the metric
    of :func:`fisher_metric`, taken over the same parameter basis as the
    gradient stack.
    """
    if p_full is None:
        p_full = invariant_covariance_direct(cascade)
    if derivatives is None:
        derivatives = covariance_derivatives(cascade, p_full)
    try:
        factor = cho_factor(p_full, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NonPositive(f"covariance is not positive definite: {exc}") from exc
    z_k = []
    grams = []
    for k, responses in enumerate(derivatives):
        ys = [cho_solve(factor, dp) for dp in responses]
        d = len(ys)
        gram = np.empty((d, d))
        for a in range(d):
            for b in range(a, d):
                val = float(np.trace(ys[a] @ ys[b]))
                gram[a, b] = val
                gram[b, a] = val
        nk = cascade.dims[k]
        sigma = uncertainty.oscillators[k].sigma_matrix(nk, cascade.m)
        grams.append(gram)
        z_k.append(float(np.trace(gram @ sigma)))
    return FisherResult(z_total=float(sum(z_k)), z_k=tuple(z_k), gram_k=tuple(grams))


def _inv_sqrt(p: Matrix, label: str) -> Matrix:
    w, v = np.linalg.eigh(0.5 * (p + p.T))
    if np.any(w <= 0):
        raise NonPositive(f"{label} is not positive definite")
    return (v / np.sqrt(w)) @ v.T


def kl_gaussian(p: Matrix, p_star: Matrix) -> float:
    """Relative entropy of N(0, p) from N(0, p_star).

    Equals (Tr chi - ln det chi - n) / 2 with chi the whitened ratio
    p_star^{-1/2} p p_star^{-1/2}.
    """
    n = p.shape[0]
    isq = _inv_sqrt(p_star, "reference covariance")
    chi = isq @ p @ isq
    sign, logdet = np.linalg.slogdet(chi)
    if sign <= 0:
        raise NonPositive("covariance ratio is not positive definite")
    return 0.5 * (float(np.trace(chi)) - float(logdet) - n)


def kl_quadratic(p: Matrix, p_star: Matrix) -> float:
    """Small-deviation approximation |chi - I|^2 / 4 of the relative entropy."""
    isq = _inv_sqrt(p_star, "reference covariance")
    chi = isq @ p @ isq
    return 0.25 * float(np.linalg.norm(chi - np.eye(p.shape[0])) ** 2)
