"""Shared fixtures: the bundled reference cascade and random model factories."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from qcascade.cli import CascadeSpecFile, build_cascade, load_spec
from qcascade.linalg import is_hurwitz, symplectic_exponential
from qcascade.oscillator import CascadeModel, OscillatorParams, default_theta

EXAMPLE_PATH = Path(__file__).resolve().parent.parent / "examples" / "paper_sec9.json"

# comfortable margin so finite-difference probes stay Hurwitz
RANDOM_MARGIN = -0.05


@pytest.fixture(scope="session")
def reference_spec() -> CascadeSpecFile:
    return load_spec(EXAMPLE_PATH)


@pytest.fixture(scope="session")
def reference_cascade(reference_spec) -> CascadeModel:
    return build_cascade(reference_spec)


def make_oscillator(
    rng: np.random.Generator,
    m: int,
    n: int = 2,
    margin: float = RANDOM_MARGIN,
    max_tries: int = 200,
) -> OscillatorParams:
    """Random oscillator with spectral abscissa below ``margin``."""
    from qcascade.linalg import J2

    j_ito = np.kron(J2, np.eye(m // 2))
    for _ in range(max_tries):
        r = rng.standard_normal((n, n)) * 0.6
        r = 0.5 * (r + r.T)
        mcoup = rng.standard_normal((m, n)) * 0.8
        params = OscillatorParams(theta=default_theta(n), r_energy=r, m_coupling=mcoup)
        a = 2.0 * params.theta @ (r + mcoup.T @ j_ito @ mcoup)
        stable, abscissa = is_hurwitz(a, tol=0.0)
        if stable and abscissa < margin:
            return params
    raise RuntimeError("could not sample a stable oscillator")


def make_cascade(
    rng: np.random.Generator,
    n_osc: int,
    m: int,
    margin: float = RANDOM_MARGIN,
) -> CascadeModel:
    from qcascade.oscillator import assemble_cascade

    return assemble_cascade(
        [make_oscillator(rng, m, margin=margin) for _ in range(n_osc)]
    )


@pytest.fixture(scope="session")
def random_corpus() -> list[CascadeModel]:
    """Twenty random stable cascades, N <= 4, one mode each, m in {2, 4, 6}."""
    rng = np.random.default_rng(20260814)
    corpus = []
    for i in range(20):
        n_osc = 1 + i % 4
        m = (2, 4, 6)[i % 3]
        corpus.append(make_cascade(rng, n_osc, m))
    return corpus


def random_symplectic(rng: np.random.Generator, n: int, scale: float = 0.4) -> np.ndarray:
    h = rng.standard_normal((n, n)) * scale
    return symplectic_exponential(0.5 * (h + h.T))


def random_blockdiag_symplectic(
    rng: np.random.Generator, dims: tuple[int, ...], scale: float = 0.4
) -> list[np.ndarray]:
    return [random_symplectic(rng, n, scale) for n in dims]
