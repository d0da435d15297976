"""Seeded random instances for property checks."""

from __future__ import annotations

import numpy as np

from .qchannel import KrausSet, kraus_from_factor
from .qstate import DensityMatrix, validate_density


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex normal entries (unit variance per component)."""
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(complex_normal(rng, (d, d)))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    g = complex_normal(rng, (d, rank or d))
    m = g @ g.conj().T
    return validate_density(m / np.trace(m).real)


def random_pure(d: int, rng: np.random.Generator) -> DensityMatrix:
    return random_density(d, rng, rank=1)


def random_factor(d: int, rng: np.random.Generator, K: int | None = None) -> np.ndarray:
    return complex_normal(rng, (d * d, K or d * d))


def random_kraus(d: int, rng: np.random.Generator, K: int | None = None, eps: float = 1e-6) -> KrausSet:
    return kraus_from_factor(random_factor(d, rng, K), eps)
