"""Density matrices and their entropic summaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matcore import as_cmatrix, dagger, fro, herm_eig

STATE_TOL = 1e-8
ZERO_EIG = 1e-12


class DensityError(ValueError):
    """A matrix failed density-matrix validation; ``defect`` is the measured violation."""

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


class NotHermitian(DensityError):
    pass


class NotUnitTrace(DensityError):
    pass


class NotPSD(DensityError):
    pass


@dataclass(frozen=True)
class DensityMatrix:
    """A validated state. Construct through :func:`validate_density`."""

    mat: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def to_json(self) -> dict:
        return matrix_to_json(self.mat)

    @classmethod
    def from_json(cls, doc: dict, tol: float = STATE_TOL) -> "DensityMatrix":
        return validate_density(matrix_from_json(doc), tol=tol)


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=np.complex128)
    return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(doc: dict) -> np.ndarray:
    m = np.asarray(doc["re"], dtype=np.float64) + 1j * np.asarray(doc["im"], dtype=np.float64)
    if m.shape != (doc["dim"], doc["dim"]):
        raise ValueError(f"matrix shape {m.shape} does not match dim {doc['dim']}")
    return m


def _frozen(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=np.complex128)
    m.setflags(write=False)
    return m


def validate_density(m, tol: float = STATE_TOL) -> DensityMatrix:
    m = as_cmatrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"density matrix must be square, got {m.shape}")
    herm = fro(m - dagger(m))
    if herm > tol:
        raise NotHermitian(f"Hermiticity defect {herm:.3e} > {tol:g}", herm)
    m = 0.5 * (m + dagger(m))
    tr = float(np.trace(m).real)
    if abs(tr - 1.0) > tol:
        raise NotUnitTrace(f"trace {tr:.12g} deviates from 1 by more than {tol:g}", abs(tr - 1.0))
    lam_min = float(np.linalg.eigvalsh(m)[0])
    if lam_min < -tol:
        raise NotPSD(f"min eigenvalue {lam_min:.3e} < -{tol:g}", -lam_min)
    return DensityMatrix(_frozen(m))


def pure_from_vector(psi) -> DensityMatrix:
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("cannot build a pure state from the zero vector")
    psi = psi / norm
    return validate_density(np.outer(psi, psi.conj()))


def maximally_mixed(d: int) -> DensityMatrix:
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return DensityMatrix(_frozen(np.eye(d) / d))


def purity(rho: DensityMatrix) -> float:
    # Tr(rho^2) for Hermitian rho is the squared Frobenius norm.
    return float(np.sum(np.abs(rho.mat) ** 2))


def _clean_eigenvalues(lam: np.ndarray) -> np.ndarray:
    if lam.size and lam.min() < -STATE_TOL:
        raise NotPSD(f"eigenvalue {lam.min():.3e} below -{STATE_TOL:g}", -float(lam.min()))
    return np.maximum(lam, 0.0)


def entropy_of_spectrum(lam: np.ndarray) -> float:
    """Shannon entropy in bits of an eigenvalue list, dropping values below 1e-12."""
    lam = _clean_eigenvalues(np.asarray(lam, dtype=np.float64))
    lam = lam[lam >= ZERO_EIG]
    s = float(-np.sum(lam * np.log2(lam)))
    return max(0.0, s)


def vne(rho: DensityMatrix) -> float:
    """Von Neumann entropy in bits."""
    return entropy_of_spectrum(np.linalg.eigvalsh(rho.mat))


@dataclass(frozen=True)
class SpectralDecomposition:
    weights: np.ndarray
    states: list[np.ndarray]

    def reconstruct(self) -> np.ndarray:
        return sum(w * np.outer(s, s.conj()) for w, s in zip(self.weights, self.states))


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude entry is real and positive."""
    k = int(np.argmax(np.abs(v)))
    if abs(v[k]) == 0:
        return v
    return v * (abs(v[k]) / v[k])


def spectral(rho: DensityMatrix) -> SpectralDecomposition:
    eig = herm_eig(rho.mat)
    states = [fix_phase(eig.unitary[:, i]) for i in range(rho.dim)]
    return SpectralDecomposition(eig.eigenvalues, states)
