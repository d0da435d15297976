"""Small dense complex linear algebra.

Matrices are plain ``numpy`` complex128 arrays. Vectorization uses column
stacking throughout the package, so that

    vec(A @ X @ B.conj().T) == kron(B.conj(), A) @ vec(X)

Subsystem A is always the left (slow) Kronecker factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

#: Largest matrix side length any kernel will build.
MAX_DIM = 4096

HERMITIAN_TOL = 1e-8
NEG_EIG_TOL = 1e-8


class NotHermitianError(ValueError):
    """Input deviates from its conjugate transpose beyond tolerance."""


class DimensionError(ValueError):
    pass


def as_cmatrix(m) -> np.ndarray:
    """Coerce to a finite 2-D complex128 array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def fro(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def kron(a, b) -> np.ndarray:
    a, b = as_cmatrix(a), as_cmatrix(b)
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > MAX_DIM:
        raise DimensionError(f"kron result {rows}x{cols} exceeds MAX_DIM={MAX_DIM}")
    return np.kron(a, b)


def vec(m) -> np.ndarray:
    """Column-stack a square matrix into a ``(d*d, 1)`` column vector."""
    m = as_cmatrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"vec expects a square matrix, got {m.shape}")
    return m.reshape(-1, order="F").reshape(-1, 1)


def unvec(v) -> np.ndarray:
    """Inverse of :func:`vec`; accepts a flat or column vector of length d*d."""
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    n = v.shape[0]
    d = int(round(np.sqrt(n)))
    if d * d != n or n == 0:
        raise DimensionError(f"length {n} is not a nonzero perfect square")
    return v.reshape(d, d, order="F")


@dataclass(frozen=True)
class HermEig:
    """Eigenpairs of a Hermitian matrix, eigenvalues in descending order."""

    eigenvalues: np.ndarray
    unitary: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.unitary * self.eigenvalues) @ dagger(self.unitary)


def hermiticity_defect(h: np.ndarray) -> float:
    return fro(h - dagger(h)) / max(1.0, fro(h))


def herm_eig(h) -> HermEig:
    """Eigendecomposition of a Hermitian matrix.

    The input is symmetrized before decomposition. LAPACK ``heevd`` returns
    ascending eigenvalues; we reverse them, so degenerate eigenvalues come out
    in reverse LAPACK order. Only the spanned subspace of a degenerate block is
    meaningful.
    """
    h = as_cmatrix(h)
    if h.shape[0] != h.shape[1]:
        raise DimensionError(f"herm_eig expects a square matrix, got {h.shape}")
    defect = hermiticity_defect(h)
    if defect > HERMITIAN_TOL:
        raise NotHermitianError(f"relative Hermiticity defect {defect:.3e}")
    hs = 0.5 * (h + dagger(h))
    try:
        w, u = np.linalg.eigh(hs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigendecomposition did not converge: {exc}") from exc
    return HermEig(w[::-1].copy(), u[:, ::-1].copy())


def inv_sqrt_psd(h, eps: float) -> np.ndarray:
    """``(H + eps*I)^(-1/2)`` for Hermitian PSD ``H``.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero first; ``tol`` scales with
    ``max(1, ||H||_2)`` so float noise on large inputs is not mistaken for a
    genuinely indefinite matrix.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    eig = herm_eig(h)
    lam = eig.eigenvalues
    scale = max(1.0, float(np.max(np.abs(lam))) if lam.size else 1.0)
    if lam.size and lam[-1] < -NEG_EIG_TOL * scale:
        raise ValueError(f"matrix is not PSD: min eigenvalue {lam[-1]:.3e}")
    lam = np.maximum(lam, 0.0) + eps
    if np.any(lam <= 0):
        raise ZeroDivisionError("singular matrix with eps=0")
    u = eig.unitary
    return (u * lam ** -0.5) @ dagger(u)


def partial_trace(rho_ab, d_a: int, d_b: int, keep: Literal["A", "B"]) -> np.ndarray:
    """Reduced operator of a bipartite matrix on ``C^d_a (x) C^d_b``."""
    rho_ab = as_cmatrix(rho_ab)
    n = d_a * d_b
    if rho_ab.shape != (n, n):
        raise DimensionError(f"expected {n}x{n} for dims ({d_a}, {d_b}), got {rho_ab.shape}")
    t = rho_ab.reshape(d_a, d_b, d_a, d_b)
    if keep == "A":
        return np.einsum("ibjb->ij", t)
    if keep == "B":
        return np.einsum("aiaj->ij", t)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def swap_subsystems(rho_ab, d_a: int, d_b: int) -> np.ndarray:
    """Reorder ``A (x) B`` into ``B (x) A``."""
    t = as_cmatrix(rho_ab).reshape(d_a, d_b, d_a, d_b)
    return t.transpose(1, 0, 3, 2).reshape(d_a * d_b, d_a * d_b)
