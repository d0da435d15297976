"""POVM prediction head."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .matcore import as_cmatrix, fro, herm_eig, inv_sqrt_psd
from .qstate import DensityMatrix, matrix_from_json, matrix_to_json

POVM_TOL = 1e-8
PROB_TOL = 1e-10


class POVMError(ValueError):
    pass


@dataclass(frozen=True)
class POVM:
    elements: np.ndarray = field(repr=False)  # (|V|, d, d)
    vocab: tuple[str, ...] = ()
    tol: float = POVM_TOL

    def __post_init__(self):
        el = np.array(self.elements, dtype=np.complex128)
        if el.ndim != 3 or el.shape[1] != el.shape[2] or el.shape[0] < 1:
            raise POVMError(f"POVM stack must have shape (V, d, d), got {el.shape}")
        el.setflags(write=False)
        object.__setattr__(self, "elements", el)
        if not self.vocab:
            object.__setattr__(self, "vocab", tuple(str(i) for i in range(el.shape[0])))
        if len(self.vocab) != el.shape[0]:
            raise POVMError("vocab length does not match element count")
        for v, m in enumerate(el):
            if fro(m - m.conj().T) > POVM_TOL:
                raise POVMError(f"element {v} is not Hermitian")
            lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
            if lam < -POVM_TOL:
                raise POVMError(f"element {v} has eigenvalue {lam:.3e}")
        defect = completeness_defect(self)
        if defect > self.tol:
            raise POVMError(f"POVM completeness defect {defect:.3e} exceeds {self.tol:.3e}")

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.elements.shape[0]

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "vocab": list(self.vocab),
            "elements": [matrix_to_json(m) for m in self.elements],
        }

    @classmethod
    def from_json(cls, doc: dict, tol: float = POVM_TOL) -> "POVM":
        el = np.stack([matrix_from_json(m) for m in doc["elements"]])
        return cls(el, tuple(doc["vocab"]), tol=tol)


def completeness_defect(p: POVM) -> float:
    return fro(p.elements.sum(axis=0) - np.eye(p.dim))


def povm_from_aux(aux: Sequence, eps: float = 1e-6, vocab: Sequence[str] = ()) -> POVM:
    """``M_v = S^-1/2 A_v^dagger A_v S^-1/2`` with ``S = sum_v A_v^dagger A_v`` regularized by eps."""
    if eps <= 0:
        raise POVMError("eps must be positive")
    a = np.stack([as_cmatrix(x) for x in aux])
    if a.shape[0] < 1:
        raise POVMError("need at least one auxiliary matrix")
    raw = np.einsum("vji,vjl->vil", a.conj(), a)
    s = raw.sum(axis=0)
    lam = herm_eig(s).eigenvalues
    if lam[0] <= 1e-300:
        raise POVMError("normalization matrix S is numerically zero")
    x = inv_sqrt_psd(s, eps)
    el = x @ raw @ x
    el = 0.5 * (el + np.conj(np.swapaxes(el, 1, 2)))
    sigma_min = max(float(lam[-1]), 0.0)
    d = s.shape[0]
    bound = np.inf if sigma_min == 0 else eps * d / sigma_min
    return POVM(el, tuple(vocab), tol=max(POVM_TOL, bound) + 1e-12)


def born_probabilities(p: POVM, rho: DensityMatrix) -> np.ndarray:
    """Outcome probabilities ``Re Tr(M_v rho)``."""
    if p.dim != rho.dim:
        raise POVMError(f"POVM dim {p.dim} does not match state dim {rho.dim}")
    raw = np.einsum("vij,ji->v", p.elements, rho.mat)
    resid = float(np.max(np.abs(raw.imag)))
    if resid > PROB_TOL:
        raise POVMError(f"imaginary residue {resid:.3e} in Born probabilities")
    probs = raw.real
    if probs.min() < -PROB_TOL or probs.max() > 1 + PROB_TOL:
        # epsilon-biased POVMs can only undershoot, never leave [0, 1] by more than float noise
        raise POVMError(f"probability outside [0, 1]: {probs}")
    probs = np.clip(probs, 0.0, 1.0)
    total = probs.sum()
    if abs(total - 1.0) > max(POVM_TOL, p.tol):
        raise POVMError(f"probabilities sum to {total:.12g}")
    return probs / total
