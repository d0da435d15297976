"""Quantum channels in Kraus form with their Choi matrices, plus a Lindblad step.

Choi convention. With column-stacking ``vec``, the Choi matrix is

    C = sum_k vec(K_k) vec(K_k)^dagger

whose left Kronecker factor is the channel *input* and right factor the
*output*, i.e. ``C = (Id (x) E)(|Phi+><Phi+|)`` with unnormalized
``|Phi+> = sum_i |i>|i>``. ``Tr_out`` is therefore the trace over the right
factor. :func:`choi_output_first` gives the ``(E (x) Id)`` ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .matcore import (
    as_cmatrix,
    dagger,
    fro,
    herm_eig,
    inv_sqrt_psd,
    kron,
    partial_trace,
    swap_subsystems,
    unvec,
)
from .qstate import DensityMatrix, DensityError, STATE_TOL, validate_density

KRAUS_TOL = 1e-8
DEFAULT_EPS = 1e-6
#: Hard cap on the number of operators :func:`compose_bipartite` may produce.
MAX_KRAUS_OPS = 4096
DRIFT_FIX = 1e-12
DRIFT_ERROR = 1e-6


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class KrausSet:
    """Kraus operators stacked as a ``(K, d, d)`` array.

    ``tol`` is the completeness tolerance the set was accepted at. Sets built
    by :func:`kraus_from_factor` carry the epsilon-bias bound here.
    """

    ops: np.ndarray = field(repr=False)
    tol: float = KRAUS_TOL

    def __post_init__(self):
        ops = np.array(self.ops, dtype=np.complex128)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ChannelError(f"Kraus stack must have shape (K, d, d), got {ops.shape}")
        k, d, _ = ops.shape
        if not 1 <= k <= max(d * d, MAX_KRAUS_OPS):
            raise ChannelError(f"invalid operator count {k}")
        if not np.all(np.isfinite(ops)):
            raise ChannelError("Kraus operators contain non-finite entries")
        ops.setflags(write=False)
        object.__setattr__(self, "ops", ops)
        defect = completeness_defect(self)
        if defect > self.tol:
            raise ChannelError(f"completeness defect {defect:.3e} exceeds {self.tol:.3e}")

    @property
    def dim(self) -> int:
        return self.ops.shape[1]

    @property
    def K(self) -> int:
        return self.ops.shape[0]

    def to_json(self) -> dict:
        from .qstate import matrix_to_json

        return {"dim": self.dim, "K": self.K, "ops": [matrix_to_json(k) for k in self.ops]}

    @classmethod
    def from_json(cls, doc: dict, tol: float = KRAUS_TOL) -> "KrausSet":
        from .qstate import matrix_from_json

        ops = [matrix_from_json(m) for m in doc["ops"]]
        if len(ops) != doc["K"]:
            raise ChannelError("K does not match the number of operators")
        return cls(np.stack(ops), tol=tol)


def completeness_defect(k: KrausSet) -> float:
    ops = k.ops
    s = np.einsum("kji,kjl->il", ops.conj(), ops)
    return fro(s - np.eye(ops.shape[1]))


def kraus_from_factor(l, eps: float = DEFAULT_EPS) -> KrausSet:
    """Normalized Kraus set from an unconstrained ``d^2 x K`` factor.

    Each column of ``l`` is unvectorized into an operator ``K'_k``; with
    ``S = sum_k K'_k^dagger K'_k`` the returned operators are
    ``K'_k (S + eps I)^(-1/2)``.
    """
    l = as_cmatrix(l)
    n, kcount = l.shape
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise ChannelError(f"factor must have d^2 rows, got {n}")
    if not 1 <= kcount <= n:
        raise ChannelError(f"factor must have 1..{n} columns, got {kcount}")
    if eps <= 0:
        raise ChannelError("eps must be positive")
    raw = np.stack([unvec(l[:, j]) for j in range(kcount)])
    s = np.einsum("kji,kjl->il", raw.conj(), raw)
    lam = herm_eig(s).eigenvalues
    if lam[0] <= 1e-300:
        raise ChannelError("normalization matrix S is numerically zero")
    x = inv_sqrt_psd(s, eps)
    ops = raw @ x
    sigma_min = max(float(lam[-1]), 0.0)
    bound = np.inf if sigma_min == 0 else eps * d / sigma_min
    return KrausSet(ops, tol=max(KRAUS_TOL, bound) + 1e-12)


def apply_channel(k: KrausSet, rho: DensityMatrix) -> DensityMatrix:
    if k.dim != rho.dim:
        raise ChannelError(f"channel dim {k.dim} does not match state dim {rho.dim}")
    out = np.zeros((k.dim, k.dim), dtype=np.complex128)
    for op in k.ops:
        out += op @ rho.mat @ op.conj().T
    out = 0.5 * (out + dagger(out))
    drift = abs(float(np.trace(out).real) - 1.0)
    # drift explained by a known completeness bias is corrected, anything else is an error
    if drift > max(DRIFT_ERROR, k.tol):
        raise ChannelError(f"trace drift {drift:.3e} after channel; Kraus set is invalid")
    if drift > DRIFT_FIX:
        out = out / np.trace(out).real
    try:
        return validate_density(out, tol=DRIFT_ERROR)
    except DensityError as exc:
        raise ChannelError(f"channel output is not a valid state: {exc}") from exc


def choi_of_channel(k: KrausSet) -> np.ndarray:
    vs = k.ops.transpose(0, 2, 1).reshape(k.K, -1)  # rows are vec(K_k)
    return vs.T @ vs.conj()


def choi_output_first(choi: np.ndarray, d: int) -> np.ndarray:
    """Reorder to ``(E (x) Id)(|Phi+><Phi+|)`` with the output as left factor."""
    return swap_subsystems(choi, d, d)


def choi_trace_out(choi: np.ndarray, d: int) -> np.ndarray:
    return partial_trace(choi, d, d, keep="A")


def apply_choi(choi: np.ndarray, rho: DensityMatrix) -> np.ndarray:
    """Channel action recovered from its Choi matrix: ``E(rho) = Tr_in[(rho^T (x) I) C]``."""
    d = rho.dim
    c = np.asarray(choi).reshape(d, d, d, d)  # [in, out, in', out']
    return np.einsum("iajb,ij->ab", c, rho.mat)


@dataclass(frozen=True)
class CPTPReport:
    min_eigenvalue: float
    tp_defect: float
    passed: bool


def verify_cptp(choi, tol: float) -> CPTPReport:
    c = as_cmatrix(choi)
    d = int(round(np.sqrt(c.shape[0])))
    if d * d != c.shape[0]:
        raise ChannelError(f"Choi matrix side {c.shape[0]} is not a perfect square")
    hs = 0.5 * (c + dagger(c))
    lam_min = float(np.linalg.eigvalsh(hs)[0])
    tp = fro(choi_trace_out(c, d) - np.eye(d))
    herm_ok = fro(c - dagger(c)) <= tol * max(1.0, fro(c))
    return CPTPReport(lam_min, tp, bool(herm_ok and lam_min >= -tol and tp <= tol))


def identity_channel(d: int) -> KrausSet:
    return KrausSet(np.eye(d)[None])


def unitary_channel(u) -> KrausSet:
    return KrausSet(as_cmatrix(u)[None])


def depolarizing_channel(d: int) -> KrausSet:
    """Completely depolarizing channel ``rho -> I/d``: the d^2 matrix units over sqrt(d)."""
    return KrausSet(np.eye(d * d).reshape(d * d, d, d) / np.sqrt(d))


def compose_bipartite(
    e_a: KrausSet, e_b: KrausSet, e_int: KrausSet, max_ops: int = MAX_KRAUS_OPS
) -> KrausSet:
    """Kraus set of ``(E_A (x) E_B) o E_int`` on ``C^d_a (x) C^d_b``."""
    n = e_a.dim * e_b.dim
    if e_int.dim != n:
        raise ChannelError(f"interaction channel dim {e_int.dim} != {e_a.dim}*{e_b.dim}")
    count = e_a.K * e_b.K * e_int.K
    if count > max_ops:
        raise ChannelError(f"composition would produce {count} operators (cap {max_ops})")
    ops = [kron(ka, kb) @ ki for ka in e_a.ops for kb in e_b.ops for ki in e_int.ops]
    # completeness defects of biased inputs propagate through S_A (x) S_B
    da, db = e_a.dim, e_b.dim
    tol = 2.0 * (np.sqrt(db) * e_a.tol + np.sqrt(da) * e_b.tol) + e_int.tol
    return KrausSet(np.stack(ops), tol=max(KRAUS_TOL, tol))


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, jumps: Sequence[tuple]) -> np.ndarray:
    out = -1j * (h @ rho - rho @ h)
    for l, gamma in jumps:
        ld = dagger(l)
        ldl = ld @ l
        out += gamma * (l @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl))
    return out


def lindblad_step(
    rho: DensityMatrix, h, jumps: Sequence[tuple], dt: float
) -> DensityMatrix:
    """One RK4 step of the Lindblad master equation.

    ``jumps`` is a sequence of ``(L_k, gamma_k)`` pairs.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    h = as_cmatrix(h)
    if fro(h - dagger(h)) > STATE_TOL * max(1.0, fro(h)):
        raise ValueError("Hamiltonian is not Hermitian")
    jumps = [(as_cmatrix(l), float(g)) for l, g in jumps]
    if any(g < 0 for _, g in jumps):
        raise ValueError("jump rates must be nonnegative")
    r = rho.mat
    k1 = lindblad_rhs(r, h, jumps)
    k2 = lindblad_rhs(r + 0.5 * dt * k1, h, jumps)
    k3 = lindblad_rhs(r + 0.5 * dt * k2, h, jumps)
    k4 = lindblad_rhs(r + dt * k3, h, jumps)
    out = r + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    out = 0.5 * (out + dagger(out))
    drift = abs(float(np.trace(out).real) - 1.0)
    if drift > STATE_TOL:
        raise ChannelError(f"trace drift {drift:.3e} in Lindblad step")
    lam_min = float(np.linalg.eigvalsh(out)[0])
    if lam_min < -DRIFT_ERROR:
        raise ChannelError(f"min eigenvalue {lam_min:.3e} after Lindblad step; reduce dt")
    return validate_density(out, tol=DRIFT_ERROR)
