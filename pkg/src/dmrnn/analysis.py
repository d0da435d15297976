"""Entropy, purity, eigenstate and mutual-information summaries of trajectories."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .matcore import partial_trace
from .qstate import DensityMatrix, entropy_of_spectrum, purity, spectral, vne

QMI_CLAMP = 1e-8
QMI_ERROR = 1e-6


@dataclass(frozen=True)
class MetricsRecord:
    t: int
    vne_bits: float
    purity: float
    top_weight: float
    qmi_bits: float | None = None


def _entropy_of_matrix(m: np.ndarray) -> float:
    return entropy_of_spectrum(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))


def qmi_raw(rho_ab: DensityMatrix, d_a: int, d_b: int) -> float:
    """``S(A) + S(B) - S(AB)`` in bits, without clamping."""
    if rho_ab.dim != d_a * d_b:
        raise ValueError(f"state dim {rho_ab.dim} != {d_a}*{d_b}")
    s_a = _entropy_of_matrix(partial_trace(rho_ab.mat, d_a, d_b, "A"))
    s_b = _entropy_of_matrix(partial_trace(rho_ab.mat, d_a, d_b, "B"))
    return s_a + s_b - vne(rho_ab)


def qmi(rho_ab: DensityMatrix, d_a: int, d_b: int) -> float:
    """Quantum mutual information in bits.

    Values in ``[-1e-8, 0)`` are float noise and clamp to zero; anything below
    ``-1e-6`` means the state was corrupted upstream.
    """
    value = qmi_raw(rho_ab, d_a, d_b)
    if value < -QMI_ERROR:
        raise ArithmeticError(f"mutual information {value:.3e} is negative beyond float noise")
    if -QMI_CLAMP <= value < 0:
        value = 0.0
    return value


def trajectory_metrics(
    trajectory: Sequence[DensityMatrix], bipartite: tuple[int, int] | None = None
) -> list[MetricsRecord]:
    if not trajectory:
        raise ValueError("trajectory is empty")
    out = []
    for t, rho in enumerate(trajectory):
        lam = np.linalg.eigvalsh(rho.mat)
        out.append(MetricsRecord(
            t=t,
            vne_bits=entropy_of_spectrum(lam),
            purity=purity(rho),
            top_weight=float(lam[-1]),
            qmi_bits=qmi(rho, *bipartite) if bipartite else None,
        ))
    return out


def dominant_eigenstates(rho: DensityMatrix, k: int) -> list[tuple[float, np.ndarray]]:
    if not 1 <= k <= rho.dim:
        raise ValueError(f"k must lie in [1, {rho.dim}], got {k}")
    sd = spectral(rho)
    return [(float(sd.weights[i]), sd.states[i]) for i in range(k)]


def fmt(x: float) -> str:
    return format(float(x) + 0.0, ".17g")  # + 0.0 folds -0.0 into 0.0


def metrics_csv(records: Iterable[MetricsRecord]) -> str:
    records = list(records)
    with_qmi = bool(records) and records[0].qmi_bits is not None
    cols = ["t", "vne_bits", "purity", "top_weight"] + (["qmi_bits"] if with_qmi else [])
    lines = [",".join(cols)]
    for r in records:
        row = [str(r.t), fmt(r.vne_bits), fmt(r.purity), fmt(r.top_weight)]
        if with_qmi:
            row.append(fmt(r.qmi_bits))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def metrics_jsonl(records: Iterable[MetricsRecord]) -> str:
    lines = []
    for r in records:
        doc = asdict(r)
        if doc["qmi_bits"] is None:
            del doc["qmi_bits"]
        lines.append(json.dumps(doc))
    return "".join(line + "\n" for line in lines)
