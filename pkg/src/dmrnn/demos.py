"""Hand-built two-level examples of state ambiguity and coherence, plus a Bell-pair entanglement case."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .analysis import fmt, metrics_csv, qmi, trajectory_metrics
from .matcore import partial_trace
from .measurement import POVM, born_probabilities
from .qchannel import (
    KrausSet,
    apply_channel,
    compose_bipartite,
    depolarizing_channel,
    identity_channel,
    unitary_channel,
)
from .qstate import entropy_of_spectrum, maximally_mixed, pure_from_vector, purity, vne

KET_A = np.array([1.0, 0.0])
KET_B = np.array([0.0, 1.0])
KET_PLUS = np.array([1.0, 1.0]) / np.sqrt(2)
KET_MINUS = np.array([1.0, -1.0]) / np.sqrt(2)

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def projective(kets, labels) -> POVM:
    return POVM(np.stack([np.outer(k, np.conj(k)) for k in kets]), tuple(labels))


def reset_to(ket) -> KrausSet:
    """Channel sending every state to ``|ket><ket|``."""
    d = len(ket)
    return KrausSet(np.stack([np.outer(ket, np.eye(d)[j]) for j in range(d)]))


def ambiguity_trajectory():
    """Clear A, then full ambiguity, then resolution to B."""
    rho0 = pure_from_vector(KET_A)
    rho1 = apply_channel(depolarizing_channel(2), rho0)
    rho2 = apply_channel(reset_to(KET_B), rho1)
    return [rho0, rho1, rho2]


def coherence_states():
    return {"mix": maximally_mixed(2), "sup": pure_from_vector(KET_PLUS)}


def coherence_tables():
    states = coherence_states()
    bases = {
        "computational": projective([KET_A, KET_B], ["A", "B"]),
        "plusminus": projective([KET_PLUS, KET_MINUS], ["+", "-"]),
    }
    metrics = [(name, vne(rho), purity(rho)) for name, rho in states.items()]
    table = [
        (name, basis, born_probabilities(p, rho))
        for name, rho in states.items()
        for basis, p in bases.items()
    ]
    return metrics, table


def bell_states():
    sep = pure_from_vector(np.kron(KET_A, KET_A))
    i2 = identity_channel(2)
    entangler = compose_bipartite(i2, i2, unitary_channel(CNOT))
    bell = apply_channel(entangler, pure_from_vector(np.kron(KET_PLUS, KET_A)))
    return {"separable": sep, "bell": bell}


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def write_ambiguity(outdir: Path) -> list[Path]:
    return [_write(outdir / "ambiguity.csv", metrics_csv(trajectory_metrics(ambiguity_trajectory())))]


def write_coherence(outdir: Path) -> list[Path]:
    metrics, table = coherence_tables()
    m_lines = ["state,vne_bits,purity"] + [f"{n},{fmt(s)},{fmt(g)}" for n, s, g in metrics]
    t_lines = ["state,basis,p0,p1"] + [f"{n},{b},{fmt(p[0])},{fmt(p[1])}" for n, b, p in table]
    return [
        _write(outdir / "coherence_metrics.csv", "\n".join(m_lines) + "\n"),
        _write(outdir / "coherence_measurements.csv", "\n".join(t_lines) + "\n"),
    ]


def write_bell(outdir: Path) -> list[Path]:
    lines = ["state,vne_ab,vne_a,vne_b,qmi_bits"]
    for name, rho in bell_states().items():
        s_a = entropy_of_spectrum(np.linalg.eigvalsh(partial_trace(rho.mat, 2, 2, "A")))
        s_b = entropy_of_spectrum(np.linalg.eigvalsh(partial_trace(rho.mat, 2, 2, "B")))
        lines.append(",".join([name, fmt(vne(rho)), fmt(s_a), fmt(s_b), fmt(qmi(rho, 2, 2))]))
    return [_write(outdir / "bell.csv", "\n".join(lines) + "\n")]


DEMOS = {"ambiguity": write_ambiguity, "coherence": write_coherence, "bell": write_bell}
