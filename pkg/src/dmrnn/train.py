"""Finite-difference gradient descent for :mod:`dmrnn.model`.

Central differences need two loss evaluations per real parameter, so the loss
is evaluated by :func:`batch_loss`, which runs the model for a whole stack of
parameter vectors at once. Its results agree with :func:`dmrnn.model.nll`
to float rounding; ``tests/test_train.py`` checks that.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import PROB_FLOOR, ModelConfig, ModelParams, encode, forward, unpack
from .qchannel import DRIFT_FIX

log = logging.getLogger(__name__)

PROBE_CHUNK = 512


class DivergenceError(RuntimeError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    steps: int
    batch: list = field(default_factory=list)
    fd_step: float = 1e-5
    seed: int = 0
    log_every: int = 10

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if self.log_every < 1:
            raise ValueError("log_every must be at least 1")
        if not self.batch or any(len(s) == 0 for s in self.batch):
            raise ValueError("batch must hold at least one nonempty sequence")


def _inv_sqrt(s: np.ndarray, eps: float) -> np.ndarray:
    s = 0.5 * (s + np.conj(np.swapaxes(s, -1, -2)))
    lam, u = np.linalg.eigh(s)
    lam = np.maximum(lam, 0.0) + eps
    return (u * lam[..., None, :] ** -0.5) @ np.conj(np.swapaxes(u, -1, -2))


def batch_loss(config: ModelConfig, thetas: np.ndarray, sequences: Sequence[Sequence[int]]) -> np.ndarray:
    """Mean NLL (nats) of ``sequences`` under each row of ``thetas``."""
    thetas = np.atleast_2d(thetas)
    nb = thetas.shape[0]
    d, k, eps = config.d, config.K, config.eps
    emb, weight, bias, aux = unpack(config, thetas)

    raw_m = np.conj(np.swapaxes(aux, -1, -2)) @ aux
    x = _inv_sqrt(raw_m.sum(axis=1), eps)[:, None]
    povm = x @ raw_m @ x
    povm = 0.5 * (povm + np.conj(np.swapaxes(povm, -1, -2)))

    # Per-token superoperator on row-major flattened states:
    # flat(K rho K^dagger) = (K (x) conj(K)) flat(rho).
    n = d * d
    sup = {}
    half = config.gen_out // 2
    for tok in sorted({t for s in sequences for t in s}):
        y = np.einsum("bgm,bm->bg", weight, emb[:, tok]) + bias
        cols = (y[:, :half] + 1j * y[:, half:]).reshape(nb, k, d, d)
        raw = np.swapaxes(cols, -1, -2)  # column-major unvec of each factor column
        stacked = raw.reshape(nb, k * d, d)
        s = np.conj(np.swapaxes(stacked, 1, 2)) @ stacked
        kop = (stacked @ _inv_sqrt(s, eps)).reshape(nb, k, n)
        outer = np.swapaxes(kop, 1, 2) @ kop.conj()  # [b, (i,l), (j,m)]
        sup[tok] = outer.reshape(nb, d, d, d, d).transpose(0, 1, 3, 2, 4).reshape(nb, n, n)

    # Tr(M rho) = sum_ij M_ij rho_ji
    readout = np.swapaxes(povm, -1, -2).reshape(nb, -1, n)
    diag = np.arange(0, n, d + 1)
    total = np.zeros(nb)
    for seq in sequences:
        rho = np.broadcast_to((np.eye(d, dtype=np.complex128) / d).reshape(n), (nb, n))
        seq_nll = np.zeros(nb)
        for tok in seq:
            probs = np.einsum("bvx,bx->bv", readout, rho).real
            probs = np.clip(probs, 0.0, 1.0)
            p = probs[:, tok] / probs.sum(axis=1)
            seq_nll -= np.log(np.maximum(p, PROB_FLOOR))
            out = np.einsum("bxy,by->bx", sup[tok], rho)
            out = 0.5 * (out + np.conj(out.reshape(nb, d, d).swapaxes(1, 2)).reshape(nb, n))
            tr = out[:, diag].sum(axis=1).real
            fix = np.abs(tr - 1.0) > DRIFT_FIX
            rho = np.where(fix[:, None], out / tr[:, None], out)
        total += seq_nll / len(seq)
    return total / len(sequences)


def _encode_batch(batch, config: ModelConfig) -> list[list[int]]:
    return [encode(s, config) for s in batch]


def mean_loss(params: ModelParams, batch) -> float:
    seqs = _encode_batch(batch, params.config)
    return float(batch_loss(params.config, params.to_vector()[None], seqs)[0])


def _probe_losses(config, probes, seqs) -> np.ndarray:
    out = np.empty(probes.shape[0])
    # non-finite losses are reported by the caller
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for lo in range(0, probes.shape[0], PROBE_CHUNK):
            out[lo:lo + PROBE_CHUNK] = batch_loss(config, probes[lo:lo + PROBE_CHUNK], seqs)
    return out


def fd_gradient_and_loss(params: ModelParams, batch, fd_step: float = 1e-5):
    """Central-difference gradient of the mean NLL, plus the loss at ``params``."""
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    config = params.config
    seqs = _encode_batch(batch, config)
    theta = params.to_vector()
    n = theta.size
    probes = np.empty((2 * n + 1, n))
    probes[:] = theta
    idx = np.arange(n)
    probes[idx, idx] += fd_step
    probes[n + idx, idx] -= fd_step
    losses = _probe_losses(config, probes, seqs)
    bad = np.flatnonzero(~np.isfinite(losses))
    if bad.size:
        raise FloatingPointError(f"non-finite loss at probe {int(bad[0])}")
    grad = (losses[:n] - losses[n:2 * n]) / (2 * fd_step)
    return grad, float(losses[-1])


def fd_gradient(params: ModelParams, batch, fd_step: float = 1e-5) -> np.ndarray:
    return fd_gradient_and_loss(params, batch, fd_step)[0]


def _check_forward(params: ModelParams, batch) -> None:
    # raises if any state along any trajectory fails validation
    for seq in batch:
        forward(seq, params)


def fit(params: ModelParams, cfg: TrainConfig) -> tuple[ModelParams, list[tuple[int, float]]]:
    """Plain gradient descent. History holds ``(step, loss)`` every ``log_every``
    steps, measured before that step's update, plus the final loss."""
    history: list[tuple[int, float]] = []
    if cfg.steps == 0:
        return params, history
    theta = params.to_vector()
    for i in range(cfg.steps):
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"parameters diverged at step {i}", i)
        current = params.with_vector(theta)
        try:
            grad, loss = fd_gradient_and_loss(current, cfg.batch, cfg.fd_step)
        except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
            raise DivergenceError(f"loss diverged at step {i}: {exc}", i) from exc
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError(f"loss diverged at step {i}", i)
        if i % cfg.log_every == 0:
            _check_forward(current, cfg.batch)
            history.append((i, loss))
            log.info("step %d loss %.6f", i, loss)
        theta = theta - cfg.learning_rate * grad
    if not np.all(np.isfinite(theta)):
        raise DivergenceError(f"parameters diverged at step {cfg.steps}", cfg.steps)
    fitted = params.with_vector(theta)
    final = mean_loss(fitted, cfg.batch)
    if not np.isfinite(final):
        raise DivergenceError(f"loss diverged at step {cfg.steps}", cfg.steps)
    _check_forward(fitted, cfg.batch)
    history.append((cfg.steps, final))
    return fitted, history
