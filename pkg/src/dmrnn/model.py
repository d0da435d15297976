"""The density-matrix recurrent model.

The hidden state is a density matrix. Each input token is embedded, an affine
generator maps the embedding to a ``d^2 x K`` complex factor, and the factor is
turned into a CPTP channel that advances the state. A learned POVM reads out
next-token probabilities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measurement import POVM, born_probabilities, povm_from_aux
from .qchannel import KrausSet, apply_channel, kraus_from_factor
from .qstate import DensityMatrix, maximally_mixed, matrix_from_json, matrix_to_json

SCHEMA = "dmrnn-v1"
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    d: int
    m: int
    vocab: tuple[str, ...]
    K: int | None = None
    eps: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "vocab", tuple(self.vocab))
        if self.K is None:
            object.__setattr__(self, "K", self.d * self.d)
        if self.d < 1 or self.m < 1:
            raise ValueError("d and m must be at least 1")
        if not 1 <= self.K <= self.d * self.d:
            raise ValueError(f"K must lie in [1, d^2={self.d * self.d}], got {self.K}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.vocab:
            raise ValueError("vocab must be nonempty")
        if len(set(self.vocab)) != len(self.vocab):
            raise ValueError("vocab entries must be unique")

    @property
    def gen_out(self) -> int:
        return 2 * self.d * self.d * self.K

    def index(self, token: str) -> int:
        try:
            return self.vocab.index(token)
        except ValueError:
            raise KeyError(f"unknown token {token!r}") from None

    def to_json(self) -> dict:
        return {"d": self.d, "m": self.m, "vocab": list(self.vocab), "K": self.K,
                "eps": self.eps, "seed": self.seed}


@dataclass(frozen=True)
class ModelParams:
    config: ModelConfig
    embeddings: np.ndarray  # (|V|, m)
    weight: np.ndarray  # (2 d^2 K, m)
    bias: np.ndarray  # (2 d^2 K,)
    povm_aux: np.ndarray = field(repr=False)  # (|V|, d, d) complex

    def __post_init__(self):
        c = self.config
        v = len(c.vocab)
        shapes = {
            "embeddings": (self.embeddings, (v, c.m)),
            "weight": (self.weight, (c.gen_out, c.m)),
            "bias": (self.bias, (c.gen_out,)),
            "povm_aux": (self.povm_aux, (v, c.d, c.d)),
        }
        for name, (arr, shape) in shapes.items():
            if np.shape(arr) != shape:
                raise ValueError(f"{name} has shape {np.shape(arr)}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")

    def povm(self) -> POVM:
        return povm_from_aux(self.povm_aux, self.config.eps, self.config.vocab)

    # Flat real parameter vector, in the order: embeddings, weight, bias,
    # povm_aux real parts, povm_aux imaginary parts (all C order).
    def to_vector(self) -> np.ndarray:
        return np.concatenate([
            self.embeddings.ravel(), self.weight.ravel(), self.bias.ravel(),
            self.povm_aux.real.ravel(), self.povm_aux.imag.ravel(),
        ])

    def with_vector(self, theta: np.ndarray) -> "ModelParams":
        return ModelParams(self.config, *unpack(self.config, theta))

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "config": self.config.to_json(),
            "embeddings": self.embeddings.tolist(),
            "generator": {"weight": self.weight.tolist(), "bias": self.bias.tolist()},
            "povm_aux": [matrix_to_json(a) for a in self.povm_aux],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ModelParams":
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported checkpoint schema {doc.get('schema')!r}")
        config = ModelConfig(**{**doc["config"], "vocab": tuple(doc["config"]["vocab"])})
        return cls(
            config,
            np.asarray(doc["embeddings"], dtype=np.float64).reshape(len(config.vocab), config.m),
            np.asarray(doc["generator"]["weight"], dtype=np.float64).reshape(config.gen_out, config.m),
            np.asarray(doc["generator"]["bias"], dtype=np.float64),
            np.stack([matrix_from_json(a) for a in doc["povm_aux"]]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"


def param_count(config: ModelConfig) -> int:
    v = len(config.vocab)
    return v * config.m + config.gen_out * (config.m + 1) + 2 * v * config.d ** 2


def unpack(config: ModelConfig, theta: np.ndarray):
    """Split a flat vector (or a ``(B, n)`` stack) into parameter arrays."""
    theta = np.asarray(theta, dtype=np.float64)
    lead = theta.shape[:-1]
    v, m, d, g = len(config.vocab), config.m, config.d, config.gen_out
    if theta.shape[-1] != param_count(config):
        raise ValueError(f"parameter vector has length {theta.shape[-1]}, expected {param_count(config)}")
    sizes = [v * m, g * m, g, v * d * d, v * d * d]
    parts = np.split(theta, np.cumsum(sizes)[:-1], axis=-1)
    emb = parts[0].reshape(*lead, v, m)
    weight = parts[1].reshape(*lead, g, m)
    bias = parts[2]
    aux = (parts[3] + 1j * parts[4]).reshape(*lead, v, d, d)
    return emb, weight, bias, aux


def init_params(config: ModelConfig) -> ModelParams:
    """Seeded initialization with a near-identity channel at zero embedding.

    The bias puts ``vec(I_d)`` in the real part of the first factor column and
    zeros elsewhere, so a zero weight matrix yields the identity channel.
    """
    rng = np.random.default_rng(config.seed)
    v, m, d = len(config.vocab), config.m, config.d
    emb = rng.normal(0.0, 1.0 / np.sqrt(d), size=(v, m))
    weight = rng.normal(0.0, 1.0 / np.sqrt(m), size=(config.gen_out, m))
    aux = (rng.normal(0.0, 1.0 / np.sqrt(d), size=(v, d, d))
           + 1j * rng.normal(0.0, 1.0 / np.sqrt(d), size=(v, d, d)))
    bias = np.zeros(config.gen_out)
    bias[: d * d] = np.eye(d).reshape(-1, order="F")
    return ModelParams(config, emb, weight, bias, aux)


def generator(e, weight, bias, config: ModelConfig) -> np.ndarray:
    """Affine map from an embedding to the complex ``d^2 x K`` channel factor."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (config.m,):
        raise ValueError(f"embedding has shape {e.shape}, expected ({config.m},)")
    y = weight @ e + bias
    half = config.gen_out // 2
    n = config.d * config.d
    return (y[:half] + 1j * y[half:]).reshape(n, config.K, order="F")


def channel_for(token: int, params: ModelParams) -> KrausSet:
    c = params.config
    l = generator(params.embeddings[token], params.weight, params.bias, c)
    return kraus_from_factor(l, c.eps)


def step(rho_prev: DensityMatrix, token: int, params: ModelParams) -> DensityMatrix:
    return apply_channel(channel_for(token, params), rho_prev)


def encode(tokens: Sequence, config: ModelConfig) -> list[int]:
    """Map token strings (or already-integer indices) to vocabulary indices."""
    out = []
    for pos, t in enumerate(tokens):
        if isinstance(t, (int, np.integer)):
            if not 0 <= t < len(config.vocab):
                raise KeyError(f"token index {t} out of range at position {pos}")
            out.append(int(t))
        else:
            try:
                out.append(config.index(t))
            except KeyError:
                raise KeyError(f"unknown token {t!r} at position {pos}") from None
    return out


def forward(tokens: Sequence, params: ModelParams):
    """Run the recurrence from the maximally mixed state.

    Returns ``(trajectory, probs)``: ``trajectory`` holds rho_0..rho_T and
    ``probs[t]`` is the prediction for ``tokens[t]`` made from rho_t, before
    the token is consumed.
    """
    idx = encode(tokens, params.config)
    if not idx:
        raise ValueError("token sequence is empty")
    povm = params.povm()
    rho = maximally_mixed(params.config.d)
    trajectory, probs = [rho], []
    for t in idx:
        probs.append(born_probabilities(povm, rho))
        rho = step(rho, t, params)
        trajectory.append(rho)
    return trajectory, probs


def nll_details(tokens: Sequence, params: ModelParams) -> tuple[float, int]:
    """Mean per-token NLL in nats, and how many probabilities hit the floor."""
    idx = encode(tokens, params.config)
    _, probs = forward(idx, params)
    p = np.array([pr[t] for pr, t in zip(probs, idx)])
    floored = int(np.sum(p < PROB_FLOOR))
    return float(-np.mean(np.log(np.maximum(p, PROB_FLOOR)))), floored


def nll(tokens: Sequence, params: ModelParams) -> float:
    return nll_details(tokens, params)[0]
