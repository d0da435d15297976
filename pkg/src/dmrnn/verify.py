"""Randomized property suites behind ``dmrnn verify``.

Every trial draws from ``default_rng([seed, suite_index, trial])`` so a failing
trial can be replayed on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analysis import qmi_raw
from .measurement import born_probabilities, povm_from_aux
from .qchannel import choi_of_channel, kraus_from_factor, verify_cptp
from .qstate import validate_density, vne
from .rand import complex_normal, random_density, random_factor, random_unitary

DEFAULT_TOLS = {"cptp": 1e-5, "povm": 1e-10, "entropy": 1e-8, "qmi": 1e-8}


@dataclass
class SuiteResult:
    name: str
    trials: int
    tol: float
    passed: int = 0
    worst: float = 0.0
    failing_trials: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed == self.trials

    def line(self, seed: int) -> str:
        s = f"{self.name:8s} {self.passed}/{self.trials} passed  worst_defect={self.worst:.3e}  tol={self.tol:g}"
        if self.failing_trials:
            s += f"  first_failure=seed[{seed},{SUITES.index(self.name)},{self.failing_trials[0]}]"
        return s


def _cptp_trial(rng, d):
    k = kraus_from_factor(random_factor(d, rng), 1e-6)
    rep = verify_cptp(choi_of_channel(k), np.inf)
    return max(rep.tp_defect, -rep.min_eigenvalue, 0.0)


def _povm_trial(rng, d):
    aux = complex_normal(rng, (d + 2, d, d))
    p = povm_from_aux(aux, 1e-6)
    probs = born_probabilities(p, random_density(d, rng))
    return abs(float(probs.sum()) - 1.0)


def _entropy_trial(rng, d):
    rank = int(rng.integers(1, d + 1))
    rho = random_density(d, rng, rank=rank)
    u = random_unitary(d, rng)
    rotated = validate_density(u @ rho.mat @ u.conj().T)
    s = vne(rho)
    bound = max(0.0, -s, s - np.log2(d))
    return max(bound, abs(vne(rotated) - s))


def _qmi_trial(rng, d):
    rank = int(rng.integers(1, 2 * d + 1))
    rho = random_density(2 * d, rng, rank=rank)
    return max(0.0, -qmi_raw(rho, d, 2))


TRIALS: dict[str, Callable] = {
    "cptp": _cptp_trial,
    "povm": _povm_trial,
    "entropy": _entropy_trial,
    "qmi": _qmi_trial,
}
SUITES = list(TRIALS)


def run_suite(name: str, trials: int, d: int, tol: float, seed: int = 0) -> SuiteResult:
    res = SuiteResult(name, trials, tol)
    fn = TRIALS[name]
    for t in range(trials):
        rng = np.random.default_rng([seed, SUITES.index(name), t])
        try:
            defect = float(fn(rng, d))
        except (ValueError, ArithmeticError):
            defect = np.inf
        res.worst = max(res.worst, defect)
        if defect <= tol:
            res.passed += 1
        else:
            res.failing_trials.append(t)
    return res


def run_all(trials: int, d: int, tol: float | None = None, seed: int = 0) -> list[SuiteResult]:
    return [
        run_suite(name, trials, d, DEFAULT_TOLS[name] if tol is None else tol, seed)
        for name in SUITES
    ]
