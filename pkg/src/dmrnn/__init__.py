"""Density-matrix recurrent networks with CPTP state updates and POVM readout."""

from .analysis import dominant_eigenstates, qmi, trajectory_metrics
from .matcore import herm_eig, inv_sqrt_psd, kron, partial_trace, unvec, vec
from .measurement import POVM, born_probabilities, povm_from_aux
from .model import ModelConfig, ModelParams, forward, init_params, nll, step
from .qchannel import (
    KrausSet,
    apply_channel,
    choi_of_channel,
    completeness_defect,
    compose_bipartite,
    kraus_from_factor,
    lindblad_step,
    verify_cptp,
)
from .qstate import (
    DensityMatrix,
    maximally_mixed,
    pure_from_vector,
    purity,
    spectral,
    validate_density,
    vne,
)
from .train import TrainConfig, fd_gradient, fit

__version__ = "0.1.0"
