"""Quantum Darwinism toolkit: branch-state models, redundancy, envariance."""

from ._core import (
    BranchState,
    ConfigError,
    CouplingSet,
    NumericalGuard,
    PipCurve,
    RedundancyResult,
    __version__,
    born_via_envariance,
    haar_pip,
    ising_evolve,
    mutual_information,
    pip_curve,
    qbm_mutual_information,
    qbm_redundancy,
    redundancy,
    run_experiment,
    sample_couplings,
    system_entropy,
)

__all__ = [
    "BranchState",
    "ConfigError",
    "CouplingSet",
    "NumericalGuard",
    "PipCurve",
    "RedundancyResult",
    "__version__",
    "born_via_envariance",
    "haar_pip",
    "ising_evolve",
    "mutual_information",
    "pip_curve",
    "qbm_mutual_information",
    "qbm_redundancy",
    "redundancy",
    "run_experiment",
    "sample_couplings",
    "system_entropy",
]
