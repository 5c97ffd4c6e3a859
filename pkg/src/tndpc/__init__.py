"""Density-peak clustering with matrix product states."""

from .baseline import DensityPeakClustering, DpcBaselineParams, dpc_cluster
from .datasets import canonical_synthetic, generate_synthetic, load_csv
from .dpclus import DpcParams, TensorNetworkDPC, cluster
from .encoding import QuantumFeatureMap
from .exceptions import (ContractError, DataError, NumericalError, ParameterError, StageError,
                         TNDPCError)
from .metrics import acc, ari, evaluate, fmi, nmi
from .mps import MPS, entanglement_entropy, schmidt_spectrum
from .train import MPSDensityModel, TrainConfig, train_mps

__version__ = "0.1.0"

__all__ = [
    "MPS", "ContractError", "DataError", "DensityPeakClustering", "DpcBaselineParams", "DpcParams",
    "MPSDensityModel", "NumericalError", "ParameterError", "QuantumFeatureMap", "StageError",
    "TNDPCError", "TensorNetworkDPC", "TrainConfig", "acc", "ari", "canonical_synthetic", "cluster", "dpc_cluster",
    "entanglement_entropy", "evaluate", "fmi", "generate_synthetic", "load_csv", "nmi",
    "schmidt_spectrum", "train_mps",
]
