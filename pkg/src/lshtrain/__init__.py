"""CPU training engine for very wide networks: locality-sensitive hash tables
pick a sparse active set per input; forward, backward and ADAM updates touch
only those neurons through layout-aware lane-parallel kernels."""

from .kernels import AdamHyper, LaneConfig, StorageOrder
from .lsh import HashFamilyParams, LshTableSet
from .nn import Network
from .sparse_data import SparseBatch, load_libsvm, parse_libsvm_multilabel
from .trainer import EpochMetrics, TrainConfig, Trainer, build_network, evaluate_p_at_1, fit

__all__ = [
    "AdamHyper",
    "LaneConfig",
    "StorageOrder",
    "HashFamilyParams",
    "LshTableSet",
    "Network",
    "SparseBatch",
    "load_libsvm",
    "parse_libsvm_multilabel",
    "EpochMetrics",
    "TrainConfig",
    "Trainer",
    "build_network",
    "evaluate_p_at_1",
    "fit",
]

__version__ = "0.1.0"
