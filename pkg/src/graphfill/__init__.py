"""graphfill: recover missing node attributes on graphs.

Pipeline: propagation pre-fill of the missing rows, a compact graph
autoencoder trained with confidence-weighted embedding regularizers, and an
evaluation harness covering ranking, regression, clustering, classification
and KNN-homogeneity metrics.
"""

from ._kernels import backend_name
from .config import RunConfig
from .data import Dataset, SplitMask, gen_sbm, load_binary_dataset, load_content_format, make_split_mask
from .graphs import Graph, NodeMask, NormalizedAdjacency, build_graph, multi_source_bfs, spmm, sym_normalize
from .losses import LossConfig, LossReport
from .model import ModelDims, ModelParams, decode, encode, init_params
from .propagation import PropagationConfig, RefinedAttributes, direct_solve_oracle, run_propagation
from .training import TrainConfig, TrainingInputs, train

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Graph",
    "LossConfig",
    "LossReport",
    "ModelDims",
    "ModelParams",
    "NodeMask",
    "NormalizedAdjacency",
    "PropagationConfig",
    "RefinedAttributes",
    "RunConfig",
    "SplitMask",
    "TrainConfig",
    "TrainingInputs",
    "backend_name",
    "build_graph",
    "decode",
    "direct_solve_oracle",
    "encode",
    "gen_sbm",
    "init_params",
    "load_binary_dataset",
    "load_content_format",
    "make_split_mask",
    "multi_source_bfs",
    "run_propagation",
    "spmm",
    "sym_normalize",
    "train",
]
