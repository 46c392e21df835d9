"""Exact inference and sampling for zero-field Ising models on K33-free graphs."""

from .decomp import UnsupportedTopology, triconnected_decompose
from .engine import IsingEngine, infer_log_z, sample_spins
from .graph import Graph, GraphError, PlanarEmbedding, build_graph, planar_embed
from .io import ModelFileError, parse_model_file, read_model, write_model_file
from .kasteleyn import EmptyMatchingSet, log_partition_planar_ising
from .model import IsingModel, ising_model
from .wilson import PMSampler, PerfectMatching, sample_pm

__version__ = "0.1.0"

__all__ = [
    "EmptyMatchingSet", "Graph", "GraphError", "IsingEngine", "IsingModel", "ModelFileError",
    "PMSampler", "PerfectMatching", "PlanarEmbedding", "UnsupportedTopology", "build_graph",
    "infer_log_z", "ising_model", "log_partition_planar_ising", "parse_model_file",
    "planar_embed", "read_model", "sample_pm", "sample_spins", "triconnected_decompose",
    "write_model_file",
]
