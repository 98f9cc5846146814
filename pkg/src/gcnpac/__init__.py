"""Topology-aware PAC-Bayesian generalization bounds for graph convolutional networks."""

from .errors import SizeError, ValidationError
from .gcn import Activation, GcnModel, GraphSample, forward, jacobian_layer, random_model
from .graphs import Graph, Propagation, PropagationKind, build_propagation, generate, load_edge_list
from .montecarlo import McConfig, McReport
from .pacbayes import BoundReport, PacParams, bound_for, kappa
from .sensitivity import Design, FilterKind, FilterSpec, SensitivitySet

__version__ = "0.1.0"

__all__ = [
    "Activation", "BoundReport", "Design", "FilterKind", "FilterSpec", "GcnModel", "Graph",
    "GraphSample", "McConfig", "McReport", "PacParams", "Propagation", "PropagationKind",
    "SensitivitySet", "SizeError", "ValidationError", "bound_for", "build_propagation", "forward",
    "generate", "jacobian_layer", "kappa", "load_edge_list", "random_model",
]
