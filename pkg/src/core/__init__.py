"""Core functionality for the Chern marker laboratory"""

from .models import (
    ModelKind, Boundary, Axis, MarkerForm, LatticeIndexing, ModelSpec,
    HermitianOperator, Projector, DecayFit, WannierBasis, MomentReport,
    MarkerResult, TraceReduction, ScalingSeries, RunManifest,
)
from .settings import ExperimentConfig, EstimateToggles, load_config, save_config
from .storage import ArtifactStore, save_basis, load_basis
from .manager import ExperimentManager

__all__ = [
    "ModelKind", "Boundary", "Axis", "MarkerForm", "LatticeIndexing", "ModelSpec",
    "HermitianOperator", "Projector", "DecayFit", "WannierBasis", "MomentReport",
    "MarkerResult", "TraceReduction", "ScalingSeries", "RunManifest",
    "ExperimentConfig", "EstimateToggles", "load_config", "save_config",
    "ArtifactStore", "save_basis", "load_basis", "ExperimentManager",
]
