"""Sparse, network-coherent gene signatures: Lasso and graph (edge-group) Lasso
selectors for logistic regression, stability selection, and an evaluation
harness for accuracy, stability and network connectivity."""

from .core import (
    ExpressionDataset,
    GeneNetwork,
    GroupStructure,
    LambdaGrid,
    LogisticModel,
    SelectionPath,
    Signature,
    ValidationError,
    edges_to_groups,
    validate_dataset,
)

__all__ = [
    "ExpressionDataset",
    "GeneNetwork",
    "GroupStructure",
    "LambdaGrid",
    "LogisticModel",
    "SelectionPath",
    "Signature",
    "ValidationError",
    "edges_to_groups",
    "validate_dataset",
]
__version__ = "0.1.0"
