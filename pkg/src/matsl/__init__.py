"""Direct and inverse spectral problems for matrix Sturm-Liouville operators
with singular (distributional) potentials and general self-adjoint boundary
conditions, plus the reduction of quantum-graph problems to that form."""
from .core import (
    BoundaryData,
    ProblemL,
    SigmaField,
    SpectralDataSet,
    SpectralEntry,
    SpectralIndex,
    make_problem,
    validate_boundary,
)
from .errors import MatSLError, NumericalError, ValidationError
from .inverse import algorithm_T12, apply_transform, recover_T1, recover_T2
from .spectrum import charW, locate_eigenvalues, spectral_data, weight_matrix, weyl
from .zerocase import zero_spectral_data

__all__ = [
    "BoundaryData", "ProblemL", "SigmaField", "SpectralDataSet", "SpectralEntry", "SpectralIndex",
    "make_problem", "validate_boundary", "MatSLError", "NumericalError", "ValidationError",
    "algorithm_T12", "apply_transform", "recover_T1", "recover_T2", "charW", "locate_eigenvalues",
    "spectral_data", "weight_matrix", "weyl", "zero_spectral_data",
]
__version__ = "0.1.0"
