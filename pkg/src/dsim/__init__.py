"""Spin-1 qubit simulator: continuous protection drive, protected-space
gates, and the measurement protocols built on them.

Heavy submodules (experiments, analysis) import numpy-only code paths;
import them lazily where startup time matters.
"""

__version__ = "0.1.0"

from .exceptions import (
    AmbiguousFrequencyError,
    BracketError,
    ConfigError,
    CoverageError,
    DegenerateDataError,
    DegenerateLabelingError,
    DsimError,
    ResolutionError,
    VanishingMatrixElementError,
)
from .spin import (
    A_HF_DEFAULT,
    B_Z_DEFAULT,
    D_GS,
    GAMMA_E,
    NuclearConfig,
    PhysicalConstants,
    bare_spectrum,
    build_bare_hamiltonian,
    build_driven_hamiltonian,
    dressed_spectrum,
    find_sweet_spot_ratio,
    gap_sensitivity,
    rf_matrix_element,
)

__all__ = [
    "A_HF_DEFAULT",
    "AmbiguousFrequencyError",
    "B_Z_DEFAULT",
    "BracketError",
    "ConfigError",
    "CoverageError",
    "D_GS",
    "DegenerateDataError",
    "DegenerateLabelingError",
    "DsimError",
    "GAMMA_E",
    "NuclearConfig",
    "PhysicalConstants",
    "ResolutionError",
    "VanishingMatrixElementError",
    "__version__",
    "bare_spectrum",
    "build_bare_hamiltonian",
    "build_driven_hamiltonian",
    "dressed_spectrum",
    "find_sweet_spot_ratio",
    "gap_sensitivity",
    "rf_matrix_element",
]
