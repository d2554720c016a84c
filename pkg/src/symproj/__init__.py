"""Symmetry-sector projections and quantum Fisher information for spin and boson systems."""

from .operators import (
    DensityOperator,
    DimensionCapError,
    DimensionMismatchError,
    HilbertSpace,
    NotHermitianError,
    Operator,
    SpectralDecomposition,
    collective_spin,
    evolve,
    expectation,
    pauli_on_site,
    pauli_string,
    random_density,
    random_density_in_sector,
    spectral_decompose,
    tensor,
    variance,
)
from .symmetry import (
    SectorProjector,
    is_off_diagonal,
    is_supported_in_sector,
    magnetization_projector,
    parity_projector,
    sector_split,
)
from .metrology import (
    HypothesisViolation,
    TheoremReport,
    UndefinedSignalError,
    check_theorem,
    projector_sensitivity_curve,
    qfi,
    separability_witness,
    signal_to_noise,
)

__version__ = "0.1.0"
