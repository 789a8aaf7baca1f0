"""Device-independent QKD under collective and sequential-unsharp eavesdropping."""

from .attacks import (
    BellDiagonalSpectrum,
    CollectiveStateParams,
    ParameterRegion,
    SequentialAttackParams,
    appendix_a_regions,
    optimal_chsh,
    theta_star,
)
from .errors import DomainError, NumericalIntegrityError, UndefinedEstimateError
from .keyrate import (
    KeyRateReport,
    collective_key_rate,
    sequential_collective_key_rate,
    sequential_individual_key_rate,
)
from .measurement import Observable, UnsharpEffectPair
from .protocol import SimulationConfig, run_simulation, sift_and_estimate
from .quantum import DensityMatrix, PureState, purify

__version__ = "0.1.0"
