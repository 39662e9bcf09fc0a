"""Two-stage subspace identification of 2-D Roesser state-space models."""
from .errors import (ConvergenceError, GridSizeError, IllConditionedError, InputError,
                     NumericalError, OrderSelectionError, RankDeficiencyError)
from .grid import GridData
from .model import (CovarianceSet, RoesserModel, Simulation, construct_uncorrelated,
                    innovation_covariances, simulate, solve_lyapunov, solve_riccati,
                    validate_model)
from .operators import StructuredOperators, build_operators
from .subspace import IdentificationResult, identify

__version__ = "0.1.0"
