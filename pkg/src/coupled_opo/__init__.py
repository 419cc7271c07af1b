"""Quantum correlations and bipartite entanglement of a pair of coherently
coupled below-threshold optical parametric oscillators.

The pipeline goes: dimensionless system parameters -> frequency-domain
system matrix -> input/loss transfer matrices -> output-field second
moments -> time-delayed joint-quadrature covariance -> degree of
inseparability (with partial-transpose cross-check), plus sweep machinery,
a stochastic time-domain oracle, and a CLI.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    NearSingularError,
    ParameterError,
    SystemMatrix,
    SystemParams,
    TransferMatrices,
    build_system_matrix,
    derive_single_sided,
    transfer_matrices,
    validate_params,
)
from .moments import (  # noqa: F401
    DetectionSettings,
    MomentMatrix,
    QuadCovariance,
    check_physicality,
    output_moments,
    quad_covariance,
    simulate_langevin,
)
from .entanglement import (  # noqa: F401
    DegenerateStateError,
    InseparabilityResult,
    StandardForm,
    analytic_single_pump_I,
    classify_regime,
    degree_of_inseparability,
    inseparability,
    ppt_check,
    to_standard_form,
)
from .explore import (  # noqa: F401
    Axis,
    SweepResult,
    SweepSpec,
    figure_preset,
    optimize_point,
    sweep,
)
