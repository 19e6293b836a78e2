"""Finite-scale spectral decomposition of Hermitian operators.

Given a Hermitian operator presented as diagonal, tridiagonal, banded, or
dense data, this package truncates it at a chosen size under geometrically
decaying basis weights, diagonalizes the truncation, and assembles the
induced atomic spectral measure, signed pair measures, Gram density field,
fiber frames, and the direct-integral picture in which the operator acts by
multiplication.  On top of that sit a projection-valued measure with its
axiom checks, a polynomial functional calculus, and finite-scale probes of
essential self-adjointness.  The `specint` command line sweeps operators
across truncation sizes and writes CSV reports, figures, and a manifest.
"""

from .core import (
    AsymmetryError,
    BandedSpec,
    CallableSpec,
    DenseSpec,
    DiagonalSpec,
    DimensionError,
    JacobiSpec,
    OperatorSpec,
    ParseError,
    RunConfig,
    ScalarField,
    Tolerances,
    ValidationError,
    get_operator,
    inner,
    list_operators,
    load_config,
    scale_weights,
    truncate,
)
from .direct_integral import (
    ConditioningError,
    DirectIntegral,
    Section,
    build_direct_integral,
    embed,
    inner_product,
    intertwining_residual,
    multiply,
    norm,
    project_onto_range,
)
from .pvm import (
    BorelSet,
    Interval,
    SpectralProjection,
    functional_calculus,
    moment_identity_check,
    pvm_axiom_report,
    reconstruction_residual,
    set_mass,
    spectral_projection,
)
from .rng import SplitMix64, env_seed, stream, unit_vector
from .sampling import (
    EigenDecomposition,
    EigensolverError,
    Truncation,
    eigendecompose,
    eigenprojection_apply,
    graph_residual,
    make_truncation,
)
from .sections import (
    FiberFrame,
    PivotError,
    build_fibers,
    gram_to_sections,
    measurable_projection,
)
from .selfadjoint_probe import (
    FitError,
    RampFit,
    RampSpec,
    essential_selfadjointness_heuristic,
    fit_ramp_polynomial,
    power_commutation_check,
    ramp_eval,
    range_indicator_experiment,
)
from .spectral_measure import (
    AtomicMeasure,
    GramField,
    bin_pushforward,
    cauchy_schwarz_check,
    gram_field,
    kolmogorov_distance,
    moment,
    pair_measure,
    perturbation_bound,
    spectral_probability_measure,
    tail_mass_check,
    uniform_integrability_profile,
)

__version__ = "0.1.0"
