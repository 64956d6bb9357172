"""combilab: exact and Monte Carlo study of random fixed-row-weight 0/1
matrices. Spectral statistics, anti-concentration of combinatorial sums,
arithmetic-structure (denominator) searches, sphere-decomposition
predicates, and a reproducible experiment harness.
"""

from . import anticonc, clcd, combi, errors, harness, spectral, sphere
from .anticonc import (
    AtomicDistribution,
    BoundParams,
    SampleSet,
    SmallBallResult,
    esseen_bound,
    evaluate_paper_bound,
    exact_chf,
    exact_law_W,
    exact_law_W_perm,
    expected_square_W,
    levy_empirical,
    levy_exact,
    pawlowski_bound,
    psi_norm_estimate,
    roos_bound,
    smallball_bound,
    smallball_value,
)
from .clcd import (
    ClcdQuery,
    ClcdResult,
    clcd_search,
    difference_vector,
    lattice_distance,
    reference_scan,
    stability_floor,
    tensor_difference,
)
from .combi import (
    FixedWeightVector,
    RngSubstream,
    RowRegularMatrix,
    enumerate_fixed_weight,
    sample_fixed_weight,
    sample_row_regular,
    substream,
)
from .errors import (
    CombilabError,
    ConvergenceError,
    DomainError,
    MissingParameterError,
    PostconditionError,
    QuadratureError,
    ResourceLimitError,
    UnsupportedRegimeError,
)
from .harness import ExperimentConfig, run_tail_experiment
from .spectral import (
    DenseMatrix,
    SpectralOptions,
    is_singular_exact,
    restricted_operator_norm,
    row_span_distance,
    smallest_singular_value,
)
from .sphere import (
    PartitionParams,
    compressibility_distance,
    find_separated_sets,
    is_almost_constant,
    round_to_net,
    sample_non_almost_constant,
)

__version__ = "0.1.0"
