"""exlab: an excursion laboratory for 1-d SDEs with sign-changing step coefficients.

Builds signed solutions from a Brownian driver plus an i.i.d. sign choice over
excursion intervals, extracts sign choices back out of weak solutions, and
statistically verifies the quantitative behavior of both constructions.
"""

from .paths import (
    Coefficient,
    OddPiecewiseCoefficient,
    SamplePath,
    StepCoefficient,
    TimeChange,
    apply_time_change,
    euler_reflected_sde,
    euler_sde,
    reflect_skorokhod,
    sample_brownian,
    time_change,
)
from .excursions import (
    Excursion,
    ExcursionIndexing,
    ExcursionInterval,
    epoch_partition,
    excursion_intervals,
    extract_indexing,
    label_blumenthal,
    label_ito_mckean,
    order_excursions,
    relabel,
    scale_excursion,
    straddling,
    zero_set,
)
from .signs import (
    SignChoice,
    SignedPath,
    construct_theorem1,
    construct_theorem2,
    extract_sign_choice,
    first_hit,
    fixed_time,
    make_iid_sign_choice,
    phi_map,
    sample_at_stopping_time,
    sigma_step,
    sign_process,
    skew_bm,
)
from .localtime import (
    LocalTimeEstimate,
    downcrossing_estimate,
    downcrossings,
    local_time_exact_reflecting,
    local_time_occupation,
    tanaka_residual,
)
from .verify import (
    ExcursionCountSeries,
    InsufficientDataError,
    VerificationReport,
    check_legall_condition,
    chi_square_signs,
    excursion_length_law,
    ks_test,
    pooled_count_series,
    signed_count_process,
    skew_occupation_report,
    verify_appendix,
    verify_theorem1,
    verify_theorem2,
)

__version__ = "0.1.0"
