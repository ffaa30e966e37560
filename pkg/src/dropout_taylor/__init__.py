"""Exact derivatives, Taylor truncations and training experiments for
dropout-regularised logistic regression."""

__version__ = "0.1.0"

from .combinatorics import (  # noqa: E402
    DomainError,
    StirlingTable,
    alternating_stirling_sum,
    bell,
    bernoulli_asymptotic,
    stirling2,
    triangle,
)
from .noise import (  # noqa: E402
    DropoutConfig,
    NoiseModel,
    coordinate_moment,
    exact_regularizer,
    scalar_moment,
    variance_r2,
)
from .partition import (  # noqa: E402
    LOGISTIC,
    QUADRATIC,
    DerivativePoly,
    EvalPoint,
    PrecisionExhausted,
    derivative_poly,
    derivative_recurrence,
    derivative_theorem1,
    eval_derivative,
    log_partition,
    sigmoid,
)
from .taylor import (  # noqa: E402
    diagnose_series,
    estimate_radius,
    feature_scale_bound,
    radius_report,
    rk_penalty,
)
from .train import (  # noqa: E402
    Dataset,
    Penalty,
    TrainConfig,
    bounded_weight_experiment,
    compare_regimes,
    make_synthetic,
    train,
)
