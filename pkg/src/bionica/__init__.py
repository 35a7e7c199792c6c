"""Online nonnegative independent component analysis with local learning rules.

A single-layer network separates nonnegative, well-grounded sources
from linear mixtures in a single streaming pass: no pre-whitening stage,
no batch access, only Hebbian/anti-Hebbian updates driven by each
sample. The package also ships the full-batch variant of the same
saddle-point objective, a noncentered whitening module, a Nonnegative
PCA baseline, permutation-matched recovery metrics, and a CLI that runs
the synthetic-source and image-separation experiments end to end.
"""

from .core import (
    BioNicaState,
    Hyperparams,
    NumericalAbortError,
    OfflineResult,
    RunSummary,
    StepOutput,
    collect_outputs,
    fast_dynamics,
    init_state,
    lagrangian_value,
    load_checkpoint,
    nsm_objective,
    offline_fit,
    online_step,
    run_online,
    saddle_weights,
    save_checkpoint,
)
from .datasets import (
    SourceConfig,
    image_to_source,
    load_pgm,
    mix,
    random_mixing_matrix,
    read_matrix_csv,
    sample_sparse_uniform,
    shuffled_epoch_stream,
    write_matrix_csv,
    write_pgm,
)
from .whitening import (
    CovarianceSummary,
    EigenStructure,
    WhiteningTransform,
    apply_whitening,
    eigendecompose_psd,
    fit_whitening,
    pseudoinverse,
    sample_covariance,
    whitening_transform,
)
from .baselines import NnpcaState, init_nnpca, nnpca_step, run_nnpca
from .metrics import (
    ErrorTrajectory,
    best_permutation,
    correlation_match,
    error_trajectory,
    final_error,
    write_trajectory_csv,
)

__version__ = "0.1.0"
