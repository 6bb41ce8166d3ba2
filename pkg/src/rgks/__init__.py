"""Bounded-memory generalized Krylov solvers for edge-preserving regularized
linear inverse problems, with subspace recycling and streaming support."""

from .compression import (
    CompressionStrategy,
    chi_rbd,
    chi_sec,
    chi_soc,
    chi_tsvd,
    reinject_solution,
    stacked_projected,
)
from .errors import (
    BadPsf,
    Breakdown,
    ConfigError,
    DimensionMismatch,
    RankDeficient,
    ResidualBreakdown,
    RgksError,
    SingularSystem,
    SolverError,
)
from .linalg import QRFactors, golub_kahan, qr_append_column, qr_factor, solve_regularized_ls, truncated_svd
from .mm import (
    GcvResult,
    ObjectiveValue,
    compute_weights,
    eval_majorant,
    eval_objective,
    select_lambda,
    weighting_matrix,
)
from .operators import (
    BlockDiagOperator,
    BlurOperator,
    IdentityOperator,
    LinearOperator,
    MatrixOperator,
    StackedOperator,
    TomoOperator,
    block_diag,
    blur_make,
    stack,
    tomo_make,
)
from .problems import (
    TestProblem,
    add_noise,
    deblur_problem,
    dynamic_problem,
    phantom_circles,
    phantom_shepp,
    rre,
    ssim,
    streaming_tomo_problem,
    tomo_problem,
)
from .regularizers import make_diff, make_psi_2d, make_psi_dynamic
from .solvers import (
    IterationRecord,
    LambdaRule,
    SolverConfig,
    SolverResult,
    compress,
    enlarge,
    mm_gks,
    rmm_gks,
    rmm_gks_init,
    s_rmm_gks,
    stopping_t1,
)

__version__ = "0.1.0"
