"""Branching particle systems with Volterra-Gaussian spatial motion.

Simulation of supercritical branching systems whose particles follow
memory-carrying Gaussian motions (fractional Brownian motion, fractional
Ornstein-Uhlenbeck), together with analytic moment oracles and a statistical
harness that verifies the laws of large numbers at desk scale.
"""

from .branching import (
    BranchingLaw,
    OffspringDistribution,
    estimate_F,
    expected_count,
    sample_lifetime,
    sample_offspring,
    second_moment_count,
)
from .kernels import (
    KernelSpec,
    UnsupportedRegimeError,
    VarianceProfile,
    c1,
    c1_closed_form,
    c2,
    cell_weights,
    ell_limit,
    eval_kernel,
    kernel_limit_checks,
    sigma_split,
    sigma_sq,
    variance_profile,
)
from .lln import (
    ExpFlow,
    LimitTarget,
    check_conditions,
    limit_target,
    lln_statistics,
    transform_Tf,
    u_infinity_demo,
)
from .moments import (
    TestFunction,
    conditional_mean_decomposition,
    conditional_variance,
    fou_second_moment,
    mean_functional,
    second_moment_functional,
    variance_bound,
)
from .particles import (
    CappedRunError,
    Memory,
    SimConfig,
    SimResult,
    Snapshot,
    load_memory,
    path_modulus,
    position_of,
    simulate,
    typical_memory_check,
)
from .quadrature import QuadratureConfig, QuadratureError

__version__ = "0.1.0"
