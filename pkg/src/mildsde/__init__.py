"""Simulation and empirical verification of semilinear stochastic evolution
equations with semimonotone drift and Wiener plus compensated-Poisson forcing.

The package builds finite truncations of the state space, closed-form
semigroups, reproducible noise, and two independent integration routes (an
iterated fixed-point solver and a one-pass exponential Euler scheme), then
checks the inequalities the solver theory promises: the pathwise energy
inequality, the factorial decay of iteration distances, the iterate moment
bound, and the contraction-rescaling equivalence.
"""

__version__ = "0.1.0"

from .state_space import (
    Basis,
    DimensionMismatchError,
    SpectralVector,
    WeightedInnerProduct,
    inner,
    norm,
)
from .semigroup import (
    BlockWaveSemigroup,
    ContractionReport,
    DelayShiftSemigroup,
    DiagonalSemigroup,
    TiltedSemigroup,
    check_contraction,
)
from .noise import (
    JumpEvent,
    LevyPathSpec,
    MarkSpaceSpec,
    TimeGrid,
    TruncatedMarkSpace,
    WienerSpec,
    compensate,
    path_rng,
    sample_prm,
    sample_wiener_increments,
    truncate_small_jumps,
)
from .coefficients import (
    AliasingError,
    CoefficientSet,
    DiffusionSpec,
    DriftSpec,
    JumpCoeffSpec,
    check_lipschitz_growth,
    check_semimonotone,
    nemitsky_sine,
    zero_diffusion,
    zero_jump,
)
from .convolution import (
    CadlagPath,
    ItoCheckReport,
    SemimartingaleIncrements,
    ito_inequality_check,
    quadratic_variation,
    stochastic_convolution,
)
from .solver import (
    AprioriBoundError,
    InnerIterationError,
    ModelSpec,
    ModelValidationError,
    NoiseRealization,
    PicardDivergenceError,
    PicardTrace,
    SolverError,
    coarsen_noise,
    direct_solve,
    direct_solve_batch,
    draw_noise,
    picard_solve,
    picard_solve_batch,
    rescale_to_contraction,
    solve_deterministic_mild,
    unrescale_values,
)
from . import models
