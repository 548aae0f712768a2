"""Learning from labels with instance-dependent noise through statistical queries.

Noise functions with bounded magnitude are handled by reweighting the
marginal by ``1 - 2 eta(x)``; see :mod:`noisysq.reductions`.
"""
from .domain import (
    Concept,
    Conjunction,
    ConstantLabel,
    Halfspace,
    MarginalSpec,
    SeedSpec,
    SphericalGaussian,
    UniformBall,
    UniformHypercube,
    UniformSphere,
    disagreement_spherical,
    rotate_in_plane,
    sample_marginal,
)
from .errors import (
    ConfigError,
    ContractError,
    DegenerateNoiseError,
    LearnerFailure,
    MagnitudeBoundError,
    NoisySQError,
)
from .harness import Experiment, ExperimentConfig, ExperimentResult, default_config, run
from .learners import ConjunctionLearner, HalfspaceLearner, query_plan
from .noise import (
    RCN,
    BetaClean,
    HypercubeTable,
    MassartRadial,
    NoiseSpec,
    RadialTsybakov,
    bayes_error,
    build_beta_clean_2d,
    build_radial_tsybakov,
    estimate_magnitude,
    realizable_translation,
    tsybakov_magnitude_bound,
)
from .oracles import CleanOracle, Mode, OracleStream
from .queries import (
    Affine,
    Constant,
    CoordinateCorrelation,
    ErrorIndicator,
    LiteralViolationIndicator,
    QuerySpec,
    RadialIndicator,
)
from .reductions import (
    ZGrid,
    decompose_query,
    estimate_error,
    run_csq_reduction,
    run_sq_reduction,
    simulate_csq_ext,
    simulate_sq_ext,
    simulate_sq_rcn,
    simulate_ti,
    transformed_expectation,
)

__version__ = "0.1.0"
