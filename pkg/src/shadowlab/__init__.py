"""Exact finite-window shadowing for linear actions of finitely generated groups."""

import types as _types

from .actions import (
    AuxState,
    HyperbolicType,
    LinearAction,
    RationalMatrix,
    apply,
    aux_apply,
    bs_action,
    hyperbolic_type,
    load_action,
)
from .errors import (
    CapExceededError,
    FamilyMismatchError,
    ParameterError,
    PresentationError,
    RelationError,
    ShadowlabError,
    UnsupportedGroupError,
    UnsupportedMatrixError,
)
from .experiments import ExperimentConfig, ExperimentReport, emit, run, sweep
from .groups import (
    BilipschitzReport,
    CayleyBall,
    GroupElement,
    GroupSpec,
    ball,
    bilipschitz_constant,
    commutator,
    inverse,
    multiply,
    parse_presentation,
    parse_word,
    word_norm,
)
from .kernels import BACKEND
from .pseudo import (
    CounterexampleParams,
    DefectReport,
    Pseudotrajectory,
    bs_counterexample,
    exact_orbit,
    free_two_branch,
    jittered_orbit,
    lift_Z_to_free,
    max_defect,
    perturbed_orbit,
    read_trajectory,
    write_trajectory,
)
from .solver import (
    FeasibilityVerdict,
    FiberBox,
    HalfPlane,
    ShadowingProblem,
    certificate_is_infeasible,
    coherence_check,
    feasible_shadow,
    fiber_shadow_diagonal,
    fiber_shadow_expanding,
    grid_oracle,
    shadow_constraints,
    verify_witness,
)

__version__ = "0.1.0"

__all__ = sorted(
    name for name, value in globals().items()
    if not name.startswith("_") and not isinstance(value, _types.ModuleType)
)
