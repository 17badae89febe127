"""Monte Carlo transport for Knudsen gas in procedurally generated 2D tubes.

Particles fly ballistically between wall collisions and re-emit with the
cosine (Lambert) law; the package simulates single trajectories, embedded
wall-collision walks, and open-boundary gas ensembles, and estimates the
self- and transport-diffusion coefficients those dynamics define.
"""

__version__ = "0.1.0"

from .billiard import (
    BudgetExceededError,
    Side,
    gamma_const,
    jump_statistics,
    run_krw_chain,
    run_ksb,
    run_lifetime,
    sample_cosine_direction,
)
from .gas import (
    InjectionConfig,
    arrival_rate,
    poisson_intensity_prediction,
    run_ensemble,
    run_event_driven,
    snapshot_counts,
    steady_state_from_ledger,
)
from .geometry import (
    NoHitError,
    Point2,
    RoughRandom,
    StraightStrip,
    Wall,
    build_tube,
    make_finite,
    mean_section_measure,
    ray_to_boundary,
    section,
    validate_tube,
)
from .kernel import BACKEND

__all__ = [
    "BACKEND",
    "BudgetExceededError",
    "InjectionConfig",
    "NoHitError",
    "Point2",
    "RoughRandom",
    "Side",
    "StraightStrip",
    "Wall",
    "__version__",
    "arrival_rate",
    "build_tube",
    "gamma_const",
    "jump_statistics",
    "make_finite",
    "mean_section_measure",
    "poisson_intensity_prediction",
    "ray_to_boundary",
    "run_ensemble",
    "run_event_driven",
    "run_krw_chain",
    "run_ksb",
    "run_lifetime",
    "sample_cosine_direction",
    "section",
    "snapshot_counts",
    "steady_state_from_ledger",
    "validate_tube",
]
