"""Desk-scale simulator and analysis toolkit for energy-time entangled qutrits.

Submodules:
    core      -- qutrit/two-qutrit linear algebra, the 3x3 coupler, Born rule
    source    -- analytic interferometer model: peak states and fringe laws
    timetags  -- seeded Monte Carlo time-tag streams, coincidences, histograms
    analysis  -- visibility extraction, fringe fits, Bell-threshold inference
    protocols -- heralded-qutrit key distribution and coin tossing
    cli       -- the `qutrit-bench` experiment runner
"""

__version__ = "0.1.0"

from .core import (
    DensityOperator,
    PureState,
    add_white_noise,
    born_probability,
    maximally_entangled_pair,
    normalize,
    tritter,
)
from .source import (
    ArmPhases,
    CouplerRatios,
    InterferometerConfig,
    PathPair,
    central_state,
    coincidence_prob_central,
    coincidence_prob_satellite,
    delta_t,
    detector_pair_phase_offsets,
    effective_phases,
    fringe_probability,
    joint_distribution,
    peak_weights,
    satellite_state,
)
from .timetags import (
    DetectorModel,
    RunConfig,
    build_histogram,
    find_coincidences,
    post_select,
    simulate_run,
)
from .analysis import (
    BellResult,
    CglmpSettings,
    FringeFit,
    FringeScan,
    bell_threshold_visibility,
    cglmp_value,
    fit_central_fringe,
    lambda_from_visibility,
    optimize_cglmp,
    phase_ratio,
    sigma_violation,
    visibility,
    visibility_from_lambda,
)
from .protocols import (
    EveModel,
    herald_state,
    mub_bases,
    qber_thresholds,
    run_coin_toss,
    run_qkd,
)
