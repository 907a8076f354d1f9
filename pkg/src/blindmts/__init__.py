"""Blind (CSI-free) configuration of programmable metasurfaces from RSS samples."""
from .baselines import beam_scanning, genie_closest_rotation, zps
from .bcm import (
    BcmResult,
    GainTable,
    build_gain_table,
    exact_conditional_table,
    exact_gain,
    recover_delta,
    run_bcm,
    select_phases,
    true_gain_params,
)
from .channel import (
    ChannelEnsemble,
    ConstantAttenuation,
    PowerLawAttenuation,
    RicianFactors,
    RicianLink,
    build_ensemble,
    draw_realization,
    expected_snr,
    instantaneous_power,
    mean_rss,
    measure_rss,
)
from .geometry import MtsPanel, SceneGeometry, link_angles, los_phases, true_phase_difference
from .layout import AtomLayout, PhaseConfig
from .sampling import RssDataset, collect_dataset, exhaustive_schedule, random_schedule
from .scenario import Scenario, load_scenario
from .sensing import SensingEstimate, localize, triangulate

__version__ = "0.1.0"
