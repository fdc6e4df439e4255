"""MF DGNSS R-Mode ranging simulator and skywave day/night analysis."""

__version__ = "0.1.0"

from .channel import (
    DiurnalSchedule,
    LinkGeometry,
    SkywaveParams,
    add_awgn,
    apply_skywave,
    derive_link,
    schedule_alpha,
)
from .errors import (
    ConfigurationError,
    EmptyPartitionError,
    EmptyRequestError,
    EpochMismatchError,
    FormatError,
    GeometryError,
    HistoryUnderrunError,
    IngestionAbortedError,
    InsufficientDataError,
    RModeError,
    ScenarioError,
)
from .estimators import CwToneEstimator, RangeEstimator
from .experiment import (
    CAMPAIGN_WINDOWS,
    ComparisonReport,
    CwBoost,
    ErrorStats,
    Scenario,
    WindowSpec,
    analyze,
    compare,
    compute_stats,
    partition,
    run_scenario,
)
from .io import ingest_log, parse_scenario, render_tables, serialize_scenario
from .receiver import (
    CwMeasurement,
    RangeEpoch,
    delay_phase,
    estimate_tone,
    phase_to_range,
    resolve_coarse,
    snr_gate,
)
from .signal_gen import (
    CwParams,
    MskParams,
    SampleBlock,
    TransmitterConfig,
    generate_cw,
    generate_msk,
    generate_rmode,
)
