"""Journey-based transit equity analysis.

Ride legs and a GTFS feed give per-journey convenience metrics (in-vehicle
minutes per network mile, transfers per mile, transfer wait, distance, rail
share); rider surveys give low-income and trip-purpose shares per stop; a
buffer around each census area pools both, weighted by ridership; OLS
relates the low-income share to convenience.
"""

from .demographics import DemographicShares, SurveyTable, classify_income, load_survey, stop_shares
from .errors import (
    ConfigError,
    DegenerateJourneyError,
    EquityError,
    IngestionError,
    LookupFailure,
    NoDemographics,
    OrderingError,
    RankDeficientError,
    ValidationError,
    ZeroDistanceError,
)
from .gtfs import TransitNetwork, leg_distance, parse_feed, write_feed
from .journeys import (
    ConvenienceMetrics,
    Journey,
    RideLeg,
    StopProfile,
    journey_metrics,
    link_journeys,
    load_legs,
    stop_profiles,
)
from .report import RunConfig, compare_areas, compare_periods, load_config, run_pipeline
from .spatial import (
    AreaProfile,
    CensusArea,
    aggregate_area,
    point_polygon_distance,
    project,
    stops_within_buffer,
    unproject,
)
from .stats import DesignMatrix, RegressionResult, equity_regression, ols_fit, p_value, purpose_regression
from .synth import GroundTruth, ScenarioConfig, generate

__all__ = [
    "DemographicShares",
    "SurveyTable",
    "classify_income",
    "load_survey",
    "stop_shares",
    "ConfigError",
    "DegenerateJourneyError",
    "EquityError",
    "IngestionError",
    "LookupFailure",
    "NoDemographics",
    "OrderingError",
    "RankDeficientError",
    "ValidationError",
    "ZeroDistanceError",
    "TransitNetwork",
    "leg_distance",
    "parse_feed",
    "write_feed",
    "ConvenienceMetrics",
    "Journey",
    "RideLeg",
    "StopProfile",
    "journey_metrics",
    "link_journeys",
    "load_legs",
    "stop_profiles",
    "RunConfig",
    "compare_areas",
    "compare_periods",
    "load_config",
    "run_pipeline",
    "AreaProfile",
    "CensusArea",
    "aggregate_area",
    "point_polygon_distance",
    "project",
    "stops_within_buffer",
    "unproject",
    "DesignMatrix",
    "RegressionResult",
    "equity_regression",
    "ols_fit",
    "p_value",
    "purpose_regression",
    "GroundTruth",
    "ScenarioConfig",
    "generate",
]

__version__ = "0.1.0"
