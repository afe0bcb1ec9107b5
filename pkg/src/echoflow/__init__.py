"""Measure how content from a partisan app spreads through a social network."""

from .ingest import (
    Affiliation,
    DatasetBundle,
    Role,
    SourceTag,
    TweetRecord,
    UserProfile,
    classify_users,
    detect_source,
    filter_active_users,
    map_location,
    parse_dataset,
)
from .lexicon import HashtagLabel, HashtagLexicon, compute_leaning_ratios, partition_users
from .echo import polarity_profile, polarity_profiles
from .graph import build_graph, detect_communities
from .hawkes import HawkesModel, EventSeries, fit, simulate
from .pipeline import PipelineError, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Affiliation", "DatasetBundle", "Role", "SourceTag", "TweetRecord", "UserProfile",
    "classify_users", "detect_source", "filter_active_users", "map_location", "parse_dataset",
    "HashtagLabel", "HashtagLexicon", "compute_leaning_ratios", "partition_users",
    "polarity_profile", "polarity_profiles", "build_graph", "detect_communities",
    "HawkesModel", "EventSeries", "fit", "simulate", "PipelineError", "run_pipeline",
]
