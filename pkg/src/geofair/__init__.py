"""Spatial calibration and fairness auditing for price-per-area predictions."""

from .graph import RegionGraph, ball, build_adjacency, region_graph, shortest_paths
from .ingest import (
    IngestError,
    ObservationSchema,
    ObservationTable,
    RegionSet,
    clean,
    load_observations,
    load_regions,
    spatial_join,
)
from .metrics import (
    GroupAssignment,
    audit,
    dp_unfairness,
    ece,
    eo_unfairness,
    eo_vs_global,
    sweep_levels,
)
from .mitigation import MitigationModel, apply_mitigation, fit_lambda
from .ordinal import (
    OrdinalScheme,
    ScoredTable,
    assign_class,
    confidence_scores,
    fit_binning,
    random_baseline,
    score_table,
)
from .smoothing import RegionField, SmoothingParams, smooth_field, weight
from .synth import SynthConfig, generate_city

__version__ = "0.1.0"
