"""Uniform sampling on constrained regions and space-filling designs on the samples."""

from .design import (
    CandidateSet,
    Design,
    FffDesign,
    WeightedEuclidean,
    ard_increment,
    cmm_design,
    fff_design,
    greedy_design,
    maxpro_increment,
    mindist,
    weighted_distance,
)
from .dsl import dsl_region, eval_constraint, parse_constraint
from .geodesic import GeodesicMetric, NeighborGraph, build_graph, geodesic_cmm, geodesic_distances
from .regions import (
    BoundingBox,
    Constraint,
    PolygonSet,
    Region,
    builtin_region,
    deviation,
    is_feasible,
    polygon_distance,
    read_geojson,
    soft_indicator_log,
)
from .scmc import ParticleCloud, ScmcConfig, ScmcSchedule, ess, run_scmc

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "CandidateSet",
    "Constraint",
    "Design",
    "FffDesign",
    "GeodesicMetric",
    "NeighborGraph",
    "ParticleCloud",
    "PolygonSet",
    "Region",
    "ScmcConfig",
    "ScmcSchedule",
    "WeightedEuclidean",
    "ard_increment",
    "build_graph",
    "builtin_region",
    "cmm_design",
    "deviation",
    "dsl_region",
    "ess",
    "eval_constraint",
    "fff_design",
    "geodesic_cmm",
    "geodesic_distances",
    "greedy_design",
    "is_feasible",
    "maxpro_increment",
    "mindist",
    "parse_constraint",
    "polygon_distance",
    "read_geojson",
    "run_scmc",
    "soft_indicator_log",
    "weighted_distance",
]
