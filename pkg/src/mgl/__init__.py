"""Minimal graphs of maps between model manifolds: regions, majorization and numerics."""

from mgl.grid import GridDomain, GridMap
from mgl.manifolds import Euclidean, Hyperbolic, parse_target
from mgl.regions import in_C_m, in_M, in_N_closure, in_V_m, mu_m, region_by_name

__all__ = [
    "Euclidean",
    "GridDomain",
    "GridMap",
    "Hyperbolic",
    "in_C_m",
    "in_M",
    "in_N_closure",
    "in_V_m",
    "mu_m",
    "parse_target",
    "region_by_name",
]
__version__ = "0.1.0"
