"""Numerical certification of weighted Hardy inequalities for the rectangular integration operator."""

from .functionals import Fields, FunctionalValue, constants, evaluate, multidim_functional, zone_chain
from .grid import CellField, CumField, GridN, prefix_cumulate, suffix_cumulate
from .normest import NormEstimate, ascend, probe_B, probe_rectangles, rayleigh_ratio
from .verify import CheckReport, run_suite
from .weights import Exponents, FactorizedWeight, Factor1D, PowerWeight, TableWeight, dual_weight, power_weight

__all__ = [
    "CellField",
    "CumField",
    "GridN",
    "prefix_cumulate",
    "suffix_cumulate",
    "Exponents",
    "FactorizedWeight",
    "Factor1D",
    "PowerWeight",
    "TableWeight",
    "dual_weight",
    "power_weight",
    "Fields",
    "FunctionalValue",
    "constants",
    "evaluate",
    "multidim_functional",
    "zone_chain",
    "NormEstimate",
    "ascend",
    "probe_B",
    "probe_rectangles",
    "rayleigh_ratio",
    "CheckReport",
    "run_suite",
]
