"""Spatial-econometrics toolkit: panels, normality tests, contiguity
weights, Moran/LISA permutation inference, reflective PLS path modeling,
and regional growth regressions."""

__version__ = "0.1.0"

from .growth import cobb_douglas_eval, cobb_douglas_fit, group_ols, simple_ols
from .moran import (
    bivariate_local_moran,
    global_moran,
    lisa_classify,
    local_moran,
    moran_permutation,
    significance_map,
)
from .normality import ryan_joiner, shapiro_wilk
from .panel import (
    PanelDataset,
    RegionId,
    classify_percentile,
    describe,
    load_panel,
    save_panel,
    standardize,
)
from .plssem import (
    PathModel,
    blindfold_q2,
    bootstrap_paths,
    discriminant_validity,
    fit_pls,
    measurement_quality,
    structural_collinearity,
)
from .weights import (
    SpatialWeights,
    connectivity_summary,
    contiguity_from_geojson,
    lattice,
    load_gal,
    queen_contiguity,
    rook_contiguity,
    row_standardize,
    save_gal,
)

__all__ = [
    "PanelDataset",
    "PathModel",
    "RegionId",
    "SpatialWeights",
    "bivariate_local_moran",
    "blindfold_q2",
    "bootstrap_paths",
    "classify_percentile",
    "cobb_douglas_eval",
    "cobb_douglas_fit",
    "connectivity_summary",
    "contiguity_from_geojson",
    "describe",
    "discriminant_validity",
    "fit_pls",
    "global_moran",
    "group_ols",
    "lattice",
    "lisa_classify",
    "load_gal",
    "load_panel",
    "local_moran",
    "measurement_quality",
    "moran_permutation",
    "queen_contiguity",
    "rook_contiguity",
    "row_standardize",
    "ryan_joiner",
    "save_gal",
    "save_panel",
    "shapiro_wilk",
    "significance_map",
    "simple_ols",
    "standardize",
    "structural_collinearity",
]
