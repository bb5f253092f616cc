"""Ship fuel-consumption modelling from noon reports fused with gridded
ocean/atmosphere data: parsing, fusion, four regression families, a k-fold
evaluation harness, and a synthetic ground-truth generator."""

__version__ = "0.1.0"

from .errors import ShipfuelError
from .evaluation import (CvReport, FoldAssignment, HyperGrid, adjusted_r2,
                         baseline_protocol, cross_validate, grid_search,
                         kfold_split, mae, r2, rmse)
from .grids import EnvGrid, EnvSample, GridAxis, daily_mean, fill_series, load_grid, \
    sample_at, save_grid
from .models import (BoostRegressor, DesignMatrix, ForestRegressor, ModelSpec,
                     RidgeRegressor, SvrRegressor, load_model, save_model)
from .pipeline import (FusedDataset, Pipeline, build_pipeline, read_fused_csv,
                       to_design_matrix, write_fused_csv)
from .reports import (Compass, GeoPosition, StateFlag, VoyageRecord, format_ddm,
                      parse_ddm_position, parse_report_table, parse_report_timestamp,
                      read_report_rows, timezone_policy)
from .synth import DefectSpec, FuelLaw, generate_voyage, inject_defects, write_corpus

__all__ = [
    "BoostRegressor", "Compass", "CvReport", "DefectSpec", "DesignMatrix",
    "EnvGrid", "EnvSample", "FoldAssignment", "ForestRegressor", "FuelLaw",
    "FusedDataset", "GeoPosition", "GridAxis", "HyperGrid", "ModelSpec",
    "Pipeline", "RidgeRegressor", "ShipfuelError", "StateFlag", "SvrRegressor",
    "VoyageRecord", "adjusted_r2", "baseline_protocol", "build_pipeline",
    "cross_validate", "daily_mean", "fill_series", "format_ddm",
    "generate_voyage", "grid_search", "inject_defects", "kfold_split",
    "load_grid", "load_model", "mae", "parse_ddm_position", "parse_report_table",
    "parse_report_timestamp", "r2", "read_fused_csv", "read_report_rows",
    "rmse", "sample_at", "save_grid", "save_model", "timezone_policy",
    "to_design_matrix", "write_corpus", "write_fused_csv",
]
