from .reliability import (
    BoxplotSummary,
    VariableProfile,
    boxplot_fences,
    coefficient_of_variation,
    compute_profile,
    flag_unreliable,
    profile_table,
    profiles_frame,
)
from .outliers import (
    DbscanParams,
    PointLabel,
    RepairSummary,
    StandardizeState,
    apply_standardize,
    dbscan_label,
    inverse_standardize,
    repair_columns,
    repair_series,
    repair_values,
    standardize,
)

__all__ = [
    "BoxplotSummary",
    "VariableProfile",
    "boxplot_fences",
    "coefficient_of_variation",
    "compute_profile",
    "flag_unreliable",
    "profile_table",
    "profiles_frame",
    "DbscanParams",
    "PointLabel",
    "RepairSummary",
    "StandardizeState",
    "apply_standardize",
    "dbscan_label",
    "inverse_standardize",
    "repair_columns",
    "repair_series",
    "repair_values",
    "standardize",
]
