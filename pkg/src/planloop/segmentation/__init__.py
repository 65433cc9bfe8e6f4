from .kernels import independence_baseline_table, mi_window_series, numba_enabled
from .mi import MISeries, WindowConfig, histogram_entropy, mi_series, moving_average, mutual_information, windowed_mi_1d
from .segment import (
    DEFAULT_D_TH,
    KeyInstant,
    PlanExtraction,
    detect_approach_instant,
    detect_interaction,
    detect_key_instants,
    extract_plan,
    find_mi_minima,
    generate_plan,
    windowed_mean_distance,
)

__all__ = [
    "DEFAULT_D_TH",
    "KeyInstant",
    "MISeries",
    "PlanExtraction",
    "WindowConfig",
    "detect_approach_instant",
    "detect_interaction",
    "detect_key_instants",
    "extract_plan",
    "find_mi_minima",
    "generate_plan",
    "histogram_entropy",
    "independence_baseline_table",
    "mi_series",
    "mi_window_series",
    "moving_average",
    "mutual_information",
    "numba_enabled",
    "windowed_mean_distance",
    "windowed_mi_1d",
]
