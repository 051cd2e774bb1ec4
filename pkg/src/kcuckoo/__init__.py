"""Generalized cuckoo hashing ``CH(k, b, ell, s)`` with failure estimation,
robustness attacks, probabilistic batch codes and batch PIR."""

from .construct import ConstructionResult, ConstructionStats, construct
from .errors import (
    ConstructionFailure,
    CuckooError,
    DecodeError,
    GridError,
    InputError,
    ParameterError,
    ScheduleFailure,
    SizeError,
    UnsupportedParameterError,
)
from .estimator import FailureEstimate, GridSpec, estimate_failure, probe_err_lb, run_grid
from .graph import Allocation, CuckooGraph, build_graph, find_hall_violation, max_left_matching
from .hashing import CuckooParams, HashKey, SlotId, child_seed, entry_index, probe_set, sample_key
from .params import b_single_hash, k_for_failure, k_robust, overhead_lower_bound
from .table import CuckooTable, build_table, query

__version__ = "0.1.0"

__all__ = [
    "Allocation", "ConstructionFailure", "ConstructionResult", "ConstructionStats",
    "CuckooError", "CuckooGraph", "CuckooParams", "CuckooTable", "DecodeError",
    "FailureEstimate", "GridError", "GridSpec", "HashKey", "InputError",
    "ParameterError", "ScheduleFailure", "SizeError", "SlotId",
    "UnsupportedParameterError", "b_single_hash", "build_graph", "build_table",
    "child_seed", "construct", "entry_index", "estimate_failure",
    "find_hall_violation", "k_for_failure", "k_robust", "max_left_matching",
    "overhead_lower_bound", "probe_err_lb", "probe_set", "run_grid", "sample_key",
    "query",
]
