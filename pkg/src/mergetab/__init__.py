"""Offline version control for single-table datasets.

Branches record logical modifications (UPDATE/INSERT/DELETE statements);
the merge engine decides whether two branches can be merged in any order
(auto-mergeability), pinpoints the exact rows whose final state depends
on the order, and reconciles the rest interactively with at most
|H1| + |H2| precedence questions.

Hot paths (bulk condition scans, the ground-truth state-set DP) run on a
compiled extension when built, with a pure-Python twin selected at import
otherwise; set MP_KERNEL=py or MP_KERNEL=c to force one.
"""

from ._kernel import kernel_name
from .detect import ConflictReport, PairConflict, detect
from .mods import (
    Assignment,
    Delete,
    History,
    Insert,
    Interleaving,
    ModId,
    Update,
    apply_history,
    apply_modification,
    enumerate_interleavings,
)
from .oracles import (
    exhaustive_automergeable,
    locking_conflicts,
    oracle_conflicts,
    three_way_diff_conflicts,
)
from .resolve import MergeSession, Prompt, resolve, start_session
from .schema import RowId, Schema
from .store import Repository
from .table import Row, TableSnapshot, snapshot_equal

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "ConflictReport",
    "Delete",
    "History",
    "Insert",
    "Interleaving",
    "MergeSession",
    "ModId",
    "PairConflict",
    "Prompt",
    "Repository",
    "Row",
    "RowId",
    "Schema",
    "TableSnapshot",
    "Update",
    "apply_history",
    "apply_modification",
    "detect",
    "enumerate_interleavings",
    "exhaustive_automergeable",
    "kernel_name",
    "locking_conflicts",
    "oracle_conflicts",
    "resolve",
    "snapshot_equal",
    "start_session",
    "three_way_diff_conflicts",
]
