"""Multi-party quantum key agreement simulator with collusive adversaries."""

from .adversary import AttackPlan, Variant, feasible, flip_schedule, run_collusive_circle
from .errors import ConfigError, DetectionAbort, FeasibilityError, ProtocolViolation, StructuralError
from .keycore import Key, forged_key, xor_fold
from .protocols import RunOutcome, Verdict, run_cgt, run_circle, run_half_circle, run_tree
from .topology import CircleSchedule, Kind, Topology, circular_gaps

__version__ = "0.1.0"

__all__ = [
    "AttackPlan", "CircleSchedule", "ConfigError", "DetectionAbort", "FeasibilityError", "Key", "Kind",
    "ProtocolViolation", "RunOutcome", "StructuralError", "Topology", "Variant", "Verdict",
    "circular_gaps", "feasible", "flip_schedule", "forged_key", "run_cgt", "run_circle",
    "run_collusive_circle", "run_half_circle", "run_tree", "xor_fold",
]
