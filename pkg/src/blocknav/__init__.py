"""Flexible-access assembly instructions for tagged building blocks.

The pieces, bottom to top: instruction documents (steps, sub-parts, a
block catalog keyed by printed tag ids), a navigation engine blending
linear paging with tag-triggered jumps, a detection relay between sensor
devices and players, simulators for both ends of that wire, and an HTTP
session service the browser player talks to.
"""

from .clock import ManualClock, SystemClock
from .document import (
    BlockIndex,
    BlockSpec,
    ComplexityReport,
    DocumentError,
    InstructionDocument,
    Step,
    SubPart,
    ValidationReport,
    Violation,
    build_block_index,
    complexity_metrics,
    load_document,
    parse_document,
    serialize_document,
    validate,
)
from .engine import (
    LogDocMismatch,
    NavState,
    OverviewView,
    SessionLogEntry,
    WrongTriggerMode,
    apply_command,
    apply_linear,
    arm_this_one,
    create_session,
    going_back,
    on_detection,
    overview,
    replay,
    resolve_jump,
)
from .relay import (
    MalformedReport,
    RelayClient,
    RelayStore,
    RelayUnreachable,
    SubmitResult,
    TagDetection,
    make_relay_server,
)
from .recognizer import RecognizerConfig, ShowEvent, interactive_show, run_script
from .service import SessionHost, UnknownDocument, UnknownSession, make_session_server
# The simulate() entry point stays module-qualified (blocknav.simulate.simulate)
# so the submodule name keeps winning at package level.
from .simulate import (
    JumpLabel,
    Metrics,
    SimulationResult,
    StrategyProfile,
    classify_jumps,
    compute_metrics,
    confusion_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "BlockIndex",
    "BlockSpec",
    "ComplexityReport",
    "DocumentError",
    "InstructionDocument",
    "JumpLabel",
    "LogDocMismatch",
    "ManualClock",
    "MalformedReport",
    "Metrics",
    "NavState",
    "OverviewView",
    "RecognizerConfig",
    "RelayClient",
    "RelayStore",
    "RelayUnreachable",
    "SessionHost",
    "SessionLogEntry",
    "ShowEvent",
    "SimulationResult",
    "Step",
    "StrategyProfile",
    "SubPart",
    "SubmitResult",
    "SystemClock",
    "TagDetection",
    "UnknownDocument",
    "UnknownSession",
    "ValidationReport",
    "Violation",
    "WrongTriggerMode",
    "apply_command",
    "apply_linear",
    "arm_this_one",
    "build_block_index",
    "classify_jumps",
    "complexity_metrics",
    "compute_metrics",
    "confusion_matrix",
    "create_session",
    "going_back",
    "interactive_show",
    "load_document",
    "make_relay_server",
    "make_session_server",
    "on_detection",
    "overview",
    "parse_document",
    "replay",
    "resolve_jump",
    "run_script",
    "serialize_document",
    "validate",
]
