"""Race checking for protocols over shared Go-style FIFO channels."""

from .errors import (
    BindingError,
    BoundExceeded,
    OrderError,
    ProgramError,
    ProgramSyntaxError,
    ProtocolError,
    ProtocolSyntaxError,
    RaceFreeError,
    TransformError,
)
from .order import apply_channel_rules, apply_propagation, derive_orders, detect_cycle, happens_before
from .oracle import check_legal, classify_race, count_protocols, enumerate_executions
from .program import extract_parties, parse_program
from .projection import ProjectionContext, project_endpoint, project_party
from .protocol import normalize, parse, render, validate
from .transform import make_race_free
from .verifier import verify

__version__ = "0.1.0"

__all__ = [
    "BindingError", "BoundExceeded", "OrderError", "ProgramError", "ProgramSyntaxError",
    "ProtocolError", "ProtocolSyntaxError", "RaceFreeError", "TransformError",
    "apply_channel_rules", "apply_propagation", "derive_orders", "detect_cycle", "happens_before",
    "check_legal", "classify_race", "count_protocols", "enumerate_executions",
    "extract_parties", "parse_program", "ProjectionContext", "project_endpoint", "project_party",
    "normalize", "parse", "render", "validate", "make_race_free", "verify",
]
