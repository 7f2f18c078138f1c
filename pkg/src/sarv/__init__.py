"""Mutable forests of token trees over a simulated append-only ledger."""

from sarv.api import SarvApi, UnsignedRequest, Wallet
from sarv.forest import CallContext, Forest
from sarv.ledger import Address, Ledger, LedgerState, LogEntry, export_log, import_log
from sarv.monitor import Violation, ViolationCode, audit_forest, preflight, would_create_cycle
from sarv.operation import Operation
from sarv.passport import passport_of, rebuild_state, tree_at

__all__ = [
    "Address",
    "CallContext",
    "Forest",
    "Ledger",
    "LedgerState",
    "LogEntry",
    "Operation",
    "SarvApi",
    "UnsignedRequest",
    "Violation",
    "ViolationCode",
    "Wallet",
    "audit_forest",
    "export_log",
    "import_log",
    "passport_of",
    "preflight",
    "rebuild_state",
    "tree_at",
    "would_create_cycle",
]
