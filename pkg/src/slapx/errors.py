"""Error types and protocol reject reasons.

Every protocol-level rejection maps to exactly one RejectReason, and the
CLI maps each reason to its own process exit code (see cli.EXIT_CODES).
"""
from __future__ import annotations

import enum


class SlapxError(Exception):
    """Base class for all library errors."""


class ParameterError(SlapxError):
    """Invalid setup or configuration parameter."""


class CryptoError(SlapxError):
    """A primitive was used outside its contract (bad key, bad index, ...)."""


class ProtocolReject(SlapxError):
    """A protocol role refused a request; carries the reject reason."""

    def __init__(self, reason: "RejectReason", detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason.name}: {detail}" if detail else reason.name)


class RejectReason(enum.Enum):
    BAD_CREDENTIAL = "bad_credential"
    NOT_PROXIMATE = "not_proximate"
    STALE_BEACON = "stale_beacon"
    BAD_POL = "bad_pol"
    LINKED = "linked"
    EXPIRED = "expired"
    OUT_OF_AREA = "out_of_area"
    BAD_PUZZLE = "bad_puzzle"
    BAD_SOLUTION = "bad_solution"
    DELEGATION_DENIED = "delegation_denied"
    DBP_FAILED = "dbp_failed"
