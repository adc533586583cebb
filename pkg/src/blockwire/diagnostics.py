"""Diagnostic records shared by every checking layer.

A Diagnostic is one validation finding: severity, kind, the path of the
entity it is about, and a human-readable message. Subjects use slash paths
such as ``instance/i3/port/I2C`` or ``edge/i2:GPIO-0~i5:GPIO-OUT`` so they
sort deterministically and can be resolved back to design entities.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Severity(str, Enum):
    ERROR = "Error"
    WARNING = "Warning"


class Kind(str, Enum):
    PROTOCOL_MISMATCH = "ProtocolMismatch"
    VOLTAGE_MISMATCH = "VoltageMismatch"
    I2C_ADDRESS_CONFLICT = "I2cAddressConflict"
    SPI_ROLE_CONFLICT = "SpiRoleConflict"
    GPIO_EXCLUSIVITY = "GpioExclusivity"
    MISSING_REQUIRED_INTERFACE = "MissingRequiredInterface"
    BOUNDARY_VIOLATION = "BoundaryViolation"
    OVERLAP = "Overlap"
    UNROUTABLE = "Unroutable"
    SYNTAX_ERROR = "SyntaxError"
    PORT_ERROR = "PortError"
    CLASSIFICATION_ERROR = "ClassificationError"
    PAD_NET_MISMATCH = "PadNetMismatch"
    LOGIC_LEVEL_MISMATCH = "LogicLevelMismatch"
    NOT_FOUND = "NotFound"


@dataclass(frozen=True, order=True)
class Diagnostic:
    """One validation finding, hashable so live sets compare exactly."""

    severity: Severity
    kind: Kind
    subject: str
    message: str

    def sort_key(self) -> tuple[str, str, str, str]:
        # Deterministic report order: subject path first, then kind.
        return (self.subject, self.kind.value, self.severity.value, self.message)

    def to_json(self) -> dict:
        return {
            "severity": self.severity.value,
            "kind": self.kind.value,
            "subject": self.subject,
            "message": self.message,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Diagnostic":
        return cls(
            severity=Severity(data["severity"]),
            kind=Kind(data["kind"]),
            subject=data["subject"],
            message=data["message"],
        )


def error(kind: Kind, subject: str, message: str) -> Diagnostic:
    return Diagnostic(Severity.ERROR, kind, subject, message)


def warning(kind: Kind, subject: str, message: str) -> Diagnostic:
    return Diagnostic(Severity.WARNING, kind, subject, message)


def sort_diagnostics(diags: list[Diagnostic]) -> list[Diagnostic]:
    return sorted(diags, key=Diagnostic.sort_key)


def has_errors(diags: list[Diagnostic]) -> bool:
    return any(d.severity is Severity.ERROR for d in diags)
