"""The interface-type annotation language for schematic net labels.

Net labels carry one of four annotations:

* ``#PROTO[.SIGNAL][-ALT][_VOLTAGE][!]`` - a protocol declaration, e.g.
  ``#I2C.SDA``, ``#GPIO-RESET``, ``#GPIO-0!``
* ``@VIN_VOLTAGE`` / ``@VOUT_VOLTAGE`` - a power declaration, e.g.
  ``@VOUT_3V``, ``@VIN_5V-9V``
* ``GND`` - the reserved ground keyword (case-insensitive)
* anything else - a plain, untyped label kept verbatim

Block-level attributes live in a separate ``#{KEY=VALUE, ...}`` comment
block parsed by :func:`parse_global_attrs`.

All parsing is case-insensitive except plain labels; voltages normalize to
integer millivolts. Everything here is pure and thread-safe.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum


class ParseError(ValueError):
    """A sigil-led label or attribute block that violates the grammar."""

    def __init__(self, message: str, position: int = 0, expected: str = ""):
        super().__init__(f"{message} (at position {position})" if position else message)
        self.position = position
        self.expected = expected


@dataclass(frozen=True)
class VoltageRange:
    """Inclusive voltage interval in integer millivolts; fixed when min==max."""

    min_mv: int
    max_mv: int

    def __post_init__(self):
        if self.min_mv <= 0:
            raise ParseError(f"voltage must be positive, got {self.min_mv} mV")
        if self.min_mv > self.max_mv:
            raise ParseError(f"reversed voltage range {self.min_mv}..{self.max_mv} mV")

    @property
    def fixed(self) -> bool:
        return self.min_mv == self.max_mv

    def contains(self, other: "VoltageRange") -> bool:
        return self.min_mv <= other.min_mv and other.max_mv <= self.max_mv

    def overlaps(self, other: "VoltageRange") -> bool:
        return self.min_mv <= other.max_mv and other.min_mv <= self.max_mv


class PowerDirection(str, Enum):
    VIN = "VIN"
    VOUT = "VOUT"


@dataclass(frozen=True)
class ProtocolDecl:
    protocol: str
    signal: str | None = None
    alt_name: str | None = None
    optional_flag: bool = False
    level: VoltageRange | None = None


@dataclass(frozen=True)
class PowerDecl:
    direction: PowerDirection
    range: VoltageRange


@dataclass(frozen=True)
class Ground:
    pass


@dataclass(frozen=True)
class Plain:
    name: str


Annotation = ProtocolDecl | PowerDecl | Ground | Plain


class BlockClass(str, Enum):
    POWER = "POWER"
    REGULATOR = "REGULATOR"
    COMPUTE = "COMPUTE"
    PERIPHERAL = "PERIPHERAL"


class SpiRole(str, Enum):
    MASTER = "MASTER"
    SLAVE = "SLAVE"


@dataclass
class GlobalAttrs:
    """Parsed ``#{...}`` comment block: classification plus per-port attributes.

    Address and role maps are keyed by port alternate name, with the empty
    string standing for the port with no alternate name.
    """

    block_class: BlockClass | None = None
    i2c_addr: dict[str, int] = field(default_factory=dict)
    spi_role: dict[str, SpiRole] = field(default_factory=dict)
    extras: dict[str, str] = field(default_factory=dict)


_IDENT_RE = re.compile(r"[A-Z][A-Z0-9]*")
_ALT_RE = re.compile(r"[A-Z0-9]+")
_VOLT_TOKEN_RE = re.compile(r"(\d+)(?:\.(\d+))?V(\d+)?", re.IGNORECASE)
_ATTR_KEY_RE = re.compile(r"[A-Z][A-Z0-9]*(?:\.[A-Z][A-Z0-9]*)?(?:-[A-Z0-9]+)?")


def _parse_volt_token(text: str, offset: int = 0) -> int:
    """One voltage token -> millivolts. Accepts 3V, 3.3V, and 3V3 forms."""
    m = _VOLT_TOKEN_RE.fullmatch(text)
    if not m:
        raise ParseError(f"unparseable voltage {text!r}", offset, expected="<n>V, <n>.<m>V or <n>V<m>")
    whole, dec_frac, v_frac = m.groups()
    if dec_frac is not None and v_frac is not None:
        raise ParseError(f"unparseable voltage {text!r}", offset, expected="a single fraction")
    frac = dec_frac if dec_frac is not None else v_frac
    mv = int(whole) * 1000
    if frac is not None:
        if len(frac) > 3:
            raise ParseError(f"voltage {text!r} is finer than 1 mV", offset, expected="at most 3 fractional digits")
        mv += int(frac.ljust(3, "0"))
    if mv <= 0:
        raise ParseError(f"voltage must be positive, got {text!r}", offset)
    return mv


def parse_voltage(text: str, offset: int = 0) -> VoltageRange:
    """Parse the voltage suffix after ``_``: a fixed value or ``A-B`` range."""
    text = text.strip()
    if not text:
        raise ParseError("missing voltage", offset, expected="voltage like 3V3 or 5V-9V")
    if "-" in text:
        lo_txt, sep, hi_txt = text.partition("-")
        lo = _parse_volt_token(lo_txt.strip(), offset)
        hi = _parse_volt_token(hi_txt.strip(), offset + len(lo_txt) + 1)
        if lo > hi:
            raise ParseError(f"reversed voltage range {text!r}", offset, expected="min-max with min <= max")
        return VoltageRange(lo, hi)
    mv = _parse_volt_token(text, offset)
    return VoltageRange(mv, mv)


def render_voltage(mv: int) -> str:
    whole, frac = divmod(mv, 1000)
    if frac == 0:
        return f"{whole}V"
    return f"{whole}.{str(frac).zfill(3).rstrip('0')}V"


def render_voltage_range(r: VoltageRange) -> str:
    if r.fixed:
        return render_voltage(r.min_mv)
    return f"{render_voltage(r.min_mv)}-{render_voltage(r.max_mv)}"


class _Scanner:
    """Cursor over an uppercased label; positions refer to the original text."""

    def __init__(self, text: str):
        self.text = text
        self.upper = text.upper()
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.upper[self.pos] if not self.eof() else ""

    def take(self, regex: re.Pattern, what: str) -> str:
        m = regex.match(self.upper, self.pos)
        if not m:
            raise ParseError(f"expected {what}", self.pos, expected=what)
        self.pos = m.end()
        return m.group(0)

    def expect_eof(self):
        if not self.eof():
            raise ParseError(
                f"unexpected trailing text {self.text[self.pos:]!r}", self.pos, expected="end of label"
            )


def _parse_protocol(sc: _Scanner) -> ProtocolDecl:
    sc.pos += 1  # '#'
    protocol = sc.take(_IDENT_RE, "protocol name")
    signal = alt = None
    level = None
    if sc.peek() == ".":
        sc.pos += 1
        signal = sc.take(_IDENT_RE, "signal name")
    if sc.peek() == "-":
        sc.pos += 1
        alt = sc.take(_ALT_RE, "alternate name")
    if sc.peek() == "_":
        sc.pos += 1
        rest = sc.upper[sc.pos :]
        bang = rest.endswith("!")
        level = parse_voltage(rest[:-1] if bang else rest, sc.pos)
        sc.pos = len(sc.upper) - (1 if bang else 0)
    optional = False
    if sc.peek() == "!":
        sc.pos += 1
        optional = True
    sc.expect_eof()
    return ProtocolDecl(protocol=protocol, signal=signal, alt_name=alt, optional_flag=optional, level=level)


def _parse_power(sc: _Scanner) -> PowerDecl:
    sc.pos += 1  # '@'
    word = sc.take(_IDENT_RE, "VIN or VOUT")
    try:
        direction = PowerDirection(word)
    except ValueError:
        raise ParseError(f"unknown power direction {word!r}", 1, expected="VIN or VOUT") from None
    if sc.peek() != "_":
        raise ParseError("power declaration needs a voltage", sc.pos, expected="_<voltage>")
    sc.pos += 1
    rest = sc.upper[sc.pos :]
    if rest.endswith("!"):
        raise ParseError("'!' is only valid on protocol declarations", len(sc.upper) - 1, expected="voltage")
    rng = parse_voltage(rest, sc.pos)
    sc.pos = len(sc.upper)
    return PowerDecl(direction=direction, range=rng)


def parse_annotation(label: str) -> Annotation:
    """Parse one net label into its annotation.

    Labels without a ``#``/``@`` sigil fall back to :class:`Plain` (or
    :class:`Ground` for the reserved ``GND`` keyword); sigil-led labels that
    violate the grammar raise :class:`ParseError`.
    """
    stripped = label.strip()
    if not stripped:
        return Plain(label)
    head = stripped[0]
    if head == "#":
        if stripped.startswith("#{"):
            raise ParseError(
                "global attribute blocks are comments, not net annotations", 0, expected="#<protocol>"
            )
        return _parse_protocol(_Scanner(stripped))
    if head == "@":
        return _parse_power(_Scanner(stripped))
    if stripped.upper() == "GND":
        return Ground()
    return Plain(label)


def render_annotation(a: Annotation) -> str:
    """Canonical text for an annotation; inverse of :func:`parse_annotation`."""
    if isinstance(a, ProtocolDecl):
        out = f"#{a.protocol}"
        if a.signal:
            out += f".{a.signal}"
        if a.alt_name:
            out += f"-{a.alt_name}"
        if a.level:
            out += f"_{render_voltage_range(a.level)}"
        if a.optional_flag:
            out += "!"
        return out
    if isinstance(a, PowerDecl):
        return f"@{a.direction.value}_{render_voltage_range(a.range)}"
    if isinstance(a, Ground):
        return "GND"
    return a.name


def _split_attr_key(key: str) -> tuple[str, str]:
    """``I2C.ADDR-DISP`` -> (``I2C.ADDR``, ``DISP``); no suffix -> empty alt."""
    base, sep, alt = key.partition("-")
    return base, alt


def _parse_i2c_addr(value: str, key: str) -> int:
    try:
        addr = int(value, 16) if value.lower().startswith("0x") else int(value)
    except ValueError:
        raise ParseError(f"{key}: address {value!r} is not a number", expected="7-bit address") from None
    if not 0 <= addr <= 0x7F:
        raise ParseError(f"{key}: address {value!r} outside 7-bit range 0x00..0x7F")
    return addr


def parse_global_attrs(comment: str) -> GlobalAttrs:
    """Parse a ``#{KEY=VALUE, ...}`` comment block.

    Recognized keys: ``CLASS``, ``I2C.ADDR[-alt]``, ``SPI.ROLE[-alt]``.
    Unrecognized keys are kept, in order, in ``extras``.
    """
    text = comment.strip()
    if not text.startswith("#{") or not text.endswith("}"):
        raise ParseError("global attributes must be wrapped in #{ ... }", 0, expected="#{...}")
    interior = text[2:-1].strip()
    attrs = GlobalAttrs()
    if not interior:
        return attrs
    seen: set[str] = set()
    for raw_pair in interior.split(","):
        pair = raw_pair.strip()
        if not pair:
            raise ParseError("empty attribute entry", comment.find(raw_pair), expected="KEY=VALUE")
        key_txt, eq, value = pair.partition("=")
        if not eq:
            raise ParseError(f"attribute {pair!r} is missing '='", expected="KEY=VALUE")
        key = key_txt.strip().upper()
        value = value.strip()
        if not _ATTR_KEY_RE.fullmatch(key):
            raise ParseError(f"malformed attribute key {key_txt.strip()!r}")
        if key in seen:
            raise ParseError(f"duplicate attribute key {key}")
        seen.add(key)
        base, alt = _split_attr_key(key)
        if key == "CLASS":
            try:
                attrs.block_class = BlockClass(value.upper())
            except ValueError:
                raise ParseError(f"unknown CLASS value {value!r}", expected="POWER|REGULATOR|COMPUTE|PERIPHERAL") from None
        elif base == "I2C.ADDR":
            attrs.i2c_addr[alt] = _parse_i2c_addr(value, key)
        elif base == "SPI.ROLE":
            try:
                attrs.spi_role[alt] = SpiRole(value.upper())
            except ValueError:
                raise ParseError(f"{key}: unknown role {value!r}", expected="MASTER or SLAVE") from None
        else:
            attrs.extras[key] = value
    return attrs


def render_global_attrs(attrs: GlobalAttrs) -> str:
    """Canonical ``#{...}`` text, fixed key order for byte-stable storage."""
    parts: list[str] = []
    if attrs.block_class:
        parts.append(f"CLASS={attrs.block_class.value}")
    for alt in sorted(attrs.i2c_addr):
        key = "I2C.ADDR" + (f"-{alt}" if alt else "")
        parts.append(f"{key}=0x{attrs.i2c_addr[alt]:02X}")
    for alt in sorted(attrs.spi_role):
        key = "SPI.ROLE" + (f"-{alt}" if alt else "")
        parts.append(f"{key}={attrs.spi_role[alt].value}")
    for key, value in attrs.extras.items():
        parts.append(f"{key}={value}")
    return "#{" + ", ".join(parts) + "}"
