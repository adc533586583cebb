"""Protocol registry and the connection validators.

Four checking families, all pure functions over immutable inputs:

* voltage containment between a mat's rail and a child block's input range
* protocol identity between two ports being wired
* bus-level attribute rules run per edge-connected component (I2C address
  uniqueness, SPI master/slave multiset, point-to-point exclusivity, logic
  level overlap)
* required-interface coverage (non-optional ports must be wired)

Protocols are declarative: a name, an ordered signal list, whether one port
may fan out to many edges, and a selection of built-in attribute validators.
User registries extend the built-in I2C/SPI/GPIO set from a JSON file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .diagnostics import Diagnostic, Kind, error, warning
from .type_syntax import BlockClass, SpiRole, VoltageRange, render_voltage_range

ADDR_UNIQUE = "i2c_addr_unique"
MASTER_SLAVE = "spi_master_slave"
BUILTIN_VALIDATORS = (ADDR_UNIQUE, MASTER_SLAVE)


class DefError(ValueError):
    """A protocol definitions file that collides with or corrupts the registry."""


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    signals: tuple[str, ...]
    multi_drop: bool
    attr_validators: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.signals:
            raise DefError(f"protocol {self.name} has an empty signal list")
        if len(set(self.signals)) != len(self.signals):
            raise DefError(f"protocol {self.name} repeats a signal name")


def _builtin_specs() -> dict[str, ProtocolSpec]:
    return {
        "I2C": ProtocolSpec("I2C", ("SDA", "SCL"), multi_drop=True, attr_validators=(ADDR_UNIQUE,)),
        "SPI": ProtocolSpec("SPI", ("SCK", "MISO", "MOSI"), multi_drop=True, attr_validators=(MASTER_SLAVE,)),
        # GPIO is a single unnamed signal, strictly point-to-point.
        "GPIO": ProtocolSpec("GPIO", ("",), multi_drop=False),
    }


class ProtocolRegistry:
    """Immutable-after-load catalog of protocol specs; built-ins always present."""

    def __init__(self, extra: dict[str, ProtocolSpec] | None = None):
        self._specs = _builtin_specs()
        if extra:
            self._specs.update(extra)

    def get(self, name: str) -> ProtocolSpec | None:
        return self._specs.get(name.upper())

    def names(self) -> list[str]:
        return sorted(self._specs)

    def __contains__(self, name: str) -> bool:
        return name.upper() in self._specs


def builtin_registry() -> ProtocolRegistry:
    return ProtocolRegistry()


def load_protocol_registry(defs_file: str | Path) -> ProtocolRegistry:
    """Load user protocol definitions on top of the built-ins.

    File shape: ``{"protocols": [{"name", "signals", "multi_drop",
    "validators"}]}``. Raises :class:`DefError` on built-in collisions,
    empty signal lists, or unknown validator ids.
    """
    data = json.loads(Path(defs_file).read_text(encoding="utf-8"))
    entries = data.get("protocols", [])
    builtins = _builtin_specs()
    extra: dict[str, ProtocolSpec] = {}
    for entry in entries:
        name = str(entry["name"]).upper()
        if name in builtins:
            raise DefError(f"protocol {name} collides with a built-in")
        if name in extra:
            raise DefError(f"protocol {name} defined twice")
        validators = tuple(entry.get("validators", ()))
        for v in validators:
            if v not in BUILTIN_VALIDATORS:
                raise DefError(f"protocol {name} names unknown validator {v!r}")
        signals = tuple(str(s).upper() for s in entry.get("signals", ()))
        if not signals:
            raise DefError(f"protocol {name} has an empty signal list")
        extra[name] = ProtocolSpec(name, signals, bool(entry.get("multi_drop", False)), validators)
    return ProtocolRegistry(extra)


@dataclass(frozen=True)
class BusPort:
    """One member of a bus component, with its resolved attributes."""

    instance_id: str
    port_id: str
    block_class: BlockClass
    addr: int | None = None
    role: SpiRole | None = None
    level: VoltageRange | None = None
    edge_count: int = 1

    @property
    def path(self) -> str:
        return f"instance/{self.instance_id}/port/{self.port_id}"


@dataclass(frozen=True)
class BusComponent:
    """An edge-connected set of same-protocol ports validated as one bus."""

    protocol: str
    members: tuple[BusPort, ...]
    edges: tuple[tuple[str, str], ...] = ()  # pairs of member paths, endpoints sorted


def voltage_check(child_vin: VoltageRange, rail: VoltageRange, subject: str) -> Diagnostic | None:
    """None iff the rail range sits entirely inside the block's input range."""
    if child_vin.contains(rail):
        return None
    return error(
        Kind.VOLTAGE_MISMATCH,
        subject,
        f"mat supplies {render_voltage_range(rail)} but block accepts {render_voltage_range(child_vin)}",
    )


def protocol_match(protocol_a: str, protocol_b: str, subject: str) -> Diagnostic | None:
    """None iff the two ports speak the same protocol; alt names are cosmetic."""
    if protocol_a == protocol_b:
        return None
    return error(
        Kind.PROTOCOL_MISMATCH,
        subject,
        f"cannot connect {protocol_a} port to {protocol_b} port",
    )


def _check_addr_unique(component: BusComponent) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    by_addr: dict[int, list[BusPort]] = {}
    for port in component.members:
        if port.addr is None:
            # Addresses are only expected on the peripheral side of a bus.
            if port.block_class is BlockClass.PERIPHERAL:
                diags.append(
                    warning(
                        Kind.I2C_ADDRESS_CONFLICT,
                        port.path,
                        "no I2C address declared for peripheral port; address conflict check skipped",
                    )
                )
            continue
        by_addr.setdefault(port.addr, []).append(port)
    for addr in sorted(by_addr):
        offenders = sorted(by_addr[addr], key=lambda p: p.path)
        if len(offenders) > 1:
            diags.append(
                error(
                    Kind.I2C_ADDRESS_CONFLICT,
                    offenders[0].path,
                    f"I2C address 0x{addr:02X} used by multiple ports: "
                    + ", ".join(p.path for p in offenders),
                )
            )
    return diags


def _check_master_slave(component: BusComponent) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    declared: list[BusPort] = []
    for port in component.members:
        if port.role is None:
            diags.append(
                warning(
                    Kind.SPI_ROLE_CONFLICT,
                    port.path,
                    "no SPI role declared for port; master/slave check skipped",
                )
            )
        else:
            declared.append(port)
    if not declared:
        return diags
    masters = sum(1 for p in declared if p.role is SpiRole.MASTER)
    slaves = sum(1 for p in declared if p.role is SpiRole.SLAVE)
    if masters != 1 or slaves < 1:
        anchor = min(declared, key=lambda p: p.path)
        diags.append(
            error(
                Kind.SPI_ROLE_CONFLICT,
                anchor.path,
                f"SPI bus needs exactly one MASTER and at least one SLAVE "
                f"(found {masters} MASTER, {slaves} SLAVE)",
            )
        )
    return diags


_VALIDATORS = {
    ADDR_UNIQUE: _check_addr_unique,
    MASTER_SLAVE: _check_master_slave,
}


def bus_check(component: BusComponent, registry: ProtocolRegistry) -> list[Diagnostic]:
    """Run every attribute validator the protocol declares over one bus.

    Also enforces point-to-point cardinality for non-multi-drop protocols
    and the always-on logic-level overlap check per edge.
    """
    spec = registry.get(component.protocol)
    diags: list[Diagnostic] = []
    if spec is not None:
        for validator_id in spec.attr_validators:
            diags.extend(_VALIDATORS[validator_id](component))
        if not spec.multi_drop:
            for port in component.members:
                if port.edge_count > 1:
                    diags.append(
                        error(
                            Kind.GPIO_EXCLUSIVITY,
                            port.path,
                            f"{component.protocol} port carries {port.edge_count} connections; "
                            f"{component.protocol} is point-to-point",
                        )
                    )
    by_path = {p.path: p for p in component.members}
    for path_a, path_b in component.edges:
        level_a = by_path[path_a].level
        level_b = by_path[path_b].level
        if level_a and level_b and not level_a.overlaps(level_b):
            diags.append(
                warning(
                    Kind.LOGIC_LEVEL_MISMATCH,
                    f"edge/{_edge_token(path_a)}~{_edge_token(path_b)}",
                    f"logic levels do not overlap: {render_voltage_range(level_a)} "
                    f"vs {render_voltage_range(level_b)}",
                )
            )
    return diags


def _edge_token(port_path: str) -> str:
    # instance/<id>/port/<p> -> <id>:<p>
    parts = port_path.split("/")
    return f"{parts[1]}:{parts[3]}"


def required_check(ports: list[tuple[str, str, bool, int]]) -> list[Diagnostic]:
    """Flag every non-optional port with zero edges.

    ``ports`` rows are (subject path, protocol, optional_flag, edge_count);
    optional ports are never flagged.
    """
    diags: list[Diagnostic] = []
    for path, protocol, optional_flag, edge_count in ports:
        if not optional_flag and edge_count == 0:
            diags.append(
                error(
                    Kind.MISSING_REQUIRED_INTERFACE,
                    path,
                    f"required {protocol} port has no connection",
                )
            )
    return diags
