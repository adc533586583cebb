"""Merging a validated design into one flat netlist.

Every instance gets a deterministic ordinal (sorted instance ids) used to
prefix its reference designators and net names with ``B<k>_``. Ground nets
collapse into the single global ``GND``; each mat contributes a rail net
``VRAIL_<k>`` joining its output pins to every child's input pins; each bus
component contributes one net per protocol signal. Composition is a pure
function of (design, library): repeated runs are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from .diagnostics import Diagnostic, Severity
from .type_syntax import BlockClass, Ground

if TYPE_CHECKING:  # pragma: no cover
    from .engine import Design, PortRef


class ComposeError(ValueError):
    """Composition blocked; carries the outstanding Error diagnostics."""

    def __init__(self, message: str, diagnostics: list[Diagnostic] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class UnsetSupplyError(ComposeError):
    """A power instance with a range output needs a fixed supply setting."""


@dataclass
class MergedNetlist:
    components: dict[str, tuple[str, str]]  # refdes -> (block_id, part_ref)
    nets: dict[str, list[tuple[str, str]]]  # net name -> sorted (refdes, pin)
    provenance: dict[str, str]  # net name -> block-local | rail | ground | bus
    # net name -> (instance_id, local net id) feeding it; drives pad lookup.
    net_sources: dict[str, list[tuple[str, str]]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "components": {r: {"block": b, "part": p} for r, (b, p) in sorted(self.components.items())},
            "nets": {name: [[r, p] for r, p in pins] for name, pins in sorted(self.nets.items())},
            "provenance": dict(sorted(self.provenance.items())),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"


def parse_netlist(text: str) -> MergedNetlist:
    doc = json.loads(text)
    return MergedNetlist(
        components={r: (v["block"], v["part"]) for r, v in doc["components"].items()},
        nets={name: [(r, p) for r, p in pins] for name, pins in doc["nets"].items()},
        provenance=doc.get("provenance", {}),
    )


def instance_ordinals(design: "Design") -> dict[str, int]:
    """Instance id -> 1-based ordinal, stable under replay (sorted ids)."""
    return {instance_id: k for k, instance_id in enumerate(sorted(design.instances), start=1)}


def compose_schematic(design: "Design") -> MergedNetlist:
    """Merge the design into one netlist, or raise ComposeError.

    Preconditions: the live check set has no Errors and every power instance
    resolves to a fixed rail voltage (a supply setting, or a declared fixed
    output).
    """
    blocking = [d for d in design.check_design() if d.severity is Severity.ERROR]
    if blocking:
        raise ComposeError(
            f"design has {len(blocking)} blocking error(s); fix them before composing", blocking
        )
    for instance_id in sorted(design.instances):
        block = design.block_of(instance_id)
        if block.classification is BlockClass.POWER:
            inst = design.instances[instance_id]
            assert block.power_out is not None
            if inst.supply_setting_mv is None and not block.power_out.fixed:
                raise UnsetSupplyError(
                    f"power instance {instance_id!r} outputs a range; set a fixed supply before composing"
                )

    ordinals = instance_ordinals(design)
    # (instance, local net) -> merged net name; block-local prefixed default,
    # overridden by ground / rail / bus membership below.
    merged_name: dict[tuple[str, str], str] = {}
    provenance: dict[str, str] = {}

    def assign(instance_id: str, net_id: str, name: str, origin: str) -> None:
        merged_name[(instance_id, net_id)] = name
        provenance[name] = origin

    for instance_id in sorted(design.instances):
        block = design.block_of(instance_id)
        prefix = f"B{ordinals[instance_id]}_"
        for net in block.nets:
            assign(instance_id, net.net_id, prefix + net.net_id, "block-local")

    for instance_id in sorted(design.instances):
        block = design.block_of(instance_id)
        for net in block.nets:
            if isinstance(net.annotation, Ground):
                assign(instance_id, net.net_id, "GND", "ground")

    for instance_id in sorted(design.instances):
        block = design.block_of(instance_id)
        if block.classification not in (BlockClass.POWER, BlockClass.REGULATOR):
            continue
        vout = block.vout_net()
        if vout is None:
            continue
        rail = f"VRAIL_{ordinals[instance_id]}"
        assign(instance_id, vout.net_id, rail, "rail")
        for child_id in design.children_of(instance_id):
            vin = design.block_of(child_id).vin_net()
            if vin is not None:
                assign(child_id, vin.net_id, rail, "rail")

    for protocol, components in _bus_groups(design):
        for bus_ordinal, member_ports in enumerate(components, start=1):
            for ref in member_ports:
                port = design.block_of(ref.instance_id).port(ref.port_id)
                for signal, net_id in port.signals.items():
                    net_name = f"{protocol}_{bus_ordinal}" + (f"_{signal}" if signal else "")
                    assign(ref.instance_id, net_id, net_name, "bus")

    components: dict[str, tuple[str, str]] = {}
    nets: dict[str, list[tuple[str, str]]] = {}
    net_sources: dict[str, list[tuple[str, str]]] = {}
    for instance_id in sorted(design.instances):
        block = design.block_of(instance_id)
        prefix = f"B{ordinals[instance_id]}_"
        for net in block.nets:
            name = merged_name[(instance_id, net.net_id)]
            net_sources.setdefault(name, []).append((instance_id, net.net_id))
            for refdes, pin in net.pins:
                components.setdefault(prefix + refdes, (block.block_id, refdes))
                nets.setdefault(name, []).append((prefix + refdes, pin))

    # A net exists only once it carries at least one pin (degenerate designs
    # must still compose: no grounds means no GND net).
    nets = {name: sorted(pins) for name, pins in nets.items() if pins}
    provenance = {name: origin for name, origin in provenance.items() if name in nets}
    net_sources = {name: sorted(srcs) for name, srcs in net_sources.items() if name in nets}
    return MergedNetlist(components=components, nets=nets, provenance=provenance, net_sources=net_sources)


def _bus_groups(design: "Design") -> list[tuple[str, list[list["PortRef"]]]]:
    """Per protocol, the edge-connected port components in deterministic order."""
    protocols = sorted({p for e in design.edges for p in design.edge_protocols(e)})
    out = []
    for protocol in protocols:
        comps = design.bus_components(protocol)
        members = [
            sorted({_ref(p) for p in comp.members})
            for comp in sorted(comps, key=lambda c: min(m.path for m in c.members))
        ]
        out.append((protocol, members))
    return out


def _ref(member) -> "PortRef":
    from .engine import PortRef

    return PortRef(member.instance_id, member.port_id)


def export_netlist(netlist: MergedNetlist, path: str | Path) -> None:
    """Deterministic serialization: sorted keys, LF endings, trailing newline."""
    Path(path).write_text(netlist.dumps(), encoding="utf-8", newline="\n")


def connectivity_pairs(netlist: MergedNetlist) -> set[frozenset]:
    """The electrical relation as a set of pin groups (for oracle comparison)."""
    return {frozenset(pins) for pins in netlist.nets.values() if len(pins) > 1}
