"""The design model: a containment forest of mats plus a protocol-edge graph.

Power and regulator blocks are *mats*: blocks nest inside them and inherit
their output rail, which replaces manual supply wiring. Compute and
peripheral blocks are *general* blocks wired port-to-port by edges. Every
mutation marks the affected subjects dirty and re-runs just their checks,
so the accumulated live diagnostic set always equals a from-scratch
:meth:`Design.check_design` (the batch oracle used by the tests).

Mutations on one design must be externally serialized; reads may run
concurrently between mutations. Distinct designs are independent.
"""

from __future__ import annotations

import json
import re
from itertools import count
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

from . import board as board_geometry
from .board import BoardSettings, Placement
from .checkers import (
    BusComponent,
    BusPort,
    ProtocolRegistry,
    builtin_registry,
    bus_check,
    protocol_match,
    required_check,
    voltage_check,
)
from .diagnostics import Diagnostic, sort_diagnostics
from .library import BlockDefinition, BlockLibrary, NotFoundError, ProtocolPort
from .type_syntax import BlockClass, VoltageRange

MAT_CLASSES = (BlockClass.POWER, BlockClass.REGULATOR)
GENERAL_CLASSES = (BlockClass.COMPUTE, BlockClass.PERIPHERAL)


class StructureError(ValueError):
    """A mutation that would break the mat forest or edge graph rules."""


class MatNotEmptyError(StructureError):
    """Removal of a mat that still contains children."""


class DesignLoadError(ValueError):
    """A design document referencing unknown blocks, ports, or parents."""


class PortRef(NamedTuple):
    instance_id: str
    port_id: str

    @property
    def path(self) -> str:
        return f"instance/{self.instance_id}/port/{self.port_id}"

    def token(self) -> str:
        return f"{self.instance_id}:{self.port_id}"


Edge = tuple[PortRef, PortRef]  # endpoints kept sorted


def make_edge(a: PortRef, b: PortRef) -> Edge:
    return (a, b) if a <= b else (b, a)


def edge_path(edge: Edge) -> str:
    return f"edge/{edge[0].token()}~{edge[1].token()}"


@dataclass
class BlockInstance:
    instance_id: str
    block_id: str
    mat_parent: str | None = None
    supply_setting_mv: int | None = None


@dataclass
class OpOutcome:
    """What one mutation did: whether it applied and the diagnostic delta."""

    applied: bool
    new: list[Diagnostic] = field(default_factory=list)
    retracted: list[Diagnostic] = field(default_factory=list)
    instance_id: str | None = None
    message: str | None = None


_GENERATED_ID_RE = re.compile(r"^i(\d+)$")


class Design:
    """One editable design: instances, edges, placements, live diagnostics."""

    def __init__(
        self,
        library: BlockLibrary,
        registry: ProtocolRegistry | None = None,
        design_id: str = "d1",
        name: str = "design",
    ):
        self.library = library
        self.registry = registry or library.registry or builtin_registry()
        self.design_id = design_id
        self.name = name or "design"
        self.instances: dict[str, BlockInstance] = {}
        self.edges: set[Edge] = set()
        self.placements: dict[str, Placement] = {}
        self.board = BoardSettings()
        # Live diagnostics, one bucket per independently recheckable subject.
        self._live: dict[tuple, list[Diagnostic]] = {}

    # -- lookups -----------------------------------------------------------

    def block_of(self, instance_id: str) -> BlockDefinition:
        return self.library.get_block(self.instances[instance_id].block_id)

    def _instance(self, instance_id: str) -> BlockInstance:
        inst = self.instances.get(instance_id)
        if inst is None:
            raise NotFoundError(f"no instance {instance_id!r} in design {self.design_id}")
        return inst

    def _port(self, ref: PortRef) -> ProtocolPort:
        return self.block_of(self._instance(ref.instance_id).instance_id).port(ref.port_id)

    def classification(self, instance_id: str) -> BlockClass:
        return self.block_of(instance_id).classification

    def is_mat(self, instance_id: str) -> bool:
        return self.classification(instance_id) in MAT_CLASSES

    def children_of(self, instance_id: str) -> list[str]:
        return sorted(i for i, inst in self.instances.items() if inst.mat_parent == instance_id)

    def subtree(self, instance_id: str) -> list[str]:
        out = [instance_id]
        stack = [instance_id]
        while stack:
            for child in self.children_of(stack.pop()):
                out.append(child)
                stack.append(child)
        return out

    def edges_of_port(self, ref: PortRef) -> list[Edge]:
        return sorted(e for e in self.edges if ref in e)

    def effective_vout(self, mat_instance_id: str) -> VoltageRange:
        """The rail a mat supplies to its children.

        A power block with a supply setting pins the rail to that value;
        otherwise its declared output range stands. Regulators emit their
        own rated output regardless of what feeds them.
        """
        inst = self._instance(mat_instance_id)
        block = self.block_of(mat_instance_id)
        if block.classification not in MAT_CLASSES or block.power_out is None:
            raise StructureError(f"instance {mat_instance_id!r} is not a mat block")
        if block.classification is BlockClass.POWER and inst.supply_setting_mv is not None:
            return VoltageRange(inst.supply_setting_mv, inst.supply_setting_mv)
        return block.power_out

    # -- per-subject check functions (shared by live and batch paths) ------

    def _voltage_diags(self, instance_id: str) -> list[Diagnostic]:
        inst = self.instances.get(instance_id)
        if inst is None or inst.mat_parent is None:
            return []
        block = self.block_of(instance_id)
        if block.power_in is None:
            return []
        rail = self.effective_vout(inst.mat_parent)
        diag = voltage_check(block.power_in, rail, f"instance/{instance_id}")
        return [diag] if diag else []

    def _required_diags(self, instance_id: str, port_id: str) -> list[Diagnostic]:
        inst = self.instances.get(instance_id)
        if inst is None:
            return []
        block = self.block_of(instance_id)
        if block.classification not in GENERAL_CLASSES:
            return []
        try:
            port = block.port(port_id)
        except NotFoundError:
            return []
        ref = PortRef(instance_id, port_id)
        return required_check([(ref.path, port.protocol, port.optional_flag, len(self.edges_of_port(ref)))])

    def edge_protocols(self, edge: Edge) -> tuple[str, str]:
        return (self._port(edge[0]).protocol, self._port(edge[1]).protocol)

    def _edge_proto_diags(self, edge: Edge) -> list[Diagnostic]:
        if edge not in self.edges:
            return []
        proto_a, proto_b = self.edge_protocols(edge)
        diag = protocol_match(proto_a, proto_b, edge_path(edge))
        return [diag] if diag else []

    def bus_components(self, protocol: str) -> list[BusComponent]:
        """Edge-connected components of one protocol's wired ports."""
        proto_edges: list[Edge] = []
        for edge in self.edges:
            pa, pb = self.edge_protocols(edge)
            if pa == protocol and pb == protocol:
                proto_edges.append(edge)
        parent: dict[PortRef, PortRef] = {}

        def find(x: PortRef) -> PortRef:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in proto_edges:
            parent.setdefault(a, a)
            parent.setdefault(b, b)
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        groups: dict[PortRef, list[Edge]] = {}
        for edge in proto_edges:
            groups.setdefault(find(edge[0]), []).append(edge)
        components: list[BusComponent] = []
        for root in sorted(groups):
            edges = sorted(groups[root])
            member_refs = sorted({ref for e in edges for ref in e})
            members = []
            for ref in member_refs:
                block = self.block_of(ref.instance_id)
                port = block.port(ref.port_id)
                members.append(
                    BusPort(
                        instance_id=ref.instance_id,
                        port_id=ref.port_id,
                        block_class=block.classification,
                        addr=port.addr,
                        role=port.role,
                        level=port.level,
                        edge_count=len([e for e in edges if ref in e]),
                    )
                )
            components.append(
                BusComponent(
                    protocol=protocol,
                    members=tuple(members),
                    edges=tuple((e[0].path, e[1].path) for e in edges),
                )
            )
        return components

    def _bus_diags(self, protocol: str) -> list[Diagnostic]:
        diags: list[Diagnostic] = []
        for component in self.bus_components(protocol):
            diags.extend(bus_check(component, self.registry))
        return diags

    def _bound_diags(self, instance_id: str) -> list[Diagnostic]:
        placement = self.placements.get(instance_id)
        if placement is None or instance_id not in self.instances:
            return []
        diag = board_geometry.boundary_diagnostic(
            instance_id, self.block_of(instance_id).footprint, placement, self.board
        )
        return [diag] if diag else []

    def _pair_diags(self, id_a: str, id_b: str) -> list[Diagnostic]:
        if id_a not in self.placements or id_b not in self.placements:
            return []
        if id_a not in self.instances or id_b not in self.instances:
            return []
        rect_a = board_geometry.placed_rect(self.block_of(id_a).footprint, self.placements[id_a])
        rect_b = board_geometry.placed_rect(self.block_of(id_b).footprint, self.placements[id_b])
        diag = board_geometry.overlap_diagnostic(id_a, rect_a, id_b, rect_b)
        return [diag] if diag else []

    # -- live bookkeeping ---------------------------------------------------

    def _recompute(self, key: tuple) -> list[Diagnostic]:
        domain = key[0]
        if domain == "voltage":
            return self._voltage_diags(key[1])
        if domain == "required":
            return self._required_diags(key[1], key[2])
        if domain == "bus":
            return self._bus_diags(key[1])
        if domain == "edgeproto":
            return self._edge_proto_diags(key[1])
        if domain == "bound":
            return self._bound_diags(key[1])
        if domain == "pair":
            return self._pair_diags(key[1], key[2])
        raise AssertionError(f"unknown domain {domain}")

    def _flush(self, dirty: Iterable[tuple]) -> None:
        for key in sorted(set(dirty)):
            diags = self._recompute(key)
            if diags:
                self._live[key] = diags
            else:
                self._live.pop(key, None)

    def _snapshot(self) -> set[Diagnostic]:
        return {d for bucket in self._live.values() for d in bucket}

    def _outcome(self, before: set[Diagnostic], applied: bool = True, **kw) -> OpOutcome:
        after = self._snapshot()
        return OpOutcome(
            applied=applied,
            new=sort_diagnostics(list(after - before)),
            retracted=sort_diagnostics(list(before - after)),
            **kw,
        )

    def live_diagnostics(self) -> list[Diagnostic]:
        return sort_diagnostics([d for bucket in self._live.values() for d in bucket])

    # -- batch oracle --------------------------------------------------------

    def _all_keys(self) -> set[tuple]:
        keys: set[tuple] = set()
        for instance_id in self.instances:
            keys.add(("voltage", instance_id))
            block = self.block_of(instance_id)
            if block.classification in GENERAL_CLASSES:
                for port in block.ports:
                    keys.add(("required", instance_id, port.port_id))
        protocols: set[str] = set()
        for edge in self.edges:
            keys.add(("edgeproto", edge))
            pa, pb = self.edge_protocols(edge)
            protocols.update((pa, pb))
        for protocol in protocols:
            keys.add(("bus", protocol))
        placed = sorted(self.placements)
        for instance_id in placed:
            keys.add(("bound", instance_id))
        for i, id_a in enumerate(placed):
            for id_b in placed[i + 1 :]:
                keys.add(("pair", id_a, id_b))
        return keys

    def check_design(self) -> list[Diagnostic]:
        """Full recomputation of every check family, sorted by subject then kind."""
        diags: list[Diagnostic] = []
        for key in self._all_keys():
            diags.extend(self._recompute(key))
        return sort_diagnostics(diags)

    def rebuild_live(self) -> None:
        """Recompute the live set from scratch (used after loading a document)."""
        self._live = {}
        self._flush(self._all_keys())

    # -- mutations -----------------------------------------------------------

    def _next_instance_id(self) -> str:
        highest = 0
        for instance_id in self.instances:
            m = _GENERATED_ID_RE.match(instance_id)
            if m:
                highest = max(highest, int(m.group(1)))
        return f"i{highest + 1}"

    def add_instance(
        self, block_id: str, mat_parent: str | None = None, instance_id: str | None = None
    ) -> OpOutcome:
        """Add one block instance; non-power blocks must land on a mat and are
        immediately voltage-checked against that mat's rail."""
        block = self.library.get_block(block_id)
        if block.classification is BlockClass.POWER:
            if mat_parent is not None:
                raise StructureError("power blocks are roots and cannot sit on a mat")
        else:
            if mat_parent is None:
                raise StructureError(f"{block.classification.value} blocks must be placed on a mat")
            parent = self._instance(mat_parent)
            if not self.is_mat(parent.instance_id):
                raise StructureError(f"instance {mat_parent!r} is a general block, not a mat")
        if instance_id is None:
            instance_id = self._next_instance_id()
        elif instance_id in self.instances:
            raise StructureError(f"instance id {instance_id!r} already in use")
        before = self._snapshot()
        self.instances[instance_id] = BlockInstance(
            instance_id=instance_id, block_id=block_id, mat_parent=mat_parent
        )
        dirty: list[tuple] = [("voltage", instance_id)]
        if block.classification in GENERAL_CLASSES:
            dirty += [("required", instance_id, p.port_id) for p in block.ports]
        self._flush(dirty)
        return self._outcome(before, instance_id=instance_id)

    def remove_instance(self, instance_id: str) -> OpOutcome:
        inst = self._instance(instance_id)
        if self.is_mat(instance_id) and self.children_of(instance_id):
            raise MatNotEmptyError(f"mat {instance_id!r} still contains blocks")
        before = self._snapshot()
        dead_edges = sorted(e for e in self.edges if e[0].instance_id == instance_id or e[1].instance_id == instance_id)
        dirty: list[tuple] = [("voltage", instance_id), ("bound", instance_id)]
        for edge in dead_edges:
            dirty.append(("edgeproto", edge))
            pa, pb = self.edge_protocols(edge)
            dirty += [("bus", pa), ("bus", pb)]
            for ref in edge:
                dirty.append(("required", ref.instance_id, ref.port_id))
        block = self.block_of(instance_id)
        if block.classification in GENERAL_CLASSES:
            dirty += [("required", instance_id, p.port_id) for p in block.ports]
        for key in list(self._live):
            if key[0] == "pair" and instance_id in key[1:]:
                dirty.append(key)
        self.edges -= set(dead_edges)
        self.placements.pop(instance_id, None)
        del self.instances[instance_id]
        self._flush(dirty)
        return self._outcome(before)

    def reparent(self, instance_id: str, new_mat: str) -> OpOutcome:
        inst = self._instance(instance_id)
        if self.classification(instance_id) is BlockClass.POWER:
            raise StructureError("power blocks are roots and cannot be reparented")
        parent = self._instance(new_mat)
        if not self.is_mat(new_mat):
            raise StructureError(f"instance {new_mat!r} is a general block, not a mat")
        if new_mat in self.subtree(instance_id):
            raise StructureError("reparenting would create a containment cycle")
        before = self._snapshot()
        inst.mat_parent = new_mat
        self._flush(("voltage", i) for i in self.subtree(instance_id))
        return self._outcome(before)

    def set_supply(self, instance_id: str, mv: int | None) -> OpOutcome:
        inst = self._instance(instance_id)
        block = self.block_of(instance_id)
        if block.classification is not BlockClass.POWER:
            raise StructureError("supply settings apply to power blocks only")
        if mv is not None:
            assert block.power_out is not None
            if not (block.power_out.min_mv <= mv <= block.power_out.max_mv):
                raise StructureError(
                    f"supply {mv} mV outside the block output range "
                    f"{block.power_out.min_mv}..{block.power_out.max_mv} mV"
                )
        before = self._snapshot()
        inst.supply_setting_mv = mv
        self._flush(("voltage", i) for i in self.subtree(instance_id))
        return self._outcome(before)

    def connect(self, a: PortRef | tuple[str, str], b: PortRef | tuple[str, str]) -> OpOutcome:
        """Wire two protocol ports. A protocol mismatch rejects the edge
        outright; bus-attribute conflicts keep the edge and flag it."""
        ref_a, ref_b = PortRef(*a), PortRef(*b)
        for ref in (ref_a, ref_b):
            self._instance(ref.instance_id)
            if self.classification(ref.instance_id) not in GENERAL_CLASSES:
                raise StructureError(f"{ref.path} belongs to a mat block; only general blocks take edges")
        port_a, port_b = self._port(ref_a), self._port(ref_b)
        if ref_a == ref_b:
            raise StructureError("cannot connect a port to itself")
        edge = make_edge(ref_a, ref_b)
        if edge in self.edges:
            raise StructureError(f"{edge_path(edge)} already exists")
        mismatch = protocol_match(port_a.protocol, port_b.protocol, edge_path(edge))
        if mismatch:
            return OpOutcome(applied=False, new=[mismatch], message=mismatch.message)
        before = self._snapshot()
        self.edges.add(edge)
        self._flush(
            [
                ("bus", port_a.protocol),
                ("required", ref_a.instance_id, ref_a.port_id),
                ("required", ref_b.instance_id, ref_b.port_id),
            ]
        )
        return self._outcome(before)

    def disconnect(self, a: PortRef | tuple[str, str], b: PortRef | tuple[str, str]) -> OpOutcome:
        edge = make_edge(PortRef(*a), PortRef(*b))
        if edge not in self.edges:
            raise NotFoundError(f"{edge_path(edge)} does not exist")
        before = self._snapshot()
        pa, pb = self.edge_protocols(edge)
        self.edges.discard(edge)
        self._flush(
            [
                ("edgeproto", edge),
                ("bus", pa),
                ("bus", pb),
                ("required", edge[0].instance_id, edge[0].port_id),
                ("required", edge[1].instance_id, edge[1].port_id),
            ]
        )
        return self._outcome(before)

    def place(self, instance_id: str, x_mm: float, y_mm: float, rot: int = 0) -> OpOutcome:
        self._instance(instance_id)
        try:
            placement = Placement(x_mm, y_mm, rot)
        except ValueError as exc:
            raise StructureError(str(exc)) from None
        before = self._snapshot()
        self.placements[instance_id] = placement
        dirty: list[tuple] = [("bound", instance_id)]
        for other in self.placements:
            if other != instance_id:
                dirty.append(("pair",) + tuple(sorted((instance_id, other))))
        self._flush(dirty)
        return self._outcome(before)

    def set_board(self, w_mm: float, h_mm: float, pitch_mm: float | None = None) -> OpOutcome:
        if w_mm <= 0 or h_mm <= 0 or (pitch_mm is not None and pitch_mm <= 0):
            raise StructureError("board dimensions and pitch must be positive")
        before = self._snapshot()
        self.board = BoardSettings(w_mm, h_mm, pitch_mm if pitch_mm is not None else self.board.pitch_mm)
        self._flush(("bound", i) for i in self.placements)
        return self._outcome(before)

    # -- op dispatch (service, logs, replay) ----------------------------------

    def apply_op(self, op: dict) -> OpOutcome:
        """Apply one wire-format mutation; structure violations come back as
        applied=False instead of raising (unknown ids still raise NotFound)."""
        kind = op.get("kind")
        try:
            if kind == "add_instance":
                return self.add_instance(op["block"], op.get("parent"), op.get("instance_id"))
            if kind == "remove_instance":
                return self.remove_instance(op["instance"])
            if kind == "reparent":
                return self.reparent(op["instance"], op["parent"])
            if kind == "set_supply":
                return self.set_supply(op["instance"], op.get("mv"))
            if kind == "connect":
                return self.connect(tuple(op["a"]), tuple(op["b"]))
            if kind == "disconnect":
                return self.disconnect(tuple(op["a"]), tuple(op["b"]))
            if kind == "place":
                return self.place(op["instance"], float(op["x_mm"]), float(op["y_mm"]), int(op.get("rot", 0)))
            if kind == "set_board":
                return self.set_board(float(op["w_mm"]), float(op["h_mm"]),
                                      float(op["pitch_mm"]) if op.get("pitch_mm") is not None else None)
        except StructureError as exc:
            return OpOutcome(applied=False, message=str(exc))
        except KeyError as exc:
            if isinstance(exc, NotFoundError):
                raise
            raise StructureError(f"malformed op: missing field {exc}") from None
        raise StructureError(f"unknown op kind {kind!r}")

    # -- structural audit (used by the property tests) -------------------------

    def validate_invariants(self) -> None:
        for instance_id, inst in self.instances.items():
            block = self.block_of(instance_id)
            if block.classification is BlockClass.POWER:
                assert inst.mat_parent is None, f"{instance_id}: power block with a parent"
            else:
                assert inst.mat_parent in self.instances, f"{instance_id}: missing mat parent"
            if inst.supply_setting_mv is not None:
                assert block.power_out is not None
                assert block.power_out.min_mv <= inst.supply_setting_mv <= block.power_out.max_mv
            seen = {instance_id}
            walk = inst
            while walk.mat_parent is not None:
                assert walk.mat_parent not in seen, f"{instance_id}: containment cycle"
                seen.add(walk.mat_parent)
                walk = self.instances[walk.mat_parent]
            assert self.block_of(walk.instance_id).classification is BlockClass.POWER, (
                f"{instance_id}: containment chain does not end at a power block"
            )
        for edge in self.edges:
            assert edge[0] != edge[1]
            assert edge == make_edge(*edge)
            for ref in edge:
                assert self.classification(ref.instance_id) in GENERAL_CLASSES
                self._port(ref)
        for diag in self.live_diagnostics():
            assert self._subject_resolves(diag.subject), f"dangling diagnostic subject {diag.subject}"

    def _subject_resolves(self, subject: str) -> bool:
        parts = subject.split("/")
        if parts[0] == "instance":
            if parts[1] not in self.instances:
                return False
            if len(parts) == 2:
                return True
            if parts[2] == "port":
                try:
                    self.block_of(parts[1]).port(parts[3])
                    return True
                except NotFoundError:
                    return False
            if parts[2] == "placement":
                return parts[1] in self.placements
            return False
        if parts[0] == "edge":
            tokens = parts[1].split("~")
            refs = [PortRef(*t.split(":", 1)) for t in tokens]
            return make_edge(*refs) in self.edges
        return False

    # -- document round-trip ----------------------------------------------------

    def to_document(self) -> dict:
        instances = []
        for instance_id in sorted(self.instances):
            inst = self.instances[instance_id]
            row: dict = {"id": inst.instance_id, "block": inst.block_id}
            if inst.mat_parent is not None:
                row["parent"] = inst.mat_parent
            if inst.supply_setting_mv is not None:
                row["supply_mv"] = inst.supply_setting_mv
            instances.append(row)
        edges = sorted([e[0].instance_id, e[0].port_id, e[1].instance_id, e[1].port_id] for e in self.edges)
        placements = {
            instance_id: {"x_mm": p.x_mm, "y_mm": p.y_mm, "rot": p.rot}
            for instance_id, p in sorted(self.placements.items())
        }
        return {
            "design": {"id": self.design_id, "name": self.name},
            "instances": instances,
            "edges": edges,
            "placements": placements,
            "board": {"w_mm": self.board.w_mm, "h_mm": self.board.h_mm, "pitch_mm": self.board.pitch_mm},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


_design_counter = count(1)


def new_design(
    library: BlockLibrary,
    name: str = "",
    registry: ProtocolRegistry | None = None,
    design_id: str | None = None,
) -> Design:
    if design_id is None:
        design_id = f"d{next(_design_counter)}"
    return Design(library, registry=registry, design_id=design_id, name=name or "design")


def load_design(
    document: dict | str,
    library: BlockLibrary,
    registry: ProtocolRegistry | None = None,
) -> Design:
    """Rebuild a design from its document; referential problems raise
    DesignLoadError, connection problems become live diagnostics."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise DesignLoadError(f"design document is not valid JSON: {exc}") from exc
    try:
        head = document["design"]
        design = Design(library, registry=registry, design_id=str(head["id"]), name=str(head.get("name", "design")))
        rows = document.get("instances", [])
        for row in rows:
            if row["block"] not in library:
                raise DesignLoadError(f"instance {row['id']!r} references unknown block {row['block']!r}")
        by_id = {row["id"]: row for row in rows}
        for row in rows:
            inst = BlockInstance(
                instance_id=str(row["id"]),
                block_id=str(row["block"]),
                mat_parent=row.get("parent"),
                supply_setting_mv=row.get("supply_mv"),
            )
            if inst.mat_parent is not None and inst.mat_parent not in by_id:
                raise DesignLoadError(f"instance {inst.instance_id!r} references unknown parent {inst.mat_parent!r}")
            design.instances[inst.instance_id] = inst
        for quad in document.get("edges", []):
            a = PortRef(str(quad[0]), str(quad[1]))
            b = PortRef(str(quad[2]), str(quad[3]))
            for ref in (a, b):
                if ref.instance_id not in design.instances:
                    raise DesignLoadError(f"edge references unknown instance {ref.instance_id!r}")
                design._port(ref)
            design.edges.add(make_edge(a, b))
        for instance_id, p in document.get("placements", {}).items():
            if instance_id not in design.instances:
                raise DesignLoadError(f"placement references unknown instance {instance_id!r}")
            design.placements[instance_id] = Placement(float(p["x_mm"]), float(p["y_mm"]), int(p.get("rot", 0)))
        if "board" in document:
            b = document["board"]
            design.board = BoardSettings(float(b["w_mm"]), float(b["h_mm"]), float(b.get("pitch_mm", 0.5)))
    except (KeyError, TypeError, ValueError, NotFoundError) as exc:
        if isinstance(exc, DesignLoadError):
            raise
        raise DesignLoadError(f"malformed design document: {exc!r}") from exc
    problem = _structure_problem(design)
    if problem:
        raise DesignLoadError(problem)
    design.rebuild_live()
    return design


def _structure_problem(design: Design) -> str | None:
    """First mat-forest or edge-graph violation in a loaded document, if any.

    Protocol mismatches on edges are tolerated here; they surface as
    diagnostics instead so `check` can report hand-written mistakes.
    """
    for instance_id, inst in design.instances.items():
        block = design.block_of(instance_id)
        if block.classification is BlockClass.POWER:
            if inst.mat_parent is not None:
                return f"instance {instance_id!r}: power blocks cannot have a parent"
        else:
            if inst.mat_parent is None:
                return f"instance {instance_id!r}: {block.classification.value} blocks need a mat parent"
            if not design.is_mat(inst.mat_parent):
                return f"instance {instance_id!r}: parent {inst.mat_parent!r} is not a mat block"
        if inst.supply_setting_mv is not None:
            if block.classification is not BlockClass.POWER:
                return f"instance {instance_id!r}: supply settings apply to power blocks only"
            out = block.power_out
            assert out is not None
            if not (out.min_mv <= inst.supply_setting_mv <= out.max_mv):
                return f"instance {instance_id!r}: supply {inst.supply_setting_mv} mV outside {out.min_mv}..{out.max_mv}"
        seen = {instance_id}
        walk = inst
        while walk.mat_parent is not None:
            if walk.mat_parent in seen:
                return f"instance {instance_id!r}: containment cycle"
            seen.add(walk.mat_parent)
            walk = design.instances[walk.mat_parent]
    for edge in design.edges:
        if edge[0] == edge[1]:
            return f"{edge_path(edge)}: endpoints are identical"
        for ref in edge:
            if design.classification(ref.instance_id) not in GENERAL_CLASSES:
                return f"{edge_path(edge)}: {ref.path} belongs to a mat block"
    return None


def check_design(design: Design) -> list[Diagnostic]:
    return design.check_design()
