"""Typed schematic block library: import, validate, classify, persist.

A block arrives as a bundle (a ``block.json`` file, a directory holding one,
or a zip archive) whose net labels carry raw annotation text. Import parses
every label, groups protocol nets into ports, classifies the block from its
power signals, cross-checks the footprint, and runs the connectivity-level
sanity checks. Accepted blocks are persisted as canonical bundle JSON so a
re-import is byte-identical.
"""

from __future__ import annotations

import json
import threading
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

from .checkers import ProtocolRegistry, builtin_registry
from .diagnostics import Diagnostic, Kind, Severity, error, sort_diagnostics
from .type_syntax import (
    Annotation,
    BlockClass,
    GlobalAttrs,
    Ground,
    ParseError,
    Plain,
    PowerDecl,
    PowerDirection,
    ProtocolDecl,
    SpiRole,
    VoltageRange,
    parse_annotation,
    parse_global_attrs,
)


class NotFoundError(KeyError):
    """Unknown block id."""


class DuplicateBlockError(ValueError):
    """Import would overwrite an existing block without the overwrite flag."""


class ClassificationError(ValueError):
    """CLASS attribute contradicts the power-signal-derived classification."""


class PortError(ValueError):
    """Protocol nets cannot be grouped into a well-formed port."""


class BundleError(ValueError):
    """The bundle file is not readable as the block bundle format."""


@dataclass(frozen=True)
class NetDecl:
    net_id: str
    label: str
    annotation: Annotation
    pins: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Pad:
    net_id: str
    x_mm: float
    y_mm: float


@dataclass(frozen=True)
class Footprint:
    width_mm: float
    height_mm: float
    pads: tuple[Pad, ...]


@dataclass(frozen=True)
class ProtocolPort:
    """Same-protocol nets presented as one connectable wire."""

    protocol: str
    alt_name: str  # empty string when the port has no alternate name
    signals: dict[str, str]  # signal name -> net_id; "" for unnamed singles
    optional_flag: bool
    addr: int | None = None
    role: SpiRole | None = None
    level: VoltageRange | None = None

    @property
    def port_id(self) -> str:
        return f"{self.protocol}-{self.alt_name}" if self.alt_name else self.protocol


@dataclass(frozen=True)
class BlockDefinition:
    block_id: str
    display_name: str
    nets: tuple[NetDecl, ...]
    power_in: VoltageRange | None
    power_out: VoltageRange | None
    has_ground: bool
    ports: tuple[ProtocolPort, ...]
    classification: BlockClass
    attrs: GlobalAttrs
    footprint: Footprint
    image_ref: str | None = None

    def port(self, port_id: str) -> ProtocolPort:
        for p in self.ports:
            if p.port_id == port_id:
                return p
        raise NotFoundError(f"block {self.block_id} has no port {port_id}")

    def vin_net(self) -> NetDecl | None:
        return next(
            (n for n in self.nets
             if isinstance(n.annotation, PowerDecl) and n.annotation.direction is PowerDirection.VIN),
            None,
        )

    def vout_net(self) -> NetDecl | None:
        return next(
            (n for n in self.nets
             if isinstance(n.annotation, PowerDecl) and n.annotation.direction is PowerDirection.VOUT),
            None,
        )


@dataclass
class ImportReport:
    block_id: str
    accepted: bool
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "block_id": self.block_id,
            "accepted": self.accepted,
            "diagnostics": [d.to_json() for d in self.diagnostics],
        }


def classify(nets: list[NetDecl], attrs: GlobalAttrs) -> BlockClass:
    """Classification from power signals, cross-checked against CLASS.

    VOUT without VIN makes a power block, both make a regulator; otherwise
    the CLASS attribute decides between compute and peripheral, defaulting
    to peripheral for blocks that expose at least one protocol port.
    """
    has_vin = any(
        isinstance(n.annotation, PowerDecl) and n.annotation.direction is PowerDirection.VIN for n in nets
    )
    has_vout = any(
        isinstance(n.annotation, PowerDecl) and n.annotation.direction is PowerDirection.VOUT for n in nets
    )
    derived: BlockClass | None = None
    if has_vout:
        derived = BlockClass.REGULATOR if has_vin else BlockClass.POWER
    declared = attrs.block_class
    if derived is not None:
        if declared is not None and declared is not derived:
            raise ClassificationError(
                f"CLASS={declared.value} contradicts power signals (block is a {derived.value} block)"
            )
        return derived
    if declared is not None:
        if declared in (BlockClass.POWER, BlockClass.REGULATOR):
            raise ClassificationError(f"CLASS={declared.value} requires a VOUT power signal")
        return declared
    if any(isinstance(n.annotation, ProtocolDecl) for n in nets):
        return BlockClass.PERIPHERAL
    raise ClassificationError("cannot classify block: no power output, no CLASS attribute, no protocol nets")


def derive_ports(
    nets: list[NetDecl], attrs: GlobalAttrs, registry: ProtocolRegistry | None = None
) -> list[ProtocolPort]:
    """Group protocol nets by (protocol, alternate name) into ports.

    The signal set of every port must match the registry's declared set for
    its protocol; optional flags must be uniform across the port's nets.
    """
    registry = registry or builtin_registry()
    groups: dict[tuple[str, str], list[NetDecl]] = {}
    for net in nets:
        if isinstance(net.annotation, ProtocolDecl):
            decl = net.annotation
            groups.setdefault((decl.protocol, decl.alt_name or ""), []).append(net)
    ports: list[ProtocolPort] = []
    for (protocol, alt), members in sorted(groups.items()):
        shown = f"{protocol}-{alt}" if alt else protocol
        spec = registry.get(protocol)
        if spec is None:
            raise PortError(f"port {shown}: protocol {protocol} is not in the registry")
        signals: dict[str, str] = {}
        levels: list[VoltageRange] = []
        flags: set[bool] = set()
        for net in members:
            decl = net.annotation
            assert isinstance(decl, ProtocolDecl)
            name = decl.signal or ""
            if name in signals:
                raise PortError(f"port {shown}: duplicate signal {name or '(unnamed)'}")
            signals[name] = net.net_id
            flags.add(decl.optional_flag)
            if decl.level:
                levels.append(decl.level)
        if len(flags) > 1:
            raise PortError(f"port {shown}: mixed optional flags across signals")
        declared = set(signals)
        expected = set(spec.signals)
        if declared != expected:
            missing = sorted(expected - declared)
            extra = sorted(declared - expected)
            bits = []
            if missing:
                bits.append("missing " + ", ".join(s or "(unnamed)" for s in missing))
            if extra:
                bits.append("unexpected " + ", ".join(s or "(unnamed)" for s in extra))
            raise PortError(f"port {shown}: signal set does not match {protocol} ({'; '.join(bits)})")
        level = None
        if levels:
            lo = max(r.min_mv for r in levels)
            hi = min(r.max_mv for r in levels)
            if lo <= hi:
                level = VoltageRange(lo, hi)
        ports.append(
            ProtocolPort(
                protocol=protocol,
                alt_name=alt,
                signals={s: signals[s] for s in spec.signals},
                optional_flag=flags.pop(),
                addr=attrs.i2c_addr.get(alt) if protocol == "I2C" else None,
                role=attrs.spi_role.get(alt) if protocol == "SPI" else None,
                level=level,
            )
        )
    return ports


def _read_bundle_document(bundle_file: str | Path) -> dict:
    path = Path(bundle_file)
    try:
        if path.is_dir():
            inner = path / "block.json"
            if not inner.is_file():
                raise BundleError(f"{path}: bundle directory has no block.json")
            return json.loads(inner.read_text(encoding="utf-8"))
        if path.suffix == ".zip":
            with zipfile.ZipFile(path) as zf:
                names = [n for n in zf.namelist() if Path(n).name == "block.json"]
                if not names:
                    raise BundleError(f"{path}: archive has no block.json")
                return json.loads(zf.read(names[0]).decode("utf-8"))
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, zipfile.BadZipFile) as exc:
        raise BundleError(f"{path}: {exc}") from exc


def parse_bundle_document(doc: dict) -> dict:
    """Normalize a raw bundle document; raises BundleError on shape problems."""
    try:
        out = {
            "id": str(doc["id"]),
            "name": str(doc.get("name", doc["id"])),
            "nets": [
                {
                    "id": str(n["id"]),
                    "label": str(n["label"]),
                    "pins": [[str(r), str(p)] for r, p in n.get("pins", [])],
                }
                for n in doc["nets"]
            ],
            "attrs": str(doc.get("attrs", "#{}")),
            "footprint": {
                "w_mm": float(doc["footprint"]["w_mm"]),
                "h_mm": float(doc["footprint"]["h_mm"]),
                "pads": [
                    {"net": str(p["net"]), "x_mm": float(p["x_mm"]), "y_mm": float(p["y_mm"])}
                    for p in doc["footprint"].get("pads", [])
                ],
            },
            "image": doc.get("image"),
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"malformed bundle document: {exc!r}") from exc
    if not out["id"]:
        raise BundleError("bundle id must be nonempty")
    return out


def build_definition(
    doc: dict, registry: ProtocolRegistry | None = None
) -> tuple[BlockDefinition | None, list[Diagnostic]]:
    """Validate one normalized bundle document into a BlockDefinition.

    Returns the definition (None when rejected) and all diagnostics; the
    block is accepted iff no Error-severity diagnostic was raised.
    """
    registry = registry or builtin_registry()
    diags: list[Diagnostic] = []
    block_id = doc["id"]

    attrs = GlobalAttrs()
    try:
        attrs = parse_global_attrs(doc["attrs"])
    except ParseError as exc:
        diags.append(error(Kind.SYNTAX_ERROR, "attrs", str(exc)))

    nets: list[NetDecl] = []
    seen_ids: set[str] = set()
    seen_pins: dict[tuple[str, str], str] = {}
    for raw in doc["nets"]:
        net_id = raw["id"]
        subject = f"net/{net_id}"
        if net_id in seen_ids:
            diags.append(error(Kind.PORT_ERROR, subject, f"duplicate net id {net_id!r}"))
            continue
        seen_ids.add(net_id)
        try:
            annotation = parse_annotation(raw["label"])
        except ParseError as exc:
            diags.append(error(Kind.SYNTAX_ERROR, subject, f"label {raw['label']!r}: {exc}"))
            continue
        pins = tuple((r, p) for r, p in raw["pins"])
        for pin in pins:
            owner = seen_pins.setdefault(pin, net_id)
            if owner != net_id:
                diags.append(
                    error(Kind.PORT_ERROR, subject, f"pin {pin[0]}.{pin[1]} already belongs to net {owner!r}")
                )
        if not pins and not isinstance(annotation, Plain):
            diags.append(error(Kind.PORT_ERROR, subject, "annotated net has no pins"))
        nets.append(NetDecl(net_id=net_id, label=raw["label"], annotation=annotation, pins=pins))

    vin_ranges = [n.annotation.range for n in nets
                  if isinstance(n.annotation, PowerDecl) and n.annotation.direction is PowerDirection.VIN]
    vout_ranges = [n.annotation.range for n in nets
                   if isinstance(n.annotation, PowerDecl) and n.annotation.direction is PowerDirection.VOUT]
    if len(vin_ranges) > 1:
        diags.append(error(Kind.CLASSIFICATION_ERROR, "block", "multi-rail blocks (more than one VIN) are not supported"))
    if len(vout_ranges) > 1:
        diags.append(error(Kind.CLASSIFICATION_ERROR, "block", "multi-rail blocks (more than one VOUT) are not supported"))

    classification: BlockClass | None = None
    try:
        classification = classify(nets, attrs)
    except ClassificationError as exc:
        diags.append(error(Kind.CLASSIFICATION_ERROR, "block", str(exc)))

    ports: list[ProtocolPort] = []
    try:
        ports = derive_ports(nets, attrs, registry)
    except PortError as exc:
        diags.append(error(Kind.PORT_ERROR, "block", str(exc)))

    has_ground = any(isinstance(n.annotation, Ground) for n in nets)
    if classification is not None and classification is not BlockClass.POWER and not has_ground:
        diags.append(error(Kind.PORT_ERROR, "block", "block must declare a GND net"))

    fp_doc = doc["footprint"]
    pads: list[Pad] = []
    net_ids = {n.net_id for n in nets}
    w, h = fp_doc["w_mm"], fp_doc["h_mm"]
    if w <= 0 or h <= 0:
        diags.append(error(Kind.PAD_NET_MISMATCH, "footprint", f"footprint must be positive, got {w}x{h} mm"))
    for i, p in enumerate(fp_doc["pads"]):
        subject = f"footprint/pad/{i}"
        if p["net"] not in net_ids:
            diags.append(error(Kind.PAD_NET_MISMATCH, subject, f"pad references unknown net {p['net']!r}"))
        if not (0 <= p["x_mm"] <= w and 0 <= p["y_mm"] <= h):
            diags.append(
                error(Kind.PAD_NET_MISMATCH, subject,
                      f"pad at ({p['x_mm']}, {p['y_mm']}) lies outside the {w}x{h} mm footprint")
            )
        pads.append(Pad(net_id=p["net"], x_mm=p["x_mm"], y_mm=p["y_mm"]))

    diags = sort_diagnostics(diags)
    if any(d.severity is Severity.ERROR for d in diags):
        return None, diags

    assert classification is not None
    definition = BlockDefinition(
        block_id=block_id,
        display_name=doc["name"],
        nets=tuple(nets),
        power_in=vin_ranges[0] if vin_ranges else None,
        power_out=vout_ranges[0] if vout_ranges else None,
        has_ground=has_ground,
        ports=tuple(ports),
        classification=classification,
        attrs=attrs,
        footprint=Footprint(width_mm=w, height_mm=h, pads=tuple(pads)),
        image_ref=doc.get("image"),
    )
    return definition, diags


def canonical_bundle_text(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


class BlockLibrary:
    """Single-writer, multi-reader catalog of accepted block definitions.

    With a root directory the catalog is file-backed (one canonical bundle
    JSON per block); without one it is memory-only.
    """

    def __init__(self, root: str | Path | None = None, registry: ProtocolRegistry | None = None):
        self.registry = registry or builtin_registry()
        self.root = Path(root) if root is not None else None
        self._blocks: dict[str, BlockDefinition] = {}
        self._docs: dict[str, dict] = {}
        self._write_lock = threading.Lock()
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            for path in sorted(self.root.glob("*.json")):
                doc = parse_bundle_document(json.loads(path.read_text(encoding="utf-8")))
                definition, _ = build_definition(doc, self.registry)
                if definition is not None:
                    self._blocks[definition.block_id] = definition
                    self._docs[definition.block_id] = doc

    def validate_bundle(self, bundle_file: str | Path) -> tuple[BlockDefinition | None, ImportReport]:
        """Run all import checks without persisting anything."""
        try:
            doc = parse_bundle_document(_read_bundle_document(bundle_file))
        except BundleError as exc:
            diag = error(Kind.SYNTAX_ERROR, "bundle", str(exc))
            return None, ImportReport(block_id=str(bundle_file), accepted=False, diagnostics=[diag])
        definition, diags = build_definition(doc, self.registry)
        report = ImportReport(block_id=doc["id"], accepted=definition is not None, diagnostics=diags)
        return definition, report

    def _import_normalized(self, doc: dict, overwrite: bool) -> tuple[BlockDefinition | None, ImportReport]:
        if doc["id"] in self._blocks and not overwrite:
            raise DuplicateBlockError(f"block {doc['id']!r} already exists (use overwrite)")
        definition, diags = build_definition(doc, self.registry)
        report = ImportReport(block_id=doc["id"], accepted=definition is not None, diagnostics=diags)
        if definition is None:
            return None, report
        self._blocks[definition.block_id] = definition
        self._docs[definition.block_id] = doc
        if self.root is not None:
            path = self.root / f"{definition.block_id}.json"
            path.write_text(canonical_bundle_text(doc), encoding="utf-8")
        return definition, report

    def import_block(self, bundle_file: str | Path, overwrite: bool = False) -> tuple[BlockDefinition | None, ImportReport]:
        """Validate a bundle and persist it under its block id when accepted."""
        with self._write_lock:
            try:
                doc = parse_bundle_document(_read_bundle_document(bundle_file))
            except BundleError as exc:
                diag = error(Kind.SYNTAX_ERROR, "bundle", str(exc))
                return None, ImportReport(block_id=str(bundle_file), accepted=False, diagnostics=[diag])
            return self._import_normalized(doc, overwrite)

    def import_document(self, doc: dict, overwrite: bool = False) -> tuple[BlockDefinition | None, ImportReport]:
        """Import from an in-memory bundle document (service upload path)."""
        with self._write_lock:
            try:
                doc = parse_bundle_document(doc)
            except BundleError as exc:
                diag = error(Kind.SYNTAX_ERROR, "bundle", str(exc))
                return None, ImportReport(block_id="?", accepted=False, diagnostics=[diag])
            return self._import_normalized(doc, overwrite)

    def get_block(self, block_id: str) -> BlockDefinition:
        try:
            return self._blocks[block_id]
        except KeyError:
            raise NotFoundError(f"no block {block_id!r} in the library") from None

    def get_document(self, block_id: str) -> dict:
        try:
            return self._docs[block_id]
        except KeyError:
            raise NotFoundError(f"no block {block_id!r} in the library") from None

    def list_blocks(self) -> dict[BlockClass, list[BlockDefinition]]:
        """Catalog grouped by classification (the library sidebar grouping)."""
        groups: dict[BlockClass, list[BlockDefinition]] = {c: [] for c in BlockClass}
        for block in sorted(self._blocks.values(), key=lambda b: b.block_id):
            groups[block.classification].append(block)
        return groups

    def remove_block(self, block_id: str) -> None:
        with self._write_lock:
            if block_id not in self._blocks:
                raise NotFoundError(f"no block {block_id!r} in the library")
            del self._blocks[block_id]
            del self._docs[block_id]
            if self.root is not None:
                (self.root / f"{block_id}.json").unlink(missing_ok=True)

    def __contains__(self, block_id: str) -> bool:
        return block_id in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)
