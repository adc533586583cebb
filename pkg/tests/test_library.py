from __future__ import annotations

import json

import pytest

from blockwire.diagnostics import Kind
from blockwire.library import (
    BlockLibrary,
    ClassificationError,
    DuplicateBlockError,
    NetDecl,
    NotFoundError,
    PortError,
    classify,
    derive_ports,
)
from blockwire.type_syntax import BlockClass, GlobalAttrs, SpiRole, parse_annotation, parse_global_attrs

from .conftest import BLOCKS_DIR


def _nets(*labels: str) -> list[NetDecl]:
    return [
        NetDecl(net_id=f"N{i}", label=label, annotation=parse_annotation(label), pins=(("U1", str(i)),))
        for i, label in enumerate(labels, start=1)
    ]


class TestClassify:
    def test_vout_only_is_power(self):
        assert classify(_nets("@VOUT_5V", "GND"), GlobalAttrs()) is BlockClass.POWER

    def test_both_directions_is_regulator(self):
        assert classify(_nets("@VIN_4.5V-12V", "@VOUT_5V", "GND"), GlobalAttrs()) is BlockClass.REGULATOR

    def test_peripheral_by_attribute(self):
        nets = _nets("@VIN_2.7V-5.5V", "#I2C.SDA", "#I2C.SCL", "#GPIO-ALERT!", "GND")
        attrs = parse_global_attrs("#{CLASS=PERIPHERAL, I2C.ADDR=0x18}")
        assert classify(nets, attrs) is BlockClass.PERIPHERAL

    def test_vin_with_ports_defaults_to_peripheral(self):
        nets = _nets("@VIN_2.7V-5.5V", "#GPIO-OUT", "GND")
        assert classify(nets, GlobalAttrs()) is BlockClass.PERIPHERAL

    def test_contradiction_rejected(self):
        with pytest.raises(ClassificationError):
            classify(_nets("@VOUT_5V"), parse_global_attrs("#{CLASS=PERIPHERAL}"))
        with pytest.raises(ClassificationError):
            classify(_nets("@VIN_5V", "@VOUT_3.3V"), parse_global_attrs("#{CLASS=POWER}"))

    def test_unclassifiable_rejected(self):
        with pytest.raises(ClassificationError):
            classify(_nets("@VIN_5V", "GND"), GlobalAttrs())


class TestDerivePorts:
    def test_i2c_groups_into_one_port(self):
        ports = derive_ports(_nets("#I2C.SDA", "#I2C.SCL"), GlobalAttrs())
        assert len(ports) == 1
        assert ports[0].protocol == "I2C"
        assert set(ports[0].signals) == {"SDA", "SCL"}

    def test_gpio_alts_make_separate_ports(self):
        ports = derive_ports(_nets("#GPIO-0", "#GPIO-1"), GlobalAttrs())
        assert [p.port_id for p in ports] == ["GPIO-0", "GPIO-1"]

    def test_missing_signal_rejected(self):
        with pytest.raises(PortError, match="missing SCL"):
            derive_ports(_nets("#I2C.SDA"), GlobalAttrs())

    def test_duplicate_signal_rejected(self):
        nets = _nets("#I2C.SDA", "#I2C.SCL")
        dup = NetDecl("N9", "#I2C.SDA", parse_annotation("#I2C.SDA"), (("U1", "9"),))
        with pytest.raises(PortError, match="duplicate"):
            derive_ports(nets + [dup], GlobalAttrs())

    def test_mixed_optional_flags_rejected(self):
        with pytest.raises(PortError, match="optional"):
            derive_ports(_nets("#I2C.SDA!", "#I2C.SCL"), GlobalAttrs())

    def test_unknown_protocol_rejected(self):
        with pytest.raises(PortError, match="registry"):
            derive_ports(_nets("#UART.TX", "#UART.RX"), GlobalAttrs())

    def test_attrs_resolve_by_alt_scope(self):
        nets = _nets("#I2C.SDA", "#I2C.SCL", "#SPI.SCK", "#SPI.MISO", "#SPI.MOSI")
        attrs = parse_global_attrs("#{I2C.ADDR=0x18, SPI.ROLE=SLAVE}")
        ports = {p.protocol: p for p in derive_ports(nets, attrs)}
        assert ports["I2C"].addr == 0x18
        assert ports["SPI"].role is SpiRole.SLAVE


def _mcp_doc(**overrides) -> dict:
    doc = json.loads((BLOCKS_DIR / "mcp9808.json").read_text())
    doc.update(overrides)
    return doc


class TestImport:
    def test_fixture_corpus_accepted(self):
        lib = BlockLibrary()
        for path in sorted(BLOCKS_DIR.glob("*.json")):
            _, report = lib.import_block(path)
            assert report.accepted, (path.name, [d.message for d in report.diagnostics])
        assert len(lib) == 10

    def test_mcp9808_clean(self, tmp_path):
        lib = BlockLibrary()
        definition, report = lib.import_block(BLOCKS_DIR / "mcp9808.json")
        assert report.accepted and not report.diagnostics
        assert definition.classification is BlockClass.PERIPHERAL
        assert definition.footprint.width_mm == 5.0
        assert len(definition.footprint.pads) == 4
        i2c = definition.port("I2C")
        assert i2c.addr == 0x18 and not i2c.optional_flag
        alert = definition.port("GPIO-ALERT")
        assert alert.optional_flag

    def test_pad_referencing_unknown_net_rejected(self, tmp_path):
        doc = _mcp_doc()
        doc["footprint"]["pads"][0]["net"] = "SDAA"
        bundle = tmp_path / "block.json"
        bundle.write_text(json.dumps(doc))
        lib = BlockLibrary()
        _, report = lib.import_block(bundle)
        assert not report.accepted
        assert any(d.kind is Kind.PAD_NET_MISMATCH for d in report.diagnostics)

    def test_bad_label_rejected_at_that_net(self, tmp_path):
        doc = _mcp_doc()
        doc["nets"][2]["label"] = "#I2C,SDA"
        bundle = tmp_path / "block.json"
        bundle.write_text(json.dumps(doc))
        _, report = BlockLibrary().import_block(bundle)
        assert not report.accepted
        syntax = [d for d in report.diagnostics if d.kind is Kind.SYNTAX_ERROR]
        assert syntax and syntax[0].subject == f"net/{doc['nets'][2]['id']}"

    def test_missing_ground_rejected(self, tmp_path):
        doc = _mcp_doc()
        doc["nets"] = [n for n in doc["nets"] if n["id"] != "GND"]
        doc["footprint"]["pads"] = [p for p in doc["footprint"]["pads"] if p["net"] != "GND"]
        bundle = tmp_path / "block.json"
        bundle.write_text(json.dumps(doc))
        _, report = BlockLibrary().import_block(bundle)
        assert not report.accepted
        assert any("GND" in d.message for d in report.diagnostics)

    def test_multi_rail_rejected(self, tmp_path):
        doc = _mcp_doc()
        doc["nets"].append({"id": "VIN2", "label": "@VIN_3V-6V", "pins": [["U9", "1"]]})
        bundle = tmp_path / "block.json"
        bundle.write_text(json.dumps(doc))
        _, report = BlockLibrary().import_block(bundle)
        assert not report.accepted
        assert any("multi-rail" in d.message for d in report.diagnostics)

    def test_garbage_file_reports_syntax(self, tmp_path):
        bundle = tmp_path / "block.json"
        bundle.write_text("{not json")
        _, report = BlockLibrary().import_block(bundle)
        assert not report.accepted
        assert report.diagnostics[0].kind is Kind.SYNTAX_ERROR

    def test_zip_and_directory_bundles(self, tmp_path):
        import zipfile

        bundle_dir = tmp_path / "mcp"
        bundle_dir.mkdir()
        (bundle_dir / "block.json").write_text(json.dumps(_mcp_doc(id="mcp_dir")))
        archive = tmp_path / "mcp.zip"
        with zipfile.ZipFile(archive, "w") as zf:
            zf.writestr("block.json", json.dumps(_mcp_doc(id="mcp_zip")))
        lib = BlockLibrary()
        assert lib.import_block(bundle_dir)[1].accepted
        assert lib.import_block(archive)[1].accepted
        assert {"mcp_dir", "mcp_zip"} <= set(b.block_id for g in lib.list_blocks().values() for b in g)


class TestStore:
    def test_get_after_import(self):
        lib = BlockLibrary()
        lib.import_block(BLOCKS_DIR / "mcp9808.json")
        assert lib.get_block("mcp9808").block_id == "mcp9808"

    def test_get_unknown_raises(self):
        with pytest.raises(NotFoundError):
            BlockLibrary().get_block("nope")

    def test_duplicate_requires_overwrite(self):
        lib = BlockLibrary()
        lib.import_block(BLOCKS_DIR / "mcp9808.json")
        with pytest.raises(DuplicateBlockError):
            lib.import_block(BLOCKS_DIR / "mcp9808.json")
        _, report = lib.import_block(BLOCKS_DIR / "mcp9808.json", overwrite=True)
        assert report.accepted

    def test_remove(self):
        lib = BlockLibrary()
        lib.import_block(BLOCKS_DIR / "mcp9808.json")
        lib.remove_block("mcp9808")
        with pytest.raises(NotFoundError):
            lib.get_block("mcp9808")
        with pytest.raises(NotFoundError):
            lib.remove_block("mcp9808")

    def test_grouped_listing_of_fixture_library(self, library):
        groups = library.list_blocks()
        assert sum(len(blocks) for blocks in groups.values()) == 10
        assert [b.block_id for b in groups[BlockClass.POWER]] == ["dc_jack"]
        assert len(groups[BlockClass.REGULATOR]) == 2
        assert len(groups[BlockClass.COMPUTE]) == 2
        assert len(groups[BlockClass.PERIPHERAL]) == 5

    def test_import_idempotence_bytes(self, tmp_path):
        root_a = tmp_path / "a"
        root_b = tmp_path / "b"
        for root in (root_a, root_b):
            lib = BlockLibrary(root)
            lib.import_block(BLOCKS_DIR / "mcp9808.json", overwrite=True)
            lib.import_block(BLOCKS_DIR / "mcp9808.json", overwrite=True)
        assert (root_a / "mcp9808.json").read_bytes() == (root_b / "mcp9808.json").read_bytes()

    def test_reload_reproduces_classification(self, tmp_path):
        root = tmp_path / "lib"
        lib = BlockLibrary(root)
        for path in sorted(BLOCKS_DIR.glob("*.json")):
            lib.import_block(path)
        reloaded = BlockLibrary(root)
        for block_id in ("dc_jack", "reg_5v", "atmega328", "mcp9808"):
            stored = reloaded.get_block(block_id)
            assert classify(list(stored.nets), stored.attrs) is stored.classification
