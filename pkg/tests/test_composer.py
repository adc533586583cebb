from __future__ import annotations

import pytest

from blockwire.composer import (
    ComposeError,
    UnsetSupplyError,
    compose_schematic,
    connectivity_pairs,
    export_netlist,
    parse_netlist,
)
from blockwire.engine import new_design

from .conftest import build_catamaran, build_thermostat
from .oracles import expected_connectivity


def _oracle_groups(design, netlist):
    """Map the oracle's (inst, refdes, pin) groups into merged-name space."""
    from blockwire.composer import instance_ordinals

    ordinals = instance_ordinals(design)
    return {
        frozenset((f"B{ordinals[i]}_{r}", p) for i, r, p in group)
        for group in expected_connectivity(design)
    }


class TestPrefixing:
    def test_two_instances_of_one_block_get_distinct_refdes(self, library):
        d = new_design(library)
        jack = d.add_instance("dc_jack").instance_id
        d.set_supply(jack, 9000)
        reg = d.add_instance("reg_5v", jack).instance_id
        mcu = d.add_instance("atmega328", reg).instance_id
        led_a = d.add_instance("led", reg).instance_id
        led_b = d.add_instance("led", reg).instance_id
        d.connect((mcu, "GPIO-0"), (led_a, "GPIO-LED"))
        d.connect((mcu, "GPIO-1"), (led_b, "GPIO-LED"))
        netlist = compose_schematic(d)
        led_parts = {r for r, (block, part) in netlist.components.items() if block == "led" and part == "R1"}
        assert len(led_parts) == 2
        assert all("_R1" in r for r in led_parts)

    def test_prefix_injectivity(self, library):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        assert len(netlist.components) == len(set(netlist.components))
        seen_pins = set()
        for pins in netlist.nets.values():
            for pin in pins:
                assert pin not in seen_pins, f"pin {pin} joined twice"
                seen_pins.add(pin)


class TestThermostatMerge:
    def test_shared_i2c_nets(self, library):
        d, ids = build_thermostat(library)
        netlist = compose_schematic(d)
        sda = netlist.nets["I2C_1_SDA"]
        scl = netlist.nets["I2C_1_SCL"]
        assert len(sda) == 3 and len(scl) == 3  # mcu + sensor + display
        assert set(sda).isdisjoint(scl)
        assert netlist.provenance["I2C_1_SDA"] == "bus"

    def test_single_ground(self, library):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        grounds = [n for n in netlist.nets if n == "GND" or n.endswith("_GND")]
        assert grounds == ["GND"]
        assert netlist.provenance["GND"] == "ground"

    def test_connectivity_matches_union_find_oracle(self, library):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        assert connectivity_pairs(netlist) == _oracle_groups(d, netlist)

    def test_signal_discipline(self, library):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        # No merged net mixes pins from two signals of one protocol.
        sda_pins = set(netlist.nets["I2C_1_SDA"])
        scl_pins = set(netlist.nets["I2C_1_SCL"])
        assert not sda_pins & scl_pins


class TestCatamaranMerge:
    def test_motor_drivers_on_root_rail(self, library):
        d, ids = build_catamaran(library)
        netlist = compose_schematic(d)
        from blockwire.composer import instance_ordinals

        ordinals = instance_ordinals(d)
        root_rail = f"VRAIL_{ordinals[ids['jack']]}"
        reg_rail = f"VRAIL_{ordinals[ids['reg']]}"
        motor_prefixes = {f"B{ordinals[ids['motor1']]}_", f"B{ordinals[ids['motor2']]}_"}
        root_refdes = {r for r, _ in netlist.nets[root_rail]}
        assert any(r.startswith(p) for r in root_refdes for p in motor_prefixes)
        esp_prefix = f"B{ordinals[ids['esp']]}_"
        reg_refdes = {r for r, _ in netlist.nets[reg_rail]}
        assert any(r.startswith(esp_prefix) for r in reg_refdes)
        assert not any(r.startswith(esp_prefix) for r in root_refdes)

    def test_connectivity_oracle(self, library):
        d, _ = build_catamaran(library)
        netlist = compose_schematic(d)
        assert connectivity_pairs(netlist) == _oracle_groups(d, netlist)


class TestGates:
    def test_outstanding_error_blocks(self, library):
        d, ids = build_thermostat(library)
        reg33 = d.add_instance("reg_3v3", ids["jack"]).instance_id
        d.reparent(ids["display"], reg33)  # voltage mismatch
        with pytest.raises(ComposeError) as err:
            compose_schematic(d)
        assert err.value.diagnostics

    def test_unset_range_supply_blocks(self, library):
        d = new_design(library)
        jack = d.add_instance("dc_jack").instance_id  # outputs 5-12V, no setting
        with pytest.raises(UnsetSupplyError):
            compose_schematic(d)
        d.set_supply(jack, 9000)
        assert "GND" in compose_schematic(d).nets

    def test_missing_required_port_blocks(self, library):
        d, ids = build_thermostat(library)
        d.disconnect((ids["mcu"], "GPIO-0"), (ids["btn1"], "GPIO-OUT"))
        with pytest.raises(ComposeError) as err:
            compose_schematic(d)
        assert any(x.kind.value == "MissingRequiredInterface" for x in err.value.diagnostics)


class TestExport:
    def test_deterministic_bytes(self, library, tmp_path):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        export_netlist(netlist, a)
        export_netlist(compose_schematic(d), b)
        assert a.read_bytes() == b.read_bytes()
        assert b"\r" not in a.read_bytes()

    def test_round_trip(self, library, tmp_path):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        path = tmp_path / "netlist.json"
        export_netlist(netlist, path)
        parsed = parse_netlist(path.read_text())
        assert parsed.components == netlist.components
        assert parsed.nets == netlist.nets
        assert parsed.provenance == netlist.provenance

    def test_empty_design_composes_without_gnd(self, library, tmp_path):
        d = new_design(library)
        netlist = compose_schematic(d)
        assert netlist.components == {} and netlist.nets == {}
        path = tmp_path / "empty.json"
        export_netlist(netlist, path)
        assert parse_netlist(path.read_text()).nets == {}
