from __future__ import annotations

from pathlib import Path

import pytest

from blockwire.engine import Design, new_design
from blockwire.library import BlockLibrary

REPO_ROOT = Path(__file__).resolve().parent.parent
BLOCKS_DIR = REPO_ROOT / "fixtures" / "blocks"

# One line per acceptance criterion, echoed after the run (outside capture).
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def library() -> BlockLibrary:
    lib = BlockLibrary()
    for path in sorted(BLOCKS_DIR.glob("*.json")):
        _, report = lib.import_block(path)
        assert report.accepted, f"{path.name}: {[d.message for d in report.diagnostics]}"
    return lib


def build_blinky(lib: BlockLibrary) -> tuple[Design, dict[str, str]]:
    """Blinky: microcontroller, two LEDs, DC jack, 5V regulator."""
    d = new_design(lib, "blinky")
    ids = {}
    ids["jack"] = d.add_instance("dc_jack").instance_id
    d.set_supply(ids["jack"], 9000)
    ids["reg"] = d.add_instance("reg_5v", ids["jack"]).instance_id
    ids["mcu"] = d.add_instance("atmega328", ids["reg"]).instance_id
    ids["led1"] = d.add_instance("led", ids["reg"]).instance_id
    ids["led2"] = d.add_instance("led", ids["reg"]).instance_id
    d.connect((ids["mcu"], "GPIO-0"), (ids["led1"], "GPIO-LED"))
    d.connect((ids["mcu"], "GPIO-1"), (ids["led2"], "GPIO-LED"))
    d.place(ids["jack"], 2.0, 80.0)
    d.place(ids["reg"], 30.0, 80.0)
    d.place(ids["mcu"], 40.0, 40.0)
    d.place(ids["led1"], 70.0, 50.0)
    d.place(ids["led2"], 70.0, 30.0)
    return d, ids


def build_thermostat(lib: BlockLibrary) -> tuple[Design, dict[str, str]]:
    """Thermostat: temperature sensor, display, two buttons, LED, MCU, jack, 5V reg."""
    d = new_design(lib, "thermostat")
    ids = {}
    ids["jack"] = d.add_instance("dc_jack").instance_id
    d.set_supply(ids["jack"], 9000)
    ids["reg"] = d.add_instance("reg_5v", ids["jack"]).instance_id
    ids["mcu"] = d.add_instance("atmega328", ids["reg"]).instance_id
    ids["sensor"] = d.add_instance("mcp9808", ids["reg"]).instance_id
    ids["display"] = d.add_instance("ht16k33", ids["reg"]).instance_id
    ids["btn1"] = d.add_instance("button", ids["reg"]).instance_id
    ids["btn2"] = d.add_instance("button", ids["reg"]).instance_id
    ids["led"] = d.add_instance("led", ids["reg"]).instance_id
    d.connect((ids["mcu"], "I2C"), (ids["sensor"], "I2C"))
    d.connect((ids["mcu"], "I2C"), (ids["display"], "I2C"))
    d.connect((ids["mcu"], "GPIO-0"), (ids["btn1"], "GPIO-OUT"))
    d.connect((ids["mcu"], "GPIO-1"), (ids["btn2"], "GPIO-OUT"))
    d.connect((ids["mcu"], "GPIO-2"), (ids["led"], "GPIO-LED"))
    d.place(ids["jack"], 2.0, 80.0)
    d.place(ids["reg"], 30.0, 80.0)
    d.place(ids["mcu"], 40.0, 40.0)
    d.place(ids["sensor"], 75.0, 45.0)
    d.place(ids["display"], 70.0, 70.0)
    d.place(ids["btn1"], 10.0, 40.0)
    d.place(ids["btn2"], 10.0, 20.0)
    d.place(ids["led"], 70.0, 20.0)
    return d, ids


def build_catamaran(lib: BlockLibrary) -> tuple[Design, dict[str, str]]:
    """Wi-Fi catamaran: ESP32, two motor drivers on the root mat, buttons, LEDs."""
    d = new_design(lib, "catamaran")
    ids = {}
    ids["jack"] = d.add_instance("dc_jack").instance_id
    d.set_supply(ids["jack"], 7400)
    ids["reg"] = d.add_instance("reg_5v", ids["jack"]).instance_id
    ids["esp"] = d.add_instance("esp32", ids["reg"]).instance_id
    ids["motor1"] = d.add_instance("motor_driver", ids["jack"]).instance_id
    ids["motor2"] = d.add_instance("motor_driver", ids["jack"]).instance_id
    ids["btn1"] = d.add_instance("button", ids["reg"]).instance_id
    ids["btn2"] = d.add_instance("button", ids["reg"]).instance_id
    ids["led1"] = d.add_instance("led", ids["reg"]).instance_id
    ids["led2"] = d.add_instance("led", ids["reg"]).instance_id
    d.connect((ids["esp"], "GPIO-0"), (ids["motor1"], "GPIO-IN1"))
    d.connect((ids["esp"], "GPIO-1"), (ids["motor1"], "GPIO-IN2"))
    d.connect((ids["esp"], "GPIO-2"), (ids["motor2"], "GPIO-IN1"))
    d.connect((ids["esp"], "GPIO-3"), (ids["motor2"], "GPIO-IN2"))
    d.connect((ids["esp"], "GPIO-4"), (ids["btn1"], "GPIO-OUT"))
    d.connect((ids["esp"], "GPIO-5"), (ids["btn2"], "GPIO-OUT"))
    d.connect((ids["esp"], "GPIO-6"), (ids["led1"], "GPIO-LED"))
    d.connect((ids["esp"], "GPIO-7"), (ids["led2"], "GPIO-LED"))
    d.place(ids["jack"], 2.0, 85.0)
    d.place(ids["reg"], 25.0, 85.0)
    d.place(ids["esp"], 35.0, 40.0)
    d.place(ids["motor1"], 5.0, 60.0)
    d.place(ids["motor2"], 5.0, 10.0)
    d.place(ids["btn1"], 75.0, 70.0)
    d.place(ids["btn2"], 75.0, 50.0)
    d.place(ids["led1"], 75.0, 30.0)
    d.place(ids["led2"], 75.0, 15.0)
    return d, ids
