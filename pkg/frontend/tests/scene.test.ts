import { describe, expect, it } from "vitest";

import { buildScene } from "../src/scene.js";
import type { BlockSummary, DesignState } from "../src/types.js";

function block(id: string, classification: BlockSummary["classification"], ports: string[][] = []): BlockSummary {
  return {
    id,
    name: id,
    classification,
    power_in: null,
    power_out: null,
    ports: ports.map(([pid, protocol]) => ({
      id: pid,
      protocol,
      alt_name: null,
      signals: {},
      optional: false,
      i2c_addr: null,
      spi_role: null,
      level: null,
    })),
    footprint: { w_mm: 10, h_mm: 10, pads: [] },
    image: null,
  };
}

const blocks = new Map<string, BlockSummary>([
  ["jack", block("jack", "POWER")],
  ["reg", block("reg", "REGULATOR")],
  ["mcu", block("mcu", "COMPUTE", [["I2C", "I2C"], ["GPIO-0", "GPIO"]])],
  ["sensor", block("sensor", "PERIPHERAL", [["I2C", "I2C"]])],
]);

function state(overrides: Partial<DesignState["design"]> = {}, diagnostics: DesignState["diagnostics"] = []): DesignState {
  return {
    revision: 3,
    design: {
      design: { id: "d1", name: "t" },
      instances: [
        { id: "i1", block: "jack", supply_mv: 9000 },
        { id: "i2", block: "reg", parent: "i1" },
        { id: "i3", block: "mcu", parent: "i2" },
        { id: "i4", block: "sensor", parent: "i2" },
      ],
      edges: [["i3", "I2C", "i4", "I2C"]],
      placements: {},
      board: { w_mm: 100, h_mm: 100, pitch_mm: 0.5 },
      ...overrides,
    },
    diagnostics,
  };
}

describe("scene projection", () => {
  it("visual nesting mirrors mat containment exactly", () => {
    const scene = buildScene(state(), blocks);
    expect(scene.roots).toHaveLength(1);
    const jack = scene.roots[0];
    expect(jack.kind).toBe("mat");
    expect(jack.supplyMv).toBe(9000);
    expect(jack.children.map((c) => c.instanceId)).toEqual(["i2"]);
    const reg = jack.children[0];
    expect(reg.kind).toBe("mat");
    expect(reg.children.map((c) => c.instanceId)).toEqual(["i3", "i4"]);
    expect(reg.children.every((c) => c.kind === "general")).toBe(true);
  });

  it("ports know whether they are wired", () => {
    const scene = buildScene(state(), blocks);
    const mcu = scene.roots[0].children[0].children.find((c) => c.instanceId === "i3")!;
    const i2c = mcu.ports.find((p) => p.id === "I2C")!;
    const gpio = mcu.ports.find((p) => p.id === "GPIO-0")!;
    expect(i2c.wired).toBe(true);
    expect(gpio.wired).toBe(false);
  });

  it("one badge per live diagnostic, none after retraction", () => {
    const withDiag = buildScene(
      state({}, [
        { severity: "Error", kind: "VoltageMismatch", subject: "instance/i3", message: "boom" },
      ]),
      blocks,
    );
    expect(withDiag.badges).toHaveLength(1);
    expect(withDiag.roots[0].children[0].children[0].errored).toBe(true);
    const clean = buildScene(state(), blocks);
    expect(clean.badges).toHaveLength(0);
    expect(clean.roots[0].children[0].children[0].errored).toBe(false);
  });

  it("bus errors mark the wire red via port subjects", () => {
    const scene = buildScene(
      state({}, [
        {
          severity: "Error",
          kind: "I2cAddressConflict",
          subject: "instance/i4/port/I2C",
          message: "I2C address 0x18 used by multiple ports",
        },
      ]),
      blocks,
    );
    expect(scene.wires).toHaveLength(1);
    expect(scene.wires[0].errored).toBe(true);
    expect(scene.wires[0].messages[0]).toContain("0x18");
  });

  it("same state always projects the same scene (hard refresh property)", () => {
    const a = buildScene(state(), blocks);
    const b = buildScene(state(), blocks);
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });
});
