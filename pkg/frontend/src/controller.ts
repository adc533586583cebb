// Editing session over one design. Every user gesture maps to exactly one
// op POST carrying the expected revision; the authoritative state comes back
// by polling, never from local mutation. Rejected gestures (a protocol
// mismatch wire, a stale revision) leave the scene untouched and surface as
// `lastRejection` until the next gesture, which is what drives the visual
// snap-back.

import { DesignApi, StaleRevisionError } from "./api.js";
import { buildScene, type Scene } from "./scene.js";
import type { BlockSummary, DesignState, Diagnostic, Op, OpResult } from "./types.js";

export interface Rejection {
  op: Op;
  message: string;
  diagnostics: Diagnostic[];
}

export class EditorController {
  state: DesignState | null = null;
  blocks = new Map<string, BlockSummary>();
  lastRejection: Rejection | null = null;
  needsReload = false;
  private listeners: (() => void)[] = [];

  constructor(
    private api: DesignApi,
    public designId: string,
  ) {}

  static async open(api: DesignApi, designId: string): Promise<EditorController> {
    const controller = new EditorController(api, designId);
    const catalog = await api.catalog();
    for (const group of Object.values(catalog.groups)) {
      for (const block of group) controller.blocks.set(block.id, block);
    }
    await controller.poll();
    return controller;
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  get revision(): number {
    return this.state?.revision ?? 0;
  }

  scene(): Scene {
    if (!this.state) return { roots: [], wires: [], badges: [] };
    return buildScene(this.state, this.blocks);
  }

  async poll(): Promise<DesignState> {
    this.state = await this.api.state(this.designId);
    this.emit();
    return this.state;
  }

  /** Apply one op, then poll so the scene reflects the service's truth. */
  async apply(op: Op): Promise<OpResult> {
    let result: OpResult;
    try {
      result = await this.api.applyOp(this.designId, op, this.revision);
    } catch (err) {
      if (err instanceof StaleRevisionError) {
        this.needsReload = true;
        this.emit();
      }
      throw err;
    }
    if (!result.applied) {
      this.lastRejection = {
        op,
        message: result.message ?? result.new_diagnostics[0]?.message ?? "rejected",
        diagnostics: result.new_diagnostics,
      };
      this.emit();
      return result;
    }
    this.lastRejection = null;
    await this.poll();
    return result;
  }

  /** Sidebar drag onto a mat (or the canvas root for power blocks).
   *
   * The engine keeps a voltage-mismatched instance (flagged) so the op log
   * replays; the editor refuses the drop by removing it again and reporting
   * the mismatch as a rejection. */
  async dropBlock(blockId: string, targetMat: string | null): Promise<OpResult> {
    const op: Op = targetMat
      ? { kind: "add_instance", block: blockId, parent: targetMat }
      : { kind: "add_instance", block: blockId };
    const result = await this.apply(op);
    if (result.applied && result.instance_id) {
      const mismatch = result.new_diagnostics.find(
        (d) =>
          d.kind === "VoltageMismatch" &&
          d.severity === "Error" &&
          d.subject === `instance/${result.instance_id}`,
      );
      if (mismatch) {
        await this.apply({ kind: "remove_instance", instance: result.instance_id });
        this.lastRejection = { op, message: mismatch.message, diagnostics: [mismatch] };
        this.emit();
        return { ...result, applied: false, message: mismatch.message };
      }
    }
    return result;
  }

  /** Wire gesture between two ports; a rejection means visual snap-back. */
  async drawWire(a: [string, string], b: [string, string]): Promise<OpResult> {
    return this.apply({ kind: "connect", a, b });
  }

  async removeWire(a: [string, string], b: [string, string]): Promise<OpResult> {
    return this.apply({ kind: "disconnect", a, b });
  }

  async setSupply(instance: string, mv: number | null): Promise<OpResult> {
    return this.apply({ kind: "set_supply", instance, mv });
  }

  async placeBlock(instance: string, x: number, y: number, rot = 0): Promise<OpResult> {
    return this.apply({ kind: "place", instance, x_mm: x, y_mm: y, rot });
  }

  async removeBlock(instance: string): Promise<OpResult> {
    return this.apply({ kind: "remove_instance", instance });
  }

  async compose() {
    return this.api.compose(this.designId);
  }

  async exportDesign(): Promise<string> {
    return this.api.exportDesign(this.designId);
  }
}
