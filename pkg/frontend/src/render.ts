// DOM rendering for the editor. The whole view is torn down and rebuilt from
// the controller's scene on every change; slow but unambiguous, and it keeps
// the pure-projection property honest.

import type { EditorController } from "./controller.js";
import type { CanvasNode, Scene, WireView } from "./scene.js";

const CLASS_COLORS: Record<string, string> = {
  POWER: "#c0392b",
  REGULATOR: "#d35400",
  COMPUTE: "#1e8449",
  PERIPHERAL: "#2471a3",
};

export interface PendingWire {
  from: [string, string] | null;
}

export class EditorView {
  private pending: PendingWire = { from: null };
  private toast: HTMLElement;

  constructor(
    private root: HTMLElement,
    private controller: EditorController,
  ) {
    this.toast = document.createElement("div");
    this.toast.className = "bw-toast";
    controller.onChange(() => this.render());
  }

  flash(message: string, error = false): void {
    this.toast.textContent = message;
    this.toast.className = `bw-toast ${error ? "bw-toast-error" : ""} bw-toast-show`;
    setTimeout(() => this.toast.classList.remove("bw-toast-show"), 2600);
  }

  render(): void {
    const scene = this.controller.scene();
    this.root.replaceChildren();
    this.root.appendChild(this.sidebar());
    this.root.appendChild(this.canvas(scene));
    this.root.appendChild(this.inspector(scene));
    this.root.appendChild(this.toast);
    if (this.controller.lastRejection) {
      this.flash(this.controller.lastRejection.message, true);
    }
    if (this.controller.needsReload) {
      this.flash("design changed elsewhere; reload the page", true);
    }
  }

  private sidebar(): HTMLElement {
    const aside = document.createElement("aside");
    aside.className = "bw-sidebar";
    const groups = new Map<string, string[]>();
    for (const block of this.controller.blocks.values()) {
      const bucket = groups.get(block.classification) ?? [];
      bucket.push(block.id);
      groups.set(block.classification, bucket);
    }
    for (const classification of ["POWER", "REGULATOR", "COMPUTE", "PERIPHERAL"]) {
      const ids = (groups.get(classification) ?? []).sort();
      if (!ids.length) continue;
      const heading = document.createElement("h3");
      heading.textContent = classification;
      aside.appendChild(heading);
      for (const id of ids) {
        const item = document.createElement("button");
        item.className = "bw-block-item";
        item.style.borderLeftColor = CLASS_COLORS[classification];
        item.textContent = id;
        item.title = this.controller.blocks.get(id)?.name ?? id;
        item.addEventListener("click", () => void this.addBlock(id, classification));
        aside.appendChild(item);
      }
    }
    return aside;
  }

  private async addBlock(blockId: string, classification: string): Promise<void> {
    let target: string | null = null;
    if (classification !== "POWER") {
      const mats = this.matIds();
      if (!mats.length) {
        this.flash("drop a power block first; general blocks need a mat", true);
        return;
      }
      target = window.prompt(`drop ${blockId} onto which mat?`, mats[0]);
      if (!target) return;
    }
    const result = await this.controller.dropBlock(blockId, target);
    if (!result.applied) return; // refusal toast already shown via onChange
    const errors = result.new_diagnostics.filter((d) => d.severity === "Error");
    if (errors.length) this.flash(errors[0].message, true);
  }

  private matIds(): string[] {
    const out: string[] = [];
    const walk = (nodes: CanvasNode[]) => {
      for (const node of nodes) {
        if (node.kind === "mat") out.push(node.instanceId);
        walk(node.children);
      }
    };
    walk(this.controller.scene().roots);
    return out;
  }

  private canvas(scene: Scene): HTMLElement {
    const main = document.createElement("main");
    main.className = "bw-canvas";
    for (const node of scene.roots) {
      main.appendChild(this.nodeEl(node, scene));
    }
    const wireList = document.createElement("div");
    wireList.className = "bw-wires";
    for (const wire of scene.wires) {
      wireList.appendChild(this.wireEl(wire));
    }
    main.appendChild(wireList);
    return main;
  }

  private nodeEl(node: CanvasNode, scene: Scene): HTMLElement {
    const el = document.createElement("div");
    el.className = `bw-node bw-${node.kind} ${node.errored ? "bw-errored" : ""}`;
    el.style.borderColor = CLASS_COLORS[node.classification];
    const title = document.createElement("div");
    title.className = "bw-node-title";
    title.textContent = `${node.instanceId} · ${node.blockId}` + (node.supplyMv ? ` @ ${node.supplyMv} mV` : "");
    el.appendChild(title);
    const ports = document.createElement("div");
    ports.className = "bw-ports";
    for (const port of node.ports) {
      const chip = document.createElement("button");
      chip.className = `bw-port ${port.wired ? "bw-port-wired" : ""}`;
      const selected =
        this.pending.from &&
        this.pending.from[0] === node.instanceId &&
        this.pending.from[1] === port.id;
      if (selected) chip.classList.add("bw-port-selected");
      chip.textContent = port.id + (port.optional ? "!" : "");
      chip.addEventListener("click", () => void this.portClick(node.instanceId, port.id));
      ports.appendChild(chip);
    }
    el.appendChild(ports);
    for (const child of node.children) {
      el.appendChild(this.nodeEl(child, scene));
    }
    return el;
  }

  private async portClick(instance: string, port: string): Promise<void> {
    if (!this.pending.from) {
      this.pending.from = [instance, port];
      this.render();
      return;
    }
    const from = this.pending.from;
    this.pending.from = null;
    if (from[0] === instance && from[1] === port) {
      this.render();
      return;
    }
    const result = await this.controller.drawWire(from, [instance, port]);
    if (!result.applied) {
      // Snap back: nothing was drawn; the rejection toast explains why.
      this.render();
    }
  }

  private wireEl(wire: WireView): HTMLElement {
    const el = document.createElement("div");
    el.className = `bw-wire ${wire.errored ? "bw-wire-errored" : ""}`;
    el.textContent = `${wire.a.instance}:${wire.a.port} ⇄ ${wire.b.instance}:${wire.b.port}`;
    if (wire.messages.length) el.title = wire.messages.join("\n");
    const remove = document.createElement("button");
    remove.textContent = "✕";
    remove.addEventListener("click", () =>
      void this.controller.removeWire(
        [wire.a.instance, wire.a.port],
        [wire.b.instance, wire.b.port],
      ),
    );
    el.appendChild(remove);
    return el;
  }

  private inspector(scene: Scene): HTMLElement {
    const aside = document.createElement("aside");
    aside.className = "bw-inspector";
    const heading = document.createElement("h3");
    heading.textContent = `diagnostics (${scene.badges.length})`;
    aside.appendChild(heading);
    for (const badge of scene.badges) {
      const row = document.createElement("div");
      row.className = `bw-badge bw-badge-${badge.severity.toLowerCase()}`;
      row.textContent = `${badge.severity}: ${badge.message}`;
      row.title = badge.subject;
      aside.appendChild(row);
    }
    aside.appendChild(this.boardPanel());
    return aside;
  }

  private boardPanel(): HTMLElement {
    const panel = document.createElement("div");
    panel.className = "bw-board-panel";
    const heading = document.createElement("h3");
    heading.textContent = "board";
    panel.appendChild(heading);
    const doc = this.controller.state?.design;
    if (!doc) return panel;
    const board = document.createElement("div");
    board.className = "bw-board";
    board.style.aspectRatio = `${doc.board.w_mm} / ${doc.board.h_mm}`;
    const scaleX = 100 / doc.board.w_mm;
    const scaleY = 100 / doc.board.h_mm;
    for (const row of doc.instances) {
      const block = this.controller.blocks.get(row.block);
      const placement = doc.placements[row.id];
      const chip = document.createElement("div");
      chip.className = "bw-board-block";
      chip.textContent = row.id;
      if (block && placement) {
        const w = placement.rot % 180 === 0 ? block.footprint.w_mm : block.footprint.h_mm;
        const h = placement.rot % 180 === 0 ? block.footprint.h_mm : block.footprint.w_mm;
        chip.style.left = `${placement.x_mm * scaleX}%`;
        chip.style.bottom = `${placement.y_mm * scaleY}%`;
        chip.style.width = `${w * scaleX}%`;
        chip.style.height = `${h * scaleY}%`;
        const outside =
          placement.x_mm < 0 || placement.y_mm < 0 ||
          placement.x_mm + w > doc.board.w_mm || placement.y_mm + h > doc.board.h_mm;
        if (outside) chip.classList.add("bw-board-outside");
      } else {
        chip.classList.add("bw-board-unplaced");
      }
      chip.addEventListener("click", () => void this.placePrompt(row.id));
      board.appendChild(chip);
    }
    panel.appendChild(board);
    const composeBtn = document.createElement("button");
    composeBtn.className = "bw-compose";
    composeBtn.textContent = "compose";
    composeBtn.addEventListener("click", () => void this.compose(panel));
    panel.appendChild(composeBtn);
    return panel;
  }

  private async placePrompt(instance: string): Promise<void> {
    const answer = window.prompt(`place ${instance} at "x y [rot]" (mm)`, "10 10 0");
    if (!answer) return;
    const [x, y, rot] = answer.trim().split(/\s+/).map(Number);
    if (Number.isNaN(x) || Number.isNaN(y)) return;
    const result = await this.controller.placeBlock(instance, x, y, rot || 0);
    const boundary = result.new_diagnostics.find((d) => d.kind === "BoundaryViolation");
    if (boundary) this.flash(boundary.message, true);
  }

  private async compose(panel: HTMLElement): Promise<void> {
    try {
      const result = await this.controller.compose();
      const links = document.createElement("div");
      links.className = "bw-downloads";
      const mk = (name: string, text: string, mime: string) => {
        const a = document.createElement("a");
        a.textContent = name;
        a.download = name;
        a.href = URL.createObjectURL(new Blob([text], { type: mime }));
        return a;
      };
      links.appendChild(mk("netlist.json", JSON.stringify(result.netlist, null, 2), "application/json"));
      links.appendChild(mk("board.svg", result.svg, "image/svg+xml"));
      const design = await this.controller.exportDesign();
      links.appendChild(mk("design.json", design, "application/json"));
      const preview = document.createElement("div");
      preview.className = "bw-svg-preview";
      preview.innerHTML = result.svg;
      panel.appendChild(links);
      panel.appendChild(preview);
      this.flash("composed: netlist + routed board ready");
    } catch (err) {
      this.flash(`compose blocked: ${(err as Error).message}`, true);
    }
  }
}
