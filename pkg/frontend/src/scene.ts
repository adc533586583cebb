// Pure projection of a design state into a renderable scene. The canvas is
// redrawn from this structure alone, so a hard refresh reproduces the same
// picture; nothing here touches the DOM or keeps client-only state.

import type { BlockSummary, DesignState, Diagnostic } from "./types.js";

export type NodeKind = "mat" | "general";

export interface CanvasNode {
  instanceId: string;
  blockId: string;
  label: string;
  kind: NodeKind;
  classification: string;
  depth: number;
  children: CanvasNode[];
  ports: { id: string; protocol: string; optional: boolean; wired: boolean }[];
  supplyMv: number | null;
  errored: boolean;
}

export interface WireView {
  a: { instance: string; port: string };
  b: { instance: string; port: string };
  errored: boolean;
  messages: string[];
}

export interface DiagnosticBadge {
  subject: string;
  severity: "Error" | "Warning";
  message: string;
}

export interface Scene {
  roots: CanvasNode[];
  wires: WireView[];
  badges: DiagnosticBadge[];
}

const MAT_CLASSES = new Set(["POWER", "REGULATOR"]);

function edgeSubjects(diag: Diagnostic): string[] {
  // edge/<inst>:<port>~<inst>:<port> -> both port paths
  if (!diag.subject.startsWith("edge/")) return [diag.subject];
  return diag.subject
    .slice("edge/".length)
    .split("~")
    .map((token) => {
      const [inst, port] = token.split(":");
      return `instance/${inst}/port/${port}`;
    });
}

export function buildScene(
  state: DesignState,
  blocks: Map<string, BlockSummary>,
): Scene {
  const doc = state.design;
  const byParent = new Map<string | null, string[]>();
  for (const row of doc.instances) {
    const key = row.parent ?? null;
    const bucket = byParent.get(key) ?? [];
    bucket.push(row.id);
    byParent.set(key, bucket);
  }
  const rowById = new Map(doc.instances.map((row) => [row.id, row]));
  const wiredPorts = new Set<string>();
  for (const [ai, ap, bi, bp] of doc.edges) {
    wiredPorts.add(`${ai}:${ap}`);
    wiredPorts.add(`${bi}:${bp}`);
  }
  const erroredSubjects = new Set(
    state.diagnostics.filter((d) => d.severity === "Error").map((d) => d.subject),
  );

  function node(instanceId: string, depth: number): CanvasNode {
    const row = rowById.get(instanceId)!;
    const block = blocks.get(row.block);
    const classification = block?.classification ?? "PERIPHERAL";
    const kind: NodeKind = MAT_CLASSES.has(classification) ? "mat" : "general";
    const children = (byParent.get(instanceId) ?? []).sort().map((child) => node(child, depth + 1));
    return {
      instanceId,
      blockId: row.block,
      label: block?.name ?? row.block,
      kind,
      classification,
      depth,
      children,
      ports: (block?.ports ?? []).map((p) => ({
        id: p.id,
        protocol: p.protocol,
        optional: p.optional,
        wired: wiredPorts.has(`${instanceId}:${p.id}`),
      })),
      supplyMv: row.supply_mv ?? null,
      errored: [...erroredSubjects].some((s) => s.startsWith(`instance/${instanceId}`)),
    };
  }

  const roots = (byParent.get(null) ?? []).sort().map((id) => node(id, 0));

  const wireDiags = new Map<string, string[]>();
  for (const diag of state.diagnostics) {
    for (const subject of edgeSubjects(diag)) {
      const bucket = wireDiags.get(subject) ?? [];
      bucket.push(diag.message);
      wireDiags.set(subject, bucket);
    }
  }

  const wires: WireView[] = doc.edges.map(([ai, ap, bi, bp]) => {
    const pathA = `instance/${ai}/port/${ap}`;
    const pathB = `instance/${bi}/port/${bp}`;
    const messages = [...(wireDiags.get(pathA) ?? []), ...(wireDiags.get(pathB) ?? [])];
    const errored =
      state.diagnostics.some(
        (d) =>
          d.severity === "Error" &&
          (edgeSubjects(d).includes(pathA) || edgeSubjects(d).includes(pathB)),
      );
    return { a: { instance: ai, port: ap }, b: { instance: bi, port: bp }, errored, messages };
  });

  const badges: DiagnosticBadge[] = state.diagnostics.map((d) => ({
    subject: d.subject,
    severity: d.severity,
    message: d.message,
  }));

  return { roots, wires, badges };
}
