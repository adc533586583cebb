// Wire-format types mirroring the design service's JSON documents.

export type Severity = "Error" | "Warning";

export interface Diagnostic {
  severity: Severity;
  kind: string;
  subject: string;
  message: string;
}

export interface PortSummary {
  id: string;
  protocol: string;
  alt_name: string | null;
  signals: Record<string, string>;
  optional: boolean;
  i2c_addr: number | null;
  spi_role: string | null;
  level: [number, number] | null;
}

export interface BlockSummary {
  id: string;
  name: string;
  classification: "POWER" | "REGULATOR" | "COMPUTE" | "PERIPHERAL";
  power_in: [number, number] | null;
  power_out: [number, number] | null;
  ports: PortSummary[];
  footprint: { w_mm: number; h_mm: number; pads: { net: string; x_mm: number; y_mm: number }[] };
  image: string | null;
}

export interface LibraryCatalog {
  groups: Record<string, BlockSummary[]>;
}

export interface InstanceRow {
  id: string;
  block: string;
  parent?: string;
  supply_mv?: number;
}

export type EdgeRow = [string, string, string, string];

export interface PlacementRow {
  x_mm: number;
  y_mm: number;
  rot: number;
}

export interface DesignDocument {
  design: { id: string; name: string };
  instances: InstanceRow[];
  edges: EdgeRow[];
  placements: Record<string, PlacementRow>;
  board: { w_mm: number; h_mm: number; pitch_mm: number };
}

export interface DesignState {
  revision: number;
  design: DesignDocument;
  diagnostics: Diagnostic[];
}

export type Op =
  | { kind: "add_instance"; block: string; parent?: string }
  | { kind: "remove_instance"; instance: string }
  | { kind: "reparent"; instance: string; parent: string }
  | { kind: "set_supply"; instance: string; mv: number | null }
  | { kind: "connect"; a: [string, string]; b: [string, string] }
  | { kind: "disconnect"; a: [string, string]; b: [string, string] }
  | { kind: "place"; instance: string; x_mm: number; y_mm: number; rot: number }
  | { kind: "set_board"; w_mm: number; h_mm: number; pitch_mm?: number };

export interface OpResult {
  revision: number;
  applied: boolean;
  instance_id: string | null;
  message: string | null;
  new_diagnostics: Diagnostic[];
  retracted_diagnostics: Diagnostic[];
}

export interface ComposeResult {
  netlist: unknown;
  board: { tracks: { net: string; layer: string; points_mm: [number, number][] }[]; links: number; diagnostics: Diagnostic[] };
  svg: string;
}
