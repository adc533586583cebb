// Thin HTTP client over the design service. Every mutation carries the
// caller's expected revision; a 409 surfaces as StaleRevisionError so the
// controller can prompt a reload instead of mutating blind.

import type { ComposeResult, DesignState, LibraryCatalog, Op, OpResult } from "./types.js";

export class StaleRevisionError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "StaleRevisionError";
  }
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function expectJson<T>(res: Response): Promise<T> {
  if (res.status === 409) {
    throw new StaleRevisionError(await res.text());
  }
  if (!res.ok) {
    throw new ApiError(res.status, await res.text());
  }
  return (await res.json()) as T;
}

export class DesignApi {
  constructor(private baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async catalog(): Promise<LibraryCatalog> {
    return expectJson(await fetch(this.url("/library/blocks")));
  }

  async createDesign(name: string): Promise<{ design_id: string; revision: number }> {
    return expectJson(
      await fetch(this.url("/designs"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ name }),
      }),
    );
  }

  async state(designId: string): Promise<DesignState> {
    return expectJson(await fetch(this.url(`/designs/${designId}`)));
  }

  async applyOp(designId: string, op: Op, expectedRevision: number): Promise<OpResult> {
    return expectJson(
      await fetch(this.url(`/designs/${designId}/ops`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ op, expected_revision: expectedRevision }),
      }),
    );
  }

  async compose(designId: string): Promise<ComposeResult> {
    return expectJson(
      await fetch(this.url(`/designs/${designId}/compose`), { method: "POST" }),
    );
  }

  async exportDesign(designId: string): Promise<string> {
    const res = await fetch(this.url(`/designs/${designId}/export?format=design`));
    if (!res.ok) throw new ApiError(res.status, await res.text());
    return res.text();
  }
}
