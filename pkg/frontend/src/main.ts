// Entry point: open (or create) a design, wire the view, poll for changes.

import { DesignApi } from "./api.js";
import { EditorController } from "./controller.js";
import { EditorView } from "./render.js";

const POLL_MS = 1500;

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const base = (window as unknown as { BW_API_BASE?: string }).BW_API_BASE ?? "";
  const api = new DesignApi(base);

  const params = new URLSearchParams(window.location.search);
  let designId = params.get("design");
  if (!designId) {
    const created = await api.createDesign(params.get("name") ?? "untitled");
    designId = created.design_id;
    params.set("design", designId);
    history.replaceState(null, "", `?${params}`);
  }

  const controller = await EditorController.open(api, designId);
  const view = new EditorView(root, controller);
  view.render();

  setInterval(() => {
    void controller.poll().catch(() => view.flash("service unreachable", true));
  }, POLL_MS);
}

void boot();
