// Spawns the real design service for integration tests: fresh data dir with
// the fixture block library preloaded, random port, readiness poll.

import { type ChildProcess, spawn } from "node:child_process";
import { cpSync, mkdirSync, mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

const FIXTURE_BLOCKS = resolve(__dirname, "..", "..", "fixtures", "blocks");

export interface ServiceHandle {
  baseUrl: string;
  proc: ChildProcess;
  dataDir: string;
  stop(): void;
}

let nextPort = 8917 + Math.floor(Math.random() * 500);

export async function startService(): Promise<ServiceHandle> {
  const dataDir = mkdtempSync(join(tmpdir(), "bw-editor-test-"));
  mkdirSync(join(dataDir, "library"), { recursive: true });
  cpSync(FIXTURE_BLOCKS, join(dataDir, "library"), { recursive: true });
  const port = nextPort++;
  const baseUrl = `http://127.0.0.1:${port}`;
  const proc = spawn("python3", ["-m", "blockwire.service"], {
    env: {
      ...process.env,
      BW_DATA_DIR: dataDir,
      BW_BIND_ADDR: `127.0.0.1:${port}`,
    },
    stdio: ["ignore", "pipe", "pipe"],
  });
  let stderr = "";
  proc.stderr?.on("data", (chunk) => (stderr += String(chunk)));

  const deadline = Date.now() + 20_000;
  for (;;) {
    try {
      const res = await fetch(`${baseUrl}/protocols`);
      if (res.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      proc.kill("SIGKILL");
      throw new Error(`service did not come up on ${baseUrl}\n${stderr}`);
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  return {
    baseUrl,
    proc,
    dataDir,
    stop() {
      proc.kill("SIGKILL");
    },
  };
}
