import { spawn } from "node:child_process";
import { existsSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterEach, describe, expect, it } from "vitest";

import { validateBundleDir } from "../src/bundle.js";
import { startOrigin } from "./server.js";

const closers: Array<() => Promise<void>> = [];

afterEach(async () => {
  while (closers.length > 0) await closers.pop()!();
});

const CLI = join(__dirname, "..", "dist", "cli.js");

interface RunResult {
  stdout: string;
  stderr: string;
  status: number | null;
}

/** Async spawn: keeps this process's event loop free to serve the test origin. */
function runCli(args: string[]): Promise<RunResult> {
  return new Promise((resolve, reject) => {
    const child = spawn("node", [CLI, ...args], { stdio: ["ignore", "pipe", "pipe"] });
    let stdout = "";
    let stderr = "";
    child.stdout.on("data", (chunk) => (stdout += chunk));
    child.stderr.on("data", (chunk) => (stderr += chunk));
    child.on("error", reject);
    child.on("close", (status) => resolve({ stdout, stderr, status }));
  });
}

describe("cli", () => {
  it("captures targets from a file and prints the summary", async () => {
    if (!existsSync(CLI)) {
      throw new Error("dist/cli.js missing; run the build before tests");
    }
    const up = await startOrigin({ "/": { body: "<html><a href='https://x.example/a'>x</a></html>" } });
    closers.push(up.close);

    const dir = mkdtempSync(join(tmpdir(), "cli-"));
    const targetsFile = join(dir, "targets.txt");
    writeFileSync(targetsFile, "# one good, one dead\ncli-site.example\ndead-site.example\n");
    const out = join(dir, "bundles");

    const run = await runCli([
      "capture",
      "--targets", targetsFile,
      "--out", out,
      "--timeout", "5",
      "--origin-override", `cli-site.example=${up.base}`,
      "--origin-override", "dead-site.example=http://127.0.0.1:9",
    ]);

    expect(run.stdout).toContain("websites in target list: 2 (100.0%)");
    expect(run.stdout).toContain("websites successfully crawled: 1 (50.0%)");
    expect(run.stdout).toContain("websites that errored: 1 (50.0%)");
    expect(run.status).toBe(1); // partial failure conveyed via exit code

    expect(validateBundleDir(join(out, "cli-site.example"))).toEqual([]);
    expect(validateBundleDir(join(out, "dead-site.example"))).toEqual([]);
  }, 20000);
});
