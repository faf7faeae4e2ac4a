/**
 * Harness configuration: capture targets, timeout, output location.
 *
 * Origin overrides let tests (and offline replays) point a logical site at a
 * local server: all URLs keep their logical host in the emitted bundle while
 * the actual socket connects to the override base URL.
 */

import { readFileSync } from "node:fs";

export interface HarnessConfig {
  targets: string[];
  timeoutS: number;
  outputDir: string;
  screenshot: boolean;
  userAgent: string;
  concurrency: number;
  /** logical host -> base URL actually contacted, e.g. "http://127.0.0.1:8081" */
  originOverrides: Record<string, string>;
}

export const DEFAULT_TIMEOUT_S = 60;
export const DEFAULT_USER_AGENT =
  "capture-harness/0.1 (+https://example.invalid/adaudit; single visit per target)";

export function makeConfig(partial: Partial<HarnessConfig> & { outputDir: string }): HarnessConfig {
  const timeoutS = partial.timeoutS ?? DEFAULT_TIMEOUT_S;
  if (!(timeoutS > 0)) {
    throw new Error(`timeout must be positive, got ${timeoutS}`);
  }
  const seen = new Set<string>();
  const targets: string[] = [];
  for (const raw of partial.targets ?? []) {
    const target = raw.trim().toLowerCase();
    if (target && !seen.has(target)) {
      seen.add(target);
      targets.push(target);
    }
  }
  return {
    targets,
    timeoutS,
    outputDir: partial.outputDir,
    screenshot: partial.screenshot ?? false,
    userAgent: partial.userAgent ?? DEFAULT_USER_AGENT,
    concurrency: partial.concurrency ?? 2,
    originOverrides: partial.originOverrides ?? {},
  };
}

export function readTargetsFile(path: string): string[] {
  return readFileSync(path, "utf-8")
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0 && !line.startsWith("#"));
}

export function parseOverride(spec: string): [string, string] {
  const index = spec.indexOf("=");
  if (index <= 0) {
    throw new Error(`origin override must be host=baseURL, got ${spec}`);
  }
  return [spec.slice(0, index).toLowerCase(), spec.slice(index + 1)];
}
