/**
 * Capture bundle writer and structural validator.
 *
 * The on-disk layout is the adaudit capture format, byte-compatible with its
 * loader: manifest.json, page.html, links.txt, transactions.jsonl,
 * cookies.jsonl, plus ads.txt when the site served one.
 */

import { mkdirSync, writeFileSync, readFileSync, existsSync } from "node:fs";
import { join } from "node:path";
import { getDomain } from "tldts";

import type { Transaction, JarCookie } from "./net.js";

export interface BundleData {
  site: string;
  fetchedAt: string;
  status: "ok" | "errored";
  reason?: string;
  html: string;
  links: string[];
  transactions: Transaction[];
  cookies: Array<JarCookie & { party: "first" | "third" }>;
  adsTxt?: string;
}

function sortedJson(value: unknown): string {
  if (Array.isArray(value)) {
    return "[" + value.map(sortedJson).join(",") + "]";
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .filter(([, v]) => v !== undefined)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0));
    return "{" + entries.map(([k, v]) => JSON.stringify(k) + ": " + sortedJson(v)).join(", ") + "}";
  }
  return JSON.stringify(value);
}

export function writeBundle(data: BundleData, outputDir: string): string {
  const dir = join(outputDir, data.site);
  mkdirSync(dir, { recursive: true });

  const manifest: Record<string, unknown> = {
    site: data.site,
    fetched_at: data.fetchedAt,
    status: data.status,
  };
  if (data.reason !== undefined) manifest.reason = data.reason;
  writeFileSync(join(dir, "manifest.json"), JSON.stringify(manifest, Object.keys(manifest).sort(), 2) + "\n");

  writeFileSync(join(dir, "page.html"), data.html);
  writeFileSync(join(dir, "links.txt"), data.links.map((u) => u + "\n").join(""));
  writeFileSync(join(dir, "transactions.jsonl"),
    data.transactions.map((t) => sortedJson(t) + "\n").join(""));
  writeFileSync(join(dir, "cookies.jsonl"),
    data.cookies.map((c) => sortedJson(c) + "\n").join(""));
  if (data.adsTxt !== undefined) {
    writeFileSync(join(dir, "ads.txt"), data.adsTxt);
  }
  return dir;
}

const REDIRECT_CODES = new Set([301, 302, 303, 307, 308]);

/**
 * Mirror of the loader-side invariants; returns a list of violations so the
 * harness tests can assert emitted bundles are loadable without Python.
 */
export function validateBundleDir(dir: string): string[] {
  const problems: string[] = [];
  const manifestPath = join(dir, "manifest.json");
  if (!existsSync(manifestPath)) {
    return ["missing manifest.json"];
  }
  const manifest = JSON.parse(readFileSync(manifestPath, "utf-8"));
  if (typeof manifest.site !== "string" || manifest.site.length === 0) {
    problems.push("manifest.site missing");
  } else if (getDomain(manifest.site) !== manifest.site) {
    problems.push(`site ${manifest.site} is not a bare registrable domain`);
  }
  if (typeof manifest.fetched_at !== "string" || Number.isNaN(Date.parse(manifest.fetched_at))) {
    problems.push("manifest.fetched_at missing or unparsable");
  }
  if (manifest.status !== "ok" && manifest.status !== "errored") {
    problems.push(`manifest.status invalid: ${manifest.status}`);
  }

  const linksPath = join(dir, "links.txt");
  if (existsSync(linksPath)) {
    for (const line of readFileSync(linksPath, "utf-8").split("\n")) {
      const url = line.trim();
      if (!url) continue;
      let ok = false;
      try {
        const parsed = new URL(url);
        ok = parsed.protocol === "http:" || parsed.protocol === "https:";
      } catch {
        ok = false;
      }
      if (!ok) problems.push(`links.txt entry not absolute http(s): ${url}`);
    }
  }

  const txPath = join(dir, "transactions.jsonl");
  if (existsSync(txPath)) {
    let lastStart = "";
    for (const line of readFileSync(txPath, "utf-8").split("\n")) {
      if (!line.trim()) continue;
      const tx = JSON.parse(line);
      if (typeof tx.status_code !== "number" || tx.status_code < 100 || tx.status_code > 599) {
        problems.push(`transaction status out of range: ${tx.status_code}`);
      }
      const isRedirect = REDIRECT_CODES.has(tx.status_code);
      if (isRedirect !== (tx.redirect_location !== undefined)) {
        problems.push(`redirect_location/status mismatch on ${tx.request_url}`);
      }
      if (tx.started_at) {
        if (lastStart && tx.started_at < lastStart) {
          problems.push("transactions not ordered by start time");
        }
        lastStart = tx.started_at;
      }
    }
  }

  const cookiePath = join(dir, "cookies.jsonl");
  if (existsSync(cookiePath) && typeof manifest.site === "string") {
    for (const line of readFileSync(cookiePath, "utf-8").split("\n")) {
      if (!line.trim()) continue;
      const cookie = JSON.parse(line);
      const expected = getDomain(cookie.cookie_domain) === manifest.site ? "first" : "third";
      if (cookie.party !== expected) {
        problems.push(`cookie ${cookie.name} party ${cookie.party}, recomputes to ${expected}`);
      }
    }
  }
  return problems;
}
