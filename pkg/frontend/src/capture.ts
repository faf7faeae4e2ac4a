/**
 * Single-site capture: fetch the landing page once, walk frames for their
 * links, collect network transactions and cookies, grab ads.txt, and emit a
 * capture bundle.  Navigation failures and timeouts never crash a run; they
 * produce an errored bundle with whatever was collected.
 *
 * This engine fetches and parses served HTML; it does not execute scripts,
 * so dynamically-injected frames and shadow-DOM content are out of reach.
 * The page is never interacted with: one GET per document, no clicks.
 */

import { getDomain } from "tldts";

import type { HarnessConfig } from "./config.js";
import { Recorder } from "./net.js";
import { dedupe, extractRefs } from "./extract.js";
import { writeBundle, type BundleData } from "./bundle.js";

const MAX_FRAME_DEPTH = 3;
const MAX_FRAMES = 25;

export interface CaptureOutcome {
  site: string;
  status: "ok" | "errored";
  reason?: string;
  bundleDir: string;
}

function nowIso(): string {
  return new Date().toISOString().replace(/\.\d{3}Z$/, "Z");
}

export async function capture(target: string, config: HarnessConfig): Promise<CaptureOutcome> {
  const site = getDomain(target) ?? target;
  const controller = new AbortController();
  const timer = setTimeout(() => controller.abort(), config.timeoutS * 1000);
  const recorder = new Recorder(config.userAgent, config.originOverrides, controller.signal);

  const data: BundleData = {
    site,
    fetchedAt: nowIso(),
    status: "ok",
    html: "",
    links: [],
    transactions: recorder.transactions,
    cookies: [],
  };

  try {
    const page = await recorder.get(`https://${target}/`);
    data.html = page.body;

    const refs = extractRefs(page.body, page.finalUrl);
    const links = [...refs.anchors];

    // Frame documents contribute their own hyperlinks; the frame URL itself
    // is kept as a page link too.
    const queue = refs.frames.map((url) => ({ url, depth: 1 }));
    let fetched = 0;
    while (queue.length > 0 && fetched < MAX_FRAMES) {
      const { url, depth } = queue.shift()!;
      links.push(url);
      if (depth > MAX_FRAME_DEPTH) continue;
      fetched += 1;
      try {
        const frame = await recorder.get(url, { initiator: page.finalUrl });
        const frameRefs = extractRefs(frame.body, url);
        links.push(...frameRefs.anchors);
        queue.push(...frameRefs.frames.map((u) => ({ url: u, depth: depth + 1 })));
      } catch (error) {
        if (controller.signal.aborted) throw error;
        // unreachable frame: keep its URL as a link, continue the page
      }
    }
    data.links = dedupe(links);

    try {
      const adsTxt = await recorder.get(`https://${site}/ads.txt`, { record: false });
      if (adsTxt.status === 200 && adsTxt.body) {
        data.adsTxt = adsTxt.body;
      }
    } catch (error) {
      if (controller.signal.aborted) throw error;
    }
  } catch (error) {
    data.status = "errored";
    data.reason = controller.signal.aborted
      ? "timeout"
      : error instanceof Error ? `navigation: ${error.message}` : "navigation failed";
  } finally {
    clearTimeout(timer);
  }

  data.cookies = recorder.jar.rows(site);
  const bundleDir = writeBundle(data, config.outputDir);
  return { site, status: data.status, reason: data.reason, bundleDir };
}
