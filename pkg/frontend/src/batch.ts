/**
 * Batch capture: every distinct target is visited exactly once; outcomes are
 * summarized in description/volume/percent rows.
 */

import type { HarnessConfig } from "./config.js";
import { capture, type CaptureOutcome } from "./capture.js";

export interface SummaryRow {
  description: string;
  volume: number;
  percent: string;
}

export interface BatchResult {
  outcomes: CaptureOutcome[];
  summary: SummaryRow[];
}

function percent(part: number, whole: number): string {
  return whole === 0 ? "0.0%" : `${((100 * part) / whole).toFixed(1)}%`;
}

export async function batch(config: HarnessConfig): Promise<BatchResult> {
  const outcomes: CaptureOutcome[] = [];
  const queue = [...config.targets];
  const workers = Array.from({ length: Math.max(1, config.concurrency) }, async () => {
    for (;;) {
      const target = queue.shift();
      if (target === undefined) return;
      outcomes.push(await capture(target, config));
    }
  });
  await Promise.all(workers);
  outcomes.sort((a, b) => a.site.localeCompare(b.site));

  const total = outcomes.length;
  const ok = outcomes.filter((o) => o.status === "ok").length;
  const summary: SummaryRow[] = [
    { description: "websites in target list", volume: total, percent: percent(total, total) },
    { description: "websites successfully crawled", volume: ok, percent: percent(ok, total) },
    { description: "websites that errored", volume: total - ok, percent: percent(total - ok, total) },
  ];
  return { outcomes, summary };
}
