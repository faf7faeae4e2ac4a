#!/usr/bin/env node
/**
 * capture-harness capture --targets sites.txt --out bundles/ --timeout 60
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { batch } from "./batch.js";
import { makeConfig, parseOverride, readTargetsFile, DEFAULT_TIMEOUT_S } from "./config.js";

async function run(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .command("capture", "visit each target once and emit capture bundles", (y) =>
      y
        .option("targets", { type: "string", demandOption: true,
          describe: "file with one site per line" })
        .option("out", { type: "string", demandOption: true, describe: "output directory" })
        .option("timeout", { type: "number", default: DEFAULT_TIMEOUT_S,
          describe: "per-site load timeout in seconds" })
        .option("screenshot", { type: "boolean", default: false,
          describe: "requires a rendering engine; ignored by the static engine" })
        .option("user-agent", { type: "string" })
        .option("concurrency", { type: "number", default: 2 })
        .option("origin-override", { type: "string", array: true, default: [] as string[],
          describe: "host=baseURL mapping for local test servers" }))
    .demandCommand(1)
    .strict()
    .parse();

  const overrides: Record<string, string> = {};
  for (const spec of argv["origin-override"] as string[]) {
    const [host, base] = parseOverride(spec);
    overrides[host] = base;
  }
  const config = makeConfig({
    targets: readTargetsFile(argv.targets as string),
    outputDir: argv.out as string,
    timeoutS: argv.timeout as number,
    screenshot: argv.screenshot as boolean,
    userAgent: argv["user-agent"] as string | undefined,
    concurrency: argv.concurrency as number,
    originOverrides: overrides,
  });
  if (config.screenshot) {
    console.error("note: screenshots need a rendering engine; none will be written");
  }

  const result = await batch(config);
  for (const row of result.summary) {
    console.log(`${row.description}: ${row.volume} (${row.percent})`);
  }
  const errored = result.outcomes.filter((o) => o.status === "errored");
  for (const outcome of errored) {
    console.error(`errored: ${outcome.site} (${outcome.reason})`);
  }
  return errored.length > 0 ? 1 : 0;
}

run().then(
  (code) => process.exit(code),
  (error) => {
    console.error(error instanceof Error ? error.message : error);
    process.exit(2);
  },
);
