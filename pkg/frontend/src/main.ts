#!/usr/bin/env node
/** ckereport --in dir --out dir [--figs residual,bergman,spectrum,functionals]
 *
 * Reads the ckequant CSV outputs, renders the requested SVG figures and a
 * summary JSON with fitted log-log slopes. Exits nonzero on schema mismatch
 * or missing inputs.
 */

import { render, FIGURE_NAMES, SchemaError } from "./report.js";

function parseArgs(argv: string[]): { inDir: string; outDir: string; figs: string[] } {
  let inDir = "";
  let outDir = "";
  let figs: string[] | null = null;
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--in":
        inDir = argv[++i];
        break;
      case "--out":
        outDir = argv[++i];
        break;
      case "--figs": {
        const raw = argv[++i] ?? "";
        figs = raw.split(",").filter((s) => s.length > 0);
        break;
      }
      default:
        throw new Error(`unknown argument '${argv[i]}'`);
    }
  }
  if (!inDir || !outDir) {
    throw new Error("usage: ckereport --in dir --out dir [--figs a,b,...]");
  }
  return { inDir, outDir, figs: figs ?? FIGURE_NAMES };
}

function main(): number {
  try {
    const { inDir, outDir, figs } = parseArgs(process.argv.slice(2));
    const summary = render(inDir, outDir, figs);
    console.log(JSON.stringify({ status: "ok", ...summary }));
    return 0;
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    const code = err instanceof SchemaError ? "SCHEMA_MISMATCH" : "USAGE";
    console.error(JSON.stringify({ status: "error", error: code, message }));
    return err instanceof SchemaError ? 3 : 2;
  }
}

process.exit(main());
