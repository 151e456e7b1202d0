/** Discovery, schema validation, figure rendering and the slope summary.

 * Inputs are the CSV tables written by the ckequant CLI, one per subcommand,
 * named `<subcommand>_<hash>.csv`. Figures are pure post-processing; nothing
 * here recomputes geometry.
 */

import { readdirSync, writeFileSync, mkdirSync } from "fs";
import { join, basename } from "path";

import { Table, readTable, checkSchema, column, columnsMatching, SchemaError } from "./csv.js";
import { loglogSlope, SlopeFit } from "./fit.js";
import { renderPlot, Series } from "./svg.js";

export { SchemaError } from "./csv.js";

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const SCHEMAS: Record<string, string[]> = {
  balance: ["iter", "t", "residual", "ding_q", "am_q_*", "dist_step", "sup_bergman_dev"],
  flow: ["iter", "t", "residual", "ding_q", "am_q_*", "dist_step", "sup_bergman_dev"],
  bergman: ["k", "dev_leading_*", "dev_balanced_*"],
  spectrum: ["eig_index", "eigenvalue"],
  almost: ["k", "sup_dev_uncorrected", "sup_dev_corrected"],
  cflow: ["t", "sup_phi", "ding", "mass_err"],
};

export interface Inputs {
  [kind: string]: Table;
}

export function discover(dir: string): Inputs {
  const found: Inputs = {};
  for (const name of readdirSync(dir).sort()) {
    if (!name.endsWith(".csv")) continue;
    const kind = basename(name).split("_")[0];
    if (!(kind in SCHEMAS)) continue;
    const table = readTable(join(dir, name));
    checkSchema(table, SCHEMAS[kind]);
    found[kind] = table; // deterministic: sorted order, last wins per kind
  }
  return found;
}

export interface Summary {
  inputs: Record<string, string>;
  slopes: Record<string, SlopeFit>;
  figures: string[];
}

function maxAcross(cols: number[][]): number[] {
  return cols[0].map((_, i) => Math.max(...cols.map((c) => c[i])));
}

export function summarize(inputs: Inputs): Summary {
  const slopes: Record<string, SlopeFit> = {};
  if (inputs.bergman) {
    const k = column(inputs.bergman, "k");
    const dev = maxAcross(columnsMatching(inputs.bergman, "dev_leading_"));
    slopes.bergman_leading = loglogSlope(k, dev);
  }
  if (inputs.almost) {
    const k = column(inputs.almost, "k");
    slopes.almost_uncorrected = loglogSlope(k, column(inputs.almost, "sup_dev_uncorrected"));
    slopes.almost_corrected = loglogSlope(k, column(inputs.almost, "sup_dev_corrected"));
  }
  const names: Record<string, string> = {};
  for (const [kind, table] of Object.entries(inputs)) names[kind] = table.path;
  return { inputs: names, slopes, figures: [] };
}

// ---------------------------------------------------------------------------
// Figures
// ---------------------------------------------------------------------------

function residualFigure(inputs: Inputs): string | null {
  const series: Series[] = [];
  let idx = 0;
  for (const kind of ["balance", "flow"]) {
    const t = inputs[kind];
    if (!t) continue;
    series.push({
      x: column(t, "iter"),
      y: column(t, "residual"),
      label: `${kind} residual`,
      color: PALETTE[idx++ % PALETTE.length],
    });
  }
  if (!series.length) return null;
  return renderPlot({
    title: "Balanced-condition residual decay",
    xLabel: "iteration / step",
    yLabel: "residual",
    series,
    yLog: true,
  });
}

function bergmanFigure(inputs: Inputs, slopes: Record<string, SlopeFit>): string | null {
  const series: Series[] = [];
  let idx = 0;
  const addFit = (x: number[], fit: SlopeFit, label: string, color: string) => {
    const y = x.map((v) => Math.exp(fit.intercept + fit.slope * Math.log(v)));
    series.push({ x, y, label, color, dash: "5 4" });
  };
  if (inputs.bergman) {
    const k = column(inputs.bergman, "k");
    const dev = maxAcross(columnsMatching(inputs.bergman, "dev_leading_"));
    const color = PALETTE[idx++];
    series.push({ x: k, y: dev, label: "leading-normalized deviation", color, kind: "points" });
    addFit(k, slopes.bergman_leading, `fit slope ${slopes.bergman_leading.slope.toFixed(3)}`, color);
  }
  if (inputs.almost) {
    const k = column(inputs.almost, "k");
    for (const [col, key] of [
      ["sup_dev_uncorrected", "almost_uncorrected"],
      ["sup_dev_corrected", "almost_corrected"],
    ] as const) {
      const color = PALETTE[idx++];
      series.push({ x: k, y: column(inputs.almost, col), label: col, color, kind: "points" });
      addFit(k, slopes[key], `fit slope ${slopes[key].slope.toFixed(3)}`, color);
    }
  }
  if (!series.length) return null;
  return renderPlot({
    title: "Bergman deviation against quantization level",
    xLabel: "k",
    yLabel: "sup deviation",
    series,
    xLog: true,
    yLog: true,
  });
}

function spectrumFigure(inputs: Inputs): string | null {
  const t = inputs.spectrum;
  if (!t) return null;
  const eig = column(t, "eigenvalue");
  const idx = column(t, "eig_index");
  // stem plot of the top of the spectrum (the interesting end)
  const keep = Math.min(eig.length, 24);
  return renderPlot({
    title: "Weighted-Laplacian spectrum (top)",
    xLabel: "eigenvalue index",
    yLabel: "eigenvalue",
    series: [
      {
        x: idx.slice(-keep),
        y: eig.slice(-keep),
        label: "eigenvalues",
        color: PALETTE[0],
        kind: "stem",
      },
    ],
  });
}

function functionalsFigure(inputs: Inputs): string | null {
  const t = inputs.balance ?? inputs.flow;
  if (!t) return null;
  const series: Series[] = [
    { x: column(t, "iter"), y: column(t, "ding_q"), label: "quantized Ding", color: PALETTE[0] },
  ];
  columnsMatching(t, "am_q_").forEach((col, i) => {
    series.push({
      x: column(t, "iter"),
      y: col,
      label: `quantized AM, factor ${i + 1}`,
      color: PALETTE[(i + 1) % PALETTE.length],
    });
  });
  return renderPlot({
    title: "Energy functionals along the iteration",
    xLabel: "iteration / step",
    yLabel: "value",
    series,
  });
}

const FIGURES: Record<string, (inputs: Inputs, slopes: Record<string, SlopeFit>) => string | null> = {
  residual: (i) => residualFigure(i),
  bergman: (i, s) => bergmanFigure(i, s),
  spectrum: (i) => spectrumFigure(i),
  functionals: (i) => functionalsFigure(i),
};

export const FIGURE_NAMES = Object.keys(FIGURES);

export function render(inDir: string, outDir: string, figs: string[]): Summary {
  const inputs = discover(inDir);
  const summary = summarize(inputs);
  mkdirSync(outDir, { recursive: true });
  for (const name of figs) {
    const maker = FIGURES[name];
    if (!maker) throw new SchemaError(`unknown figure '${name}'`);
    const svg = maker(inputs, summary.slopes);
    if (svg === null) {
      throw new SchemaError(`figure '${name}' lacks its input CSVs in ${inDir}`);
    }
    const path = join(outDir, `${name}.svg`);
    writeFileSync(path, svg);
    summary.figures.push(path);
  }
  writeFileSync(join(outDir, "summary.json"), JSON.stringify(summary, null, 2) + "\n");
  return summary;
}
