/** Self-contained SVG line/stem plots: no DOM, no dependencies, just strings. */

export interface Series {
  x: number[];
  y: number[];
  label: string;
  color: string;
  kind?: "line" | "stem" | "points";
  dash?: string;
}

export interface PlotSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  xLog?: boolean;
  yLog?: boolean;
  width?: number;
  height?: number;
}

const MARGIN = { top: 36, right: 24, bottom: 46, left: 64 };

function niceTicks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / n;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= n) ?? mag * 10;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) out.push(v);
  return out;
}

function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.floor(Math.log10(lo)); e <= Math.ceil(Math.log10(hi)); e++) {
    out.push(Math.pow(10, e));
  }
  return out.filter((v) => v >= lo / 1.001 && v <= hi * 1.001);
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0).replace("+", "");
  return String(parseFloat(v.toPrecision(4)));
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderPlot(spec: PlotSpec): string {
  const width = spec.width ?? 720;
  const height = spec.height ?? 460;
  const iw = width - MARGIN.left - MARGIN.right;
  const ih = height - MARGIN.top - MARGIN.bottom;

  const xs = spec.series.flatMap((s) => s.x);
  const ys = spec.series.flatMap((s) => s.y);
  const xVals = spec.xLog ? xs.filter((v) => v > 0) : xs;
  const yVals = spec.yLog ? ys.filter((v) => v > 0) : ys;
  let xLo = Math.min(...xVals);
  let xHi = Math.max(...xVals);
  let yLo = Math.min(...yVals);
  let yHi = Math.max(...yVals);
  if (xLo === xHi) [xLo, xHi] = [xLo - 1, xHi + 1];
  if (yLo === yHi) [yLo, yHi] = [yLo - 1, yHi + 1];
  if (!spec.yLog) {
    const pad = 0.06 * (yHi - yLo);
    yLo -= pad;
    yHi += pad;
  }

  const sx = (v: number) =>
    MARGIN.left +
    (spec.xLog
      ? ((Math.log10(v) - Math.log10(xLo)) / (Math.log10(xHi) - Math.log10(xLo))) * iw
      : ((v - xLo) / (xHi - xLo)) * iw);
  const sy = (v: number) =>
    MARGIN.top +
    ih -
    (spec.yLog
      ? ((Math.log10(v) - Math.log10(yLo)) / (Math.log10(yHi) - Math.log10(yLo))) * ih
      : ((v - yLo) / (yHi - yLo)) * ih);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-size="15" ` +
      `font-weight="bold">${esc(spec.title)}</text>`,
  );

  const xTicks = spec.xLog ? logTicks(xLo, xHi) : niceTicks(xLo, xHi);
  const yTicks = spec.yLog ? logTicks(yLo, yHi) : niceTicks(yLo, yHi);
  for (const v of xTicks) {
    const x = sx(v);
    parts.push(
      `<line x1="${x.toFixed(1)}" y1="${MARGIN.top}" x2="${x.toFixed(1)}" ` +
        `y2="${MARGIN.top + ih}" stroke="#ddd"/>`,
      `<text x="${x.toFixed(1)}" y="${MARGIN.top + ih + 18}" text-anchor="middle" ` +
        `font-size="11">${fmtTick(v)}</text>`,
    );
  }
  for (const v of yTicks) {
    const y = sy(v);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y.toFixed(1)}" x2="${MARGIN.left + iw}" ` +
        `y2="${y.toFixed(1)}" stroke="#ddd"/>`,
      `<text x="${MARGIN.left - 6}" y="${(y + 4).toFixed(1)}" text-anchor="end" ` +
        `font-size="11">${fmtTick(v)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${iw}" height="${ih}" ` +
      `fill="none" stroke="#333"/>`,
    `<text x="${MARGIN.left + iw / 2}" y="${height - 8}" text-anchor="middle" ` +
      `font-size="12">${esc(spec.xLabel)}</text>`,
    `<text x="16" y="${MARGIN.top + ih / 2}" text-anchor="middle" font-size="12" ` +
      `transform="rotate(-90 16 ${MARGIN.top + ih / 2})">${esc(spec.yLabel)}</text>`,
  );

  for (const s of spec.series) {
    const pts = s.x
      .map((xv, i) => [xv, s.y[i]] as const)
      .filter(([xv, yv]) => (!spec.xLog || xv > 0) && (!spec.yLog || yv > 0));
    if (s.kind === "stem") {
      const y0 = sy(spec.yLog ? yLo : Math.max(yLo, Math.min(0, yHi)));
      for (const [xv, yv] of pts) {
        parts.push(
          `<line x1="${sx(xv).toFixed(1)}" y1="${y0.toFixed(1)}" ` +
            `x2="${sx(xv).toFixed(1)}" y2="${sy(yv).toFixed(1)}" ` +
            `stroke="${s.color}" stroke-width="1.2"/>`,
          `<circle cx="${sx(xv).toFixed(1)}" cy="${sy(yv).toFixed(1)}" r="2.4" ` +
            `fill="${s.color}"/>`,
        );
      }
    } else if (s.kind === "points") {
      for (const [xv, yv] of pts) {
        parts.push(
          `<circle cx="${sx(xv).toFixed(1)}" cy="${sy(yv).toFixed(1)}" r="3" ` +
            `fill="${s.color}"/>`,
        );
      }
    } else {
      const d = pts
        .map(([xv, yv], i) => `${i === 0 ? "M" : "L"}${sx(xv).toFixed(2)} ${sy(yv).toFixed(2)}`)
        .join(" ");
      const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
      parts.push(
        `<path d="${d}" fill="none" stroke="${s.color}" stroke-width="1.8"${dash}/>`,
      );
    }
  }

  spec.series.forEach((s, i) => {
    const y = MARGIN.top + 14 + 16 * i;
    const x = MARGIN.left + iw - 160;
    parts.push(
      `<line x1="${x}" y1="${y - 4}" x2="${x + 22}" y2="${y - 4}" ` +
        `stroke="${s.color}" stroke-width="2"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`,
      `<text x="${x + 28}" y="${y}" font-size="11">${esc(s.label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n");
}
