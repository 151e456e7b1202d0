/** Least-squares slope fitting; the report never recomputes geometry. */

export interface SlopeFit {
  slope: number;
  intercept: number;
  r2: number;
}

export function linearFit(x: number[], y: number[]): SlopeFit {
  const n = x.length;
  if (n < 2) throw new Error("need at least two points to fit a slope");
  const mx = x.reduce((a, b) => a + b, 0) / n;
  const my = y.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  let syy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (x[i] - mx) ** 2;
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) ** 2;
  }
  const slope = sxy / sxx;
  const intercept = my - slope * mx;
  const r2 = syy === 0 ? 1 : (sxy * sxy) / (sxx * syy);
  return { slope, intercept, r2 };
}

/** Slope of log(y) against log(x); requires strictly positive data. */
export function loglogSlope(x: number[], y: number[]): SlopeFit {
  if (y.some((v) => v <= 0) || x.some((v) => v <= 0)) {
    throw new Error("log-log fit needs positive data");
  }
  return linearFit(x.map(Math.log), y.map(Math.log));
}
