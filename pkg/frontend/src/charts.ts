/**
 * Chart rendering as pure string building.
 *
 * Charts are append-only consumers of stream frames: each function
 * takes the accumulated points and returns a complete SVG document.
 * No DOM access here, so the same code runs in the browser and in
 * node tests. All displayed numbers come from service payloads; the
 * only client-side evaluation is turning fitted parameters into a
 * curve of pixels.
 */

export interface ChartOptions {
  width?: number;
  height?: number;
  margin?: number;
  stroke?: string;
}

const DEFAULTS = { width: 640, height: 220, margin: 34, stroke: "#1f77b4" };

export type Scale = (value: number) => number;

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0;
  // a flat domain maps everything to the middle of the range
  if (span === 0) return () => (r0 + r1) / 2;
  return (v) => r0 + ((v - d0) / span) * (r1 - r0);
}

export function extent(values: readonly number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return lo <= hi ? [lo, hi] : [0, 1];
}

export function polylinePath(xs: readonly number[], ys: readonly number[],
                             sx: Scale, sy: Scale): string {
  if (xs.length !== ys.length) throw new Error("xs and ys differ in length");
  const parts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    const cmd = i === 0 ? "M" : "L";
    parts.push(`${cmd}${sx(xs[i]!).toFixed(2)},${sy(ys[i]!).toFixed(2)}`);
  }
  return parts.join(" ");
}

function frame(width: number, height: number, body: string): string {
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}">` +
    `<rect x="0" y="0" width="${width}" height="${height}" fill="white"/>${body}</svg>`;
}

export interface StripPoint {
  t: number;
  value: number;
}

/** Rolling PL-vs-time chart for the alignment view. */
export function stripChartSvg(points: readonly StripPoint[],
                              options: ChartOptions = {}): string {
  const { width, height, margin, stroke } = { ...DEFAULTS, ...options };
  if (points.length === 0) return frame(width, height, "");
  const ts = points.map((p) => p.t);
  const vs = points.map((p) => p.value);
  const [t0, t1] = extent(ts);
  const [v0, v1] = extent(vs);
  const sx = linearScale(t0, t1, margin, width - margin);
  const sy = linearScale(v0, v1, height - margin, margin);
  const path = polylinePath(ts, vs, sx, sy);
  return frame(width, height,
    `<path d="${path}" fill="none" stroke="${stroke}" stroke-width="1.5"/>`);
}

export interface FitDescription {
  model: string;
  params: Record<string, number>;
}

/** Evaluate a fitted model for the overlay curve (rendering only). */
export function evalFit(fit: FitDescription, xs: readonly number[]): number[] {
  const p = fit.params;
  const dip = (x: number, center: number, fwhm: number, depth: number) => {
    const u = (2 * (x - center)) / fwhm;
    return depth / (1 + u * u);
  };
  switch (fit.model) {
    case "lorentzian-dips":
      if ("center1" in p) {
        return xs.map((x) =>
          p["baseline"]! - dip(x, p["center1"]!, p["fwhm1"]!, p["depth1"]!)
                        - dip(x, p["center2"]!, p["fwhm2"]!, p["depth2"]!));
      }
      return xs.map((x) => p["baseline"]! - dip(x, p["center"]!, p["fwhm"]!, p["depth"]!));
    case "damped-cosine":
      return xs.map((x) =>
        p["offset"]! + p["amplitude"]! *
          Math.cos(2 * Math.PI * p["frequency"]! * x + p["phase"]!) *
          Math.exp(-x / p["decay"]!));
    case "decaying-exponential":
      return xs.map((x) => p["offset"]! + p["amplitude"]! * Math.exp(-x / p["tau"]!));
    case "stretched-exponential":
      return xs.map((x) =>
        p["offset"]! + p["amplitude"]! * Math.exp(-((x / p["tau"]!) ** p["stretch"]!)));
    default:
      throw new Error(`unknown fit model ${fit.model}`);
  }
}

export interface SweepChartInput {
  axis: readonly number[];
  signal: readonly number[];
  reference?: readonly (number | null)[] | null;
  fit?: FitDescription | null;
}

/** Sweep data as dots, optional reference trace, optional fit curve. */
export function sweepChartSvg(input: SweepChartInput,
                              options: ChartOptions = {}): string {
  const { width, height, margin, stroke } = { ...DEFAULTS, ...options };
  const { axis, signal } = input;
  if (axis.length !== signal.length) throw new Error("axis and signal differ in length");
  if (axis.length === 0) return frame(width, height, "");
  const ys = [...signal];
  const refs = (input.reference ?? []).filter((r): r is number => r !== null);
  ys.push(...refs);
  let fitYs: number[] = [];
  let fitXs: number[] = [];
  if (input.fit) {
    const [a0, a1] = extent(axis);
    fitXs = Array.from({ length: 200 }, (_, i) => a0 + ((a1 - a0) * i) / 199);
    fitYs = evalFit(input.fit, fitXs);
    ys.push(...fitYs);
  }
  const [x0, x1] = extent(axis);
  const [y0, y1] = extent(ys);
  const sx = linearScale(x0, x1, margin, width - margin);
  const sy = linearScale(y0, y1, height - margin, margin);

  const body: string[] = [];
  if (input.reference) {
    const pairs = axis
      .map((x, i) => [x, input.reference![i]] as const)
      .filter((pair): pair is readonly [number, number] => pair[1] != null);
    if (pairs.length > 1) {
      body.push(`<path d="${polylinePath(pairs.map((p) => p[0]), pairs.map((p) => p[1]), sx, sy)}"` +
        ` fill="none" stroke="#999" stroke-width="1" stroke-dasharray="4 3"/>`);
    }
  }
  for (let i = 0; i < axis.length; i++) {
    body.push(`<circle cx="${sx(axis[i]!).toFixed(2)}" cy="${sy(signal[i]!).toFixed(2)}"` +
      ` r="2.5" fill="${stroke}"/>`);
  }
  if (input.fit) {
    body.push(`<path d="${polylinePath(fitXs, fitYs, sx, sy)}"` +
      ` fill="none" stroke="#d62728" stroke-width="1.5"/>`);
  }
  return frame(width, height, body.join(""));
}

/** Count rendered data dots; the gap-free check of the run panel. */
export function countDots(svg: string): number {
  return (svg.match(/<circle /g) ?? []).length;
}
