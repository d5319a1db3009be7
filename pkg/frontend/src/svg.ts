/**
 * Minimal deterministic SVG chart primitives: linear/log scales, tick
 * generation, axes, polylines, markers, bars, and error bars. Everything is
 * assembled from data with fixed formatting, so a given input always renders
 * to the identical byte sequence (no timestamps, ids, or environment text).
 */

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { left: 72, right: 24, top: 44, bottom: 52 };

export const PALETTE = [
  "#1f6fb4",
  "#d1495b",
  "#2e8b57",
  "#e0a200",
  "#7451a6",
  "#00797d",
  "#8a5a44",
];

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "nan";
  if (x === 0) return "0";
  const a = Math.abs(x);
  if (a >= 1e4 || a < 1e-3) {
    return x.toExponential(2).replace("e+", "e").replace(/e(-?)0*(\d)/, "e$1$2");
  }
  return String(Number(x.toPrecision(6)));
}

const px = (x: number): string => x.toFixed(2);

export interface Scale {
  (x: number): number;
  ticks(): number[];
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  let [d0, d1] = domain;
  if (d0 === d1) {
    d0 -= 1;
    d1 += 1;
  }
  const f = ((x: number) => range[0] + ((x - d0) / (d1 - d0)) * (range[1] - range[0])) as Scale;
  f.domain = [d0, d1];
  f.ticks = () => {
    const span = d1 - d0;
    const step = Math.pow(10, Math.floor(Math.log10(span / 4)));
    const mult = span / step > 20 ? 5 : span / step > 8 ? 2 : 1;
    const s = step * mult;
    const start = Math.ceil(d0 / s) * s;
    const out: number[] = [];
    for (let v = start; v <= d1 + 1e-12 * Math.abs(s); v += s) {
      out.push(Math.abs(v) < 1e-12 * Math.abs(s) ? 0 : v);
    }
    return out;
  };
  return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const d0 = Math.log10(domain[0]);
  const d1 = Math.log10(domain[1]);
  const base = linearScale([d0, d1], range);
  const f = ((x: number) => base(Math.log10(x))) as Scale;
  f.domain = [domain[0], domain[1]];
  f.ticks = () => {
    const out: number[] = [];
    for (let e = Math.ceil(d0 - 1e-9); e <= Math.floor(d1 + 1e-9); e += 1) {
      out.push(Math.pow(10, e));
    }
    if (out.length < 2) return [domain[0], domain[1]];
    return out;
  };
  return f;
}

export function padDomain(values: number[], pad = 0.08): [number, number] {
  const finite = values.filter(Number.isFinite);
  if (finite.length === 0) return [0, 1];
  let lo = Math.min(...finite);
  let hi = Math.max(...finite);
  if (lo === hi) {
    lo -= Math.abs(lo) * 0.5 + 1;
    hi += Math.abs(hi) * 0.5 + 1;
  }
  const span = hi - lo;
  return [lo - pad * span, hi + pad * span];
}

export function logDomain(values: number[]): [number, number] {
  const pos = values.filter((v) => Number.isFinite(v) && v > 0);
  if (pos.length === 0) return [0.1, 10];
  const lo = Math.min(...pos);
  const hi = Math.max(...pos);
  return [lo / 1.3, hi * 1.3];
}

export interface Series {
  label: string;
  x: number[];
  y: number[];
  yerr?: number[];
  color?: string;
  markers?: boolean;
  dashed?: boolean;
}

export class Chart {
  private parts: string[] = [];
  readonly x0 = MARGIN.left;
  readonly x1 = WIDTH - MARGIN.right;
  readonly y0 = HEIGHT - MARGIN.bottom;
  readonly y1 = MARGIN.top;

  constructor(
    readonly title: string,
    readonly xlabel: string,
    readonly ylabel: string,
    readonly xs: Scale,
    readonly ys: Scale,
    readonly xTickFmt: (v: number) => string = fmt,
  ) {
    this.axes();
  }

  private push(s: string): void {
    this.parts.push(s);
  }

  private axes(): void {
    this.push(
      `<rect x="${px(this.x0)}" y="${px(this.y1)}" width="${px(this.x1 - this.x0)}" ` +
        `height="${px(this.y0 - this.y1)}" fill="none" stroke="#333" stroke-width="1"/>`,
    );
    for (const t of this.xs.ticks()) {
      const x = this.xs(t);
      if (x < this.x0 - 0.5 || x > this.x1 + 0.5) continue;
      this.push(`<line x1="${px(x)}" y1="${px(this.y0)}" x2="${px(x)}" y2="${px(this.y0 + 5)}" stroke="#333"/>`);
      this.push(
        `<text x="${px(x)}" y="${px(this.y0 + 18)}" text-anchor="middle" class="tick">${this.xTickFmt(t)}</text>`,
      );
      this.push(
        `<line x1="${px(x)}" y1="${px(this.y0)}" x2="${px(x)}" y2="${px(this.y1)}" stroke="#ddd" stroke-width="0.5"/>`,
      );
    }
    for (const t of this.ys.ticks()) {
      const y = this.ys(t);
      if (y > this.y0 + 0.5 || y < this.y1 - 0.5) continue;
      this.push(`<line x1="${px(this.x0 - 5)}" y1="${px(y)}" x2="${px(this.x0)}" y2="${px(y)}" stroke="#333"/>`);
      this.push(
        `<text x="${px(this.x0 - 8)}" y="${px(y + 4)}" text-anchor="end" class="tick">${fmt(t)}</text>`,
      );
      this.push(
        `<line x1="${px(this.x0)}" y1="${px(y)}" x2="${px(this.x1)}" y2="${px(y)}" stroke="#ddd" stroke-width="0.5"/>`,
      );
    }
  }

  series(s: Series, index = 0): void {
    const color = s.color ?? PALETTE[index % PALETTE.length];
    const pts = s.x.map((x, i) => [this.xs(x), this.ys(s.y[i])] as const);
    const ok = pts.filter((p) => Number.isFinite(p[0]) && Number.isFinite(p[1]));
    if (ok.length > 1) {
      const d = ok.map((p, i) => `${i === 0 ? "M" : "L"}${px(p[0])} ${px(p[1])}`).join(" ");
      const dash = s.dashed ? ' stroke-dasharray="6 4"' : "";
      this.push(`<path d="${d}" fill="none" stroke="${color}" stroke-width="1.6"${dash}/>`);
    }
    if (s.markers !== false) {
      for (const p of ok) {
        this.push(`<circle cx="${px(p[0])}" cy="${px(p[1])}" r="3" fill="${color}"/>`);
      }
    }
    if (s.yerr) {
      for (let i = 0; i < s.x.length; i += 1) {
        const x = this.xs(s.x[i]);
        const lo = this.ys(s.y[i] - s.yerr[i]);
        const hi = this.ys(s.y[i] + s.yerr[i]);
        if (![x, lo, hi].every(Number.isFinite)) continue;
        this.push(`<line x1="${px(x)}" y1="${px(lo)}" x2="${px(x)}" y2="${px(hi)}" stroke="${color}" stroke-width="1"/>`);
        for (const yy of [lo, hi]) {
          this.push(`<line x1="${px(x - 3)}" y1="${px(yy)}" x2="${px(x + 3)}" y2="${px(yy)}" stroke="${color}" stroke-width="1"/>`);
        }
      }
    }
  }

  bars(labels: string[], groups: { label: string; values: number[] }[]): void {
    const n = labels.length;
    const g = groups.length;
    const slot = (this.x1 - this.x0) / Math.max(n, 1);
    const barw = (slot * 0.72) / Math.max(g, 1);
    const zero = this.ys(0);
    groups.forEach((grp, gi) => {
      const color = PALETTE[gi % PALETTE.length];
      grp.values.forEach((v, i) => {
        if (!Number.isFinite(v)) return;
        const xc = this.x0 + (i + 0.5) * slot - (g * barw) / 2 + gi * barw;
        const y = this.ys(v);
        const top = Math.min(y, zero);
        const h = Math.abs(y - zero);
        this.push(
          `<rect x="${px(xc)}" y="${px(top)}" width="${px(barw)}" height="${px(h)}" fill="${color}" fill-opacity="0.85"/>`,
        );
      });
    });
    labels.forEach((lab, i) => {
      const x = this.x0 + (i + 0.5) * slot;
      this.push(`<text x="${px(x)}" y="${px(this.y0 + 18)}" text-anchor="middle" class="tick">${lab}</text>`);
    });
    this.push(`<line x1="${px(this.x0)}" y1="${px(zero)}" x2="${px(this.x1)}" y2="${px(zero)}" stroke="#333" stroke-width="1"/>`);
  }

  legend(entries: { label: string; color?: string; dashed?: boolean }[]): void {
    entries.forEach((e, i) => {
      const color = e.color ?? PALETTE[i % PALETTE.length];
      const y = this.y1 + 14 + 16 * i;
      const x = this.x1 - 150;
      const dash = e.dashed ? ' stroke-dasharray="6 4"' : "";
      this.push(`<line x1="${px(x)}" y1="${px(y - 4)}" x2="${px(x + 22)}" y2="${px(y - 4)}" stroke="${color}" stroke-width="2"${dash}/>`);
      this.push(`<text x="${px(x + 28)}" y="${px(y)}" class="tick">${e.label}</text>`);
    });
  }

  annotate(text: string, line = 0): void {
    this.push(
      `<text x="${px(this.x0 + 8)}" y="${px(this.y1 + 16 + 15 * line)}" class="note">${text}</text>`,
    );
  }

  render(): string {
    const head =
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}">` +
      `<style>text{font-family:monospace;font-size:12px;fill:#222}` +
      `.title{font-size:14px}.tick{font-size:11px}.note{font-size:11px;fill:#444}</style>` +
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>` +
      `<text x="${px(WIDTH / 2)}" y="22" text-anchor="middle" class="title">${this.title}</text>` +
      `<text x="${px((this.x0 + this.x1) / 2)}" y="${px(HEIGHT - 12)}" text-anchor="middle">${this.xlabel}</text>` +
      `<text x="18" y="${px((this.y0 + this.y1) / 2)}" text-anchor="middle" ` +
      `transform="rotate(-90 18 ${px((this.y0 + this.y1) / 2)})">${this.ylabel}</text>`;
    return head + this.parts.join("") + "</svg>\n";
  }
}
