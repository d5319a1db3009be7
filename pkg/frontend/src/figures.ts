/**
 * Figure builders for the documented vortlab CSV kinds. Each builder checks
 * its required columns up front (failing with the missing column's name) and
 * renders a fixed-style SVG string; rendering is a pure function of the
 * input table, so identical CSV bytes give identical image bytes.
 */

import { numbers, prefixedColumns, requireColumns, Table } from "./csv.js";
import { Chart, fmt, linearScale, logDomain, logScale, padDomain, Series, MARGIN, WIDTH, HEIGHT } from "./svg.js";

export type FigureKind =
  | "linf_vs_nu"
  | "balance_residuals"
  | "damped_loglog"
  | "moser_ratio"
  | "ledger_refinement"
  | "modulus";

export const FIGURE_KINDS: FigureKind[] = [
  "linf_vs_nu",
  "balance_residuals",
  "damped_loglog",
  "moser_ratio",
  "ledger_refinement",
  "modulus",
];

export interface PlotOptions {
  title?: string;
  xlim?: [number, number];
  ylim?: [number, number];
}

function range(opt: [number, number] | undefined, fallback: [number, number]): [number, number] {
  return opt ?? fallback;
}

function olsSlope(x: number[], y: number[]): number {
  const n = x.length;
  const mx = x.reduce((a, b) => a + b, 0) / n;
  const my = y.reduce((a, b) => a + b, 0) / n;
  let sxy = 0;
  let sxx = 0;
  for (let i = 0; i < n; i += 1) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

function xr(): [number, number] {
  return [MARGIN.left, WIDTH - MARGIN.right];
}

function yr(): [number, number] {
  return [HEIGHT - MARGIN.bottom, MARGIN.top];
}

export function linfVsNu(table: Table, opt: PlotOptions = {}): string {
  requireColumns(table, ["nu", "E_linf", "se_linf"]);
  const nu = numbers(table, "nu");
  const y = numbers(table, "E_linf");
  const se = numbers(table, "se_linf");
  const ratio = Math.max(...y) / Math.min(...y);
  const chart = new Chart(
    opt.title ?? `stationary sup norm vs viscosity (max/min = ${fmt(ratio)})`,
    "nu",
    "E ||w||_inf",
    logScale(range(opt.xlim, logDomain(nu)), xr()),
    linearScale(range(opt.ylim, padDomain([0, ...y.map((v, i) => v + se[i])])), yr()),
  );
  chart.series({ label: "E||w||_inf", x: nu, y, yerr: se });
  chart.annotate(`uniform-in-nu check: max/min = ${fmt(ratio)} (bound 2)`);
  return chart.render();
}

export function balanceResiduals(table: Table, opt: PlotOptions = {}): string {
  let labels: string[];
  let groups: { label: string; values: number[] }[];
  if (table.columns.includes("res_enstrophy")) {
    requireColumns(table, ["nu", "res_enstrophy", "res_l2"]);
    labels = numbers(table, "nu").map((v) => `nu=${fmt(v)}`);
    groups = [
      { label: "enstrophy balance", values: numbers(table, "res_enstrophy") },
      { label: "L2 balance", values: numbers(table, "res_l2") },
    ];
  } else {
    requireColumns(table, ["alpha", "nu", "res_damped_vorticity", "res_damped_velocity"]);
    const alpha = numbers(table, "alpha");
    const nu = numbers(table, "nu");
    labels = alpha.map((a, i) => `a=${fmt(a)},nu=${fmt(nu[i])}`);
    groups = [
      { label: "vorticity balance", values: numbers(table, "res_damped_vorticity") },
      { label: "velocity balance", values: numbers(table, "res_damped_velocity") },
    ];
  }
  const all = groups.flatMap((g) => g.values).filter(Number.isFinite);
  const span = Math.max(0.12, ...all.map(Math.abs)) * 1.15;
  const chart = new Chart(
    opt.title ?? "stationary balance residuals (lhs - rhs)/rhs",
    "",
    "relative residual",
    linearScale([0, 1], xr()),
    linearScale(range(opt.ylim, [-span, span]), yr()),
  );
  chart.bars(labels, groups);
  chart.legend(groups.map((g) => ({ label: g.label })));
  return chart.render();
}

export function dampedLoglog(table: Table, opt: PlotOptions = {}): string {
  requireColumns(table, ["alpha", "nu", "E_u_l2", "diverged"]);
  const alpha = numbers(table, "alpha");
  const nu = numbers(table, "nu");
  const y = numbers(table, "E_u_l2");
  const diverged = numbers(table, "diverged");
  const alphas = [...new Set(alpha)].sort((a, b) => b - a);
  const ys = y.filter((v, i) => Number.isFinite(v) && !diverged[i] && v > 0);
  const chart = new Chart(
    opt.title ?? "damped model: stationary energy vs viscosity",
    "nu",
    "E ||u||^2",
    logScale(range(opt.xlim, logDomain(nu)), xr()),
    logScale(range(opt.ylim, logDomain(ys)), yr()),
  );
  const legend: { label: string; color?: string; dashed?: boolean }[] = [];
  alphas.forEach((a, i) => {
    const sel = alpha.map((v, j) => [v, j] as const).filter(([v, j]) => v === a && !diverged[j] && y[j] > 0);
    const sx = sel.map(([, j]) => nu[j]);
    const sy = sel.map(([, j]) => y[j]);
    if (sx.length === 0) return;
    let label = `alpha=${fmt(a)}`;
    if (sx.length >= 4) {
      const slope = olsSlope(sx.map(Math.log), sy.map(Math.log));
      label += ` (slope ${fmt(Number(slope.toFixed(3)))})`;
    }
    chart.series({ label, x: sx, y: sy }, i);
    legend.push({ label });
    if (a > 0 && sx.length >= 2) {
      // reference line with the balance-predicted slope 2 alpha
      const x0 = Math.min(...sx);
      const x1 = Math.max(...sx);
      const yref = sy[sx.indexOf(x1)];
      chart.series(
        {
          label: "",
          x: [x0, x1],
          y: [yref * Math.pow(x0 / x1, 2 * a), yref],
          dashed: true,
          markers: false,
          color: "#888",
        },
        i,
      );
    }
  });
  legend.push({ label: "reference slope 2 alpha", color: "#888", dashed: true });
  chart.legend(legend);
  return chart.render();
}

export function moserRatio(table: Table, opt: PlotOptions = {}): string {
  requireColumns(table, ["amplitude", "ratio"]);
  const amp = numbers(table, "amplitude");
  const ratio = numbers(table, "ratio");
  const worst = Math.max(...ratio) / Math.min(...ratio);
  // amplitudes span decades and include zero: use ordinal positions
  const x = amp.map((_, i) => i);
  const chart = new Chart(
    opt.title ?? `regularization ratio vs drift amplitude (max/min = ${fmt(worst)})`,
    "drift amplitude",
    "r(A) = E sup ||w||_inf / ((1 + T^-5/4) rhs)",
    linearScale([-0.5, amp.length - 0.5], xr()),
    linearScale(range(opt.ylim, padDomain([0, ...ratio])), yr()),
    (v) => {
      const i = Math.round(v);
      return i >= 0 && i < amp.length && Math.abs(v - i) < 1e-9 ? fmt(amp[i]) : "";
    },
  );
  chart.series({ label: "r(A)", x, y: ratio });
  chart.annotate(`drift-independence: max/min = ${fmt(worst)} (bound 2)`);
  return chart.render();
}

export function ledgerRefinement(table: Table, opt: PlotOptions = {}): string {
  requireColumns(table, ["p", "dt", "residual"]);
  const p = numbers(table, "p");
  const dt = numbers(table, "dt");
  const resid = numbers(table, "residual").map(Math.abs);
  const ps = [...new Set(p)].sort((a, b) => a - b);
  const chart = new Chart(
    opt.title ?? "L^p ledger residual vs dt (order-1 reference)",
    "dt",
    "|residual|",
    logScale(range(opt.xlim, logDomain(dt)), xr()),
    logScale(range(opt.ylim, logDomain(resid)), yr()),
  );
  const legend: { label: string; color?: string; dashed?: boolean }[] = [];
  ps.forEach((pv, i) => {
    const sel = p.map((v, j) => j).filter((j) => p[j] === pv);
    const sx = sel.map((j) => dt[j]);
    const sy = sel.map((j) => resid[j]);
    chart.series({ label: `p=${fmt(pv)}`, x: sx, y: sy }, i);
    legend.push({ label: `p=${fmt(pv)}` });
    const xmax = Math.max(...sx);
    const ymax = sy[sx.indexOf(xmax)];
    chart.series(
      {
        label: "",
        x: sx,
        y: sx.map((x) => (ymax * x) / xmax),
        dashed: true,
        markers: false,
        color: "#888",
      },
      i,
    );
  });
  legend.push({ label: "slope 1 reference", color: "#888", dashed: true });
  chart.legend(legend);
  return chart.render();
}

export function modulus(table: Table, opt: PlotOptions = {}): string {
  requireColumns(table, ["amplitude", "c_fit"]);
  const radii = prefixedColumns(table, "osc_");
  if (radii.length === 0) {
    throw new Error("missing column 'osc_<r>' (no per-radius oscillation columns)");
  }
  radii.sort((a, b) => a.value - b.value);
  const amp = numbers(table, "amplitude");
  const chart = new Chart(
    opt.title ?? "modulus of continuity: osc(r) sqrt(log 1/r)",
    "r",
    "osc(r) sqrt(log 1/r)",
    logScale(range(opt.xlim, logDomain(radii.map((r) => r.value))), xr()),
    linearScale(
      range(opt.ylim, (() => {
        const all: number[] = [0];
        for (const rc of radii) {
          for (const v of numbers(table, rc.name)) {
            all.push(v * Math.sqrt(Math.log(1 / rc.value)));
          }
        }
        return padDomain(all);
      })()),
      yr(),
    ),
  );
  const legend: { label: string }[] = [];
  amp.forEach((a, i) => {
    const x = radii.map((r) => r.value);
    const y = radii.map((r) => numbers(table, r.name)[i] * Math.sqrt(Math.log(1 / r.value)));
    chart.series({ label: `A=${fmt(a)}`, x, y }, i);
    legend.push({ label: `A=${fmt(a)}` });
  });
  chart.legend(legend);
  return chart.render();
}

const BUILDERS: Record<FigureKind, (t: Table, o: PlotOptions) => string> = {
  linf_vs_nu: linfVsNu,
  balance_residuals: balanceResiduals,
  damped_loglog: dampedLoglog,
  moser_ratio: moserRatio,
  ledger_refinement: ledgerRefinement,
  modulus,
};

export function renderFigure(kind: FigureKind, table: Table, opt: PlotOptions = {}): string {
  const builder = BUILDERS[kind];
  if (!builder) {
    throw new Error(`unknown figure kind '${kind}'`);
  }
  return builder(table, opt);
}

/** The default figure kind for a CSV, from its # kind= metadata. */
export function defaultKind(table: Table): FigureKind {
  switch (table.kind) {
    case "inviscid":
      return "linf_vs_nu";
    case "damped":
      return "damped_loglog";
    case "moser":
      return "moser_ratio";
    case "lp_ledger":
      return "ledger_refinement";
    case "elliptic":
      return "modulus";
    default:
      throw new Error(`cannot infer figure kind from CSV metadata (kind=${table.kind})`);
  }
}
