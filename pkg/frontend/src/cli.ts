#!/usr/bin/env node
/**
 * vortplot: render a vortlab sweep CSV to a deterministic SVG figure.
 *
 *   vortplot <input.csv> <output.svg> [--kind <kind>] [--title <t>]
 *            [--xlim a,b] [--ylim a,b]
 *
 * The figure kind defaults to the CSV's own `# kind=` metadata. Exits 1 on
 * unknown arguments or missing columns, naming the offending column.
 */

import { writeFileSync } from "node:fs";
import process from "node:process";

import { readTable } from "./csv.js";
import { defaultKind, FIGURE_KINDS, FigureKind, PlotOptions, renderFigure } from "./figures.js";

interface Args {
  input: string;
  output: string;
  kind?: FigureKind;
  options: PlotOptions;
}

function parseArgs(argv: string[]): Args {
  const positional: string[] = [];
  const options: PlotOptions = {};
  let kind: FigureKind | undefined;
  for (let i = 0; i < argv.length; i += 1) {
    const a = argv[i];
    const next = (): string => {
      i += 1;
      if (i >= argv.length) throw new Error(`flag ${a} needs a value`);
      return argv[i];
    };
    if (a === "--kind") {
      const k = next() as FigureKind;
      if (!FIGURE_KINDS.includes(k)) {
        throw new Error(`unknown figure kind '${k}' (choose from ${FIGURE_KINDS.join(", ")})`);
      }
      kind = k;
    } else if (a === "--title") {
      options.title = next();
    } else if (a === "--xlim" || a === "--ylim") {
      const parts = next().split(",").map(Number);
      if (parts.length !== 2 || parts.some((v) => !Number.isFinite(v))) {
        throw new Error(`${a} expects two comma-separated numbers`);
      }
      const lim: [number, number] = [parts[0], parts[1]];
      if (a === "--xlim") options.xlim = lim;
      else options.ylim = lim;
    } else if (a.startsWith("--")) {
      throw new Error(`unknown flag ${a}`);
    } else {
      positional.push(a);
    }
  }
  if (positional.length !== 2) {
    throw new Error("usage: vortplot <input.csv> <output.svg> [--kind k] [--title t] [--xlim a,b] [--ylim a,b]");
  }
  return { input: positional[0], output: positional[1], kind, options };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
  try {
    const table = readTable(args.input);
    const kind = args.kind ?? defaultKind(table);
    const svg = renderFigure(kind, table, args.options);
    writeFileSync(args.output, svg);
    console.log(`${kind}: ${args.input} -> ${args.output}`);
    return 0;
  } catch (err) {
    console.error(`error: ${args.input}: ${(err as Error).message}`);
    return 1;
  }
}

const invoked = process.argv[1] ?? "";
if (invoked.endsWith("cli.js") || invoked.endsWith("vortplot")) {
  process.exit(main(process.argv.slice(2)));
}
