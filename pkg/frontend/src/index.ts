export { parseCsv, readTable, requireColumns, numbers, MissingColumnError } from "./csv.js";
export { renderFigure, defaultKind, FIGURE_KINDS } from "./figures.js";
export type { FigureKind, PlotOptions } from "./figures.js";
export { main } from "./cli.js";
