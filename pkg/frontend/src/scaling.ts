import { asNumber, parseCsv, requireColumns } from "./csv.js";
import { LinearScale, Margin, Svg, drawAxes, extent } from "./svg.js";
import { colorFor, orderedFilters } from "./theme.js";

export interface ScalingOptions {
    width?: number;
    height?: number;
    xLabel?: string;
    yLabel?: string;
    title?: string;
}

const REQUIRED = ["filter", "U", "loglik_per_unit_time"];

/**
 * Scaling comparison: per-filter log-likelihood per unit-time against the
 * number of units.  Replication scatter plus a per-U mean line per filter;
 * exact-filter rows (kf) are drawn as a dashed reference line.
 */
export function buildScalingFigure(csvText: string,
                                   options: ScalingOptions = {}): string {
    const table = parseCsv(csvText);
    requireColumns(table, REQUIRED);
    const rows = table.rows
        .map((r) => ({
            filter: r["filter"],
            u: asNumber(r["U"]),
            value: asNumber(r["loglik_per_unit_time"]),
        }))
        .filter((r) => Number.isFinite(r.u) && Number.isFinite(r.value));
    if (rows.length === 0) {
        throw new Error("no plottable rows in the scaling CSV");
    }
    const width = options.width ?? 640;
    const height = options.height ?? 420;
    const margin: Margin = { top: 28, right: 130, bottom: 44, left: 64 };
    const filters = orderedFilters(rows.map((r) => r.filter));
    const xs = new LinearScale(
        ...extent(rows.map((r) => r.u)),
        margin.left, width - margin.right);
    const ys = new LinearScale(
        ...extent(rows.map((r) => r.value)),
        height - margin.bottom, margin.top);

    const svg = new Svg(width, height);
    drawAxes(svg, xs, ys, margin, width, height,
             options.xLabel ?? "number of units",
             options.yLabel ?? "log-likelihood per unit-time");
    if (options.title) {
        svg.text(width / 2, 16, options.title, { size: 13 });
    }

    for (const name of filters) {
        const mine = rows.filter((r) => r.filter === name);
        const color = colorFor(name);
        const byU = new Map<number, number[]>();
        for (const r of mine) {
            if (!byU.has(r.u)) byU.set(r.u, []);
            byU.get(r.u)!.push(r.value);
            if (name !== "kf") {
                svg.circle(xs.apply(r.u), ys.apply(r.value), 2.4, color, 0.55);
            }
        }
        const meanPoints: Array<[number, number]> = [...byU.entries()]
            .sort((a, b) => a[0] - b[0])
            .map(([u, vals]) => [
                xs.apply(u),
                ys.apply(vals.reduce((s, v) => s + v, 0) / vals.length),
            ]);
        svg.polyline(meanPoints, color,
                     name === "kf" ? { width: 1.8, dash: "6 3" }
                                   : { width: 1.8 });
    }

    const legendX = width - margin.right + 12;
    filters.forEach((name, i) => {
        const y = margin.top + 16 * i;
        svg.line(legendX, y - 4, legendX + 18, y - 4, colorFor(name),
                 name === "kf" ? { width: 2, dash: "6 3" } : { width: 2 });
        svg.text(legendX + 24, y, name === "kf" ? "kf (exact)" : name,
                 { anchor: "start", size: 11 });
    });
    return svg.render();
}
