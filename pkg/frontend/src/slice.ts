import { asNumber, parseCsv, requireColumns } from "./csv.js";
import { LinearScale, Margin, Svg, drawAxes, extent } from "./svg.js";

export interface SliceOptions {
    width?: number;
    height?: number;
    xLabel?: string;
    yLabel?: string;
    title?: string;
}

const REQUIRED = ["row_type", "profiled_value", "loglik", "mc_se", "smoothed",
                  "interval_lo", "interval_hi", "true_value"];

/**
 * Slice / profile figure: evaluated points with Monte Carlo error bars, the
 * smoothed curve, the adjusted confidence interval as vertical lines, and
 * the simulating value (when recorded) as a dashed line.
 */
export function buildSliceFigure(csvText: string,
                                 options: SliceOptions = {}): string {
    const table = parseCsv(csvText);
    requireColumns(table, REQUIRED);
    const points = table.rows
        .filter((r) => r["row_type"] === "point")
        .map((r) => ({
            g: asNumber(r["profiled_value"]),
            ll: asNumber(r["loglik"]),
            se: asNumber(r["mc_se"]),
            smooth: r["smoothed"] === "" ? NaN : asNumber(r["smoothed"]),
        }))
        .filter((p) => Number.isFinite(p.g) && Number.isFinite(p.ll))
        .sort((a, b) => a.g - b.g);
    if (points.length === 0) {
        throw new Error("no point rows in the slice CSV");
    }
    const intervalRow = table.rows.find((r) => r["row_type"] === "interval");
    const unbounded = intervalRow === undefined
        || intervalRow["interval_lo"] === "unbounded"
        || intervalRow["interval_lo"] === "";
    const lo = unbounded ? NaN : asNumber(intervalRow!["interval_lo"]);
    const hi = unbounded ? NaN : asNumber(intervalRow!["interval_hi"]);
    const trueRaw = (intervalRow ?? table.rows[0])["true_value"];
    const trueValue = trueRaw === "" ? NaN : asNumber(trueRaw);

    const width = options.width ?? 560;
    const height = options.height ?? 400;
    const margin: Margin = { top: 30, right: 24, bottom: 44, left: 70 };
    const xVals = points.map((p) => p.g)
        .concat(Number.isFinite(lo) ? [lo] : [])
        .concat(Number.isFinite(hi) ? [hi] : [])
        .concat(Number.isFinite(trueValue) ? [trueValue] : []);
    const yVals = points.flatMap((p) => {
        const bars = Number.isFinite(p.se) && p.se > 0
            ? [p.ll - 1.96 * p.se, p.ll + 1.96 * p.se] : [];
        const smooth = Number.isFinite(p.smooth) ? [p.smooth] : [];
        return [p.ll, ...bars, ...smooth];
    });
    const xs = new LinearScale(...extent(xVals), margin.left,
                               width - margin.right);
    const ys = new LinearScale(...extent(yVals), height - margin.bottom,
                               margin.top);

    const svg = new Svg(width, height);
    drawAxes(svg, xs, ys, margin, width, height,
             options.xLabel ?? "profiled parameter",
             options.yLabel ?? "log-likelihood");
    if (options.title) {
        svg.text(width / 2, 16, options.title, { size: 13 });
    }

    const yTop = margin.top;
    const yBottom = height - margin.bottom;
    if (Number.isFinite(trueValue)) {
        const px = xs.apply(trueValue);
        svg.line(px, yTop, px, yBottom, "#2166ac", { dash: "4 3" });
    }
    if (!unbounded) {
        for (const v of [lo, hi]) {
            const px = xs.apply(v);
            svg.line(px, yTop, px, yBottom, "#b2182b", { width: 1.5 });
        }
    } else {
        svg.text(width - margin.right, yTop + 10,
                 "interval unbounded", { anchor: "end", size: 10,
                                         fill: "#b2182b" });
    }

    const smoothPts: Array<[number, number]> = points
        .filter((p) => Number.isFinite(p.smooth))
        .map((p) => [xs.apply(p.g), ys.apply(p.smooth)]);
    svg.polyline(smoothPts, "#555555", { width: 1.5 });

    for (const p of points) {
        const px = xs.apply(p.g);
        if (Number.isFinite(p.se) && p.se > 0) {
            svg.line(px, ys.apply(p.ll - 1.96 * p.se),
                     px, ys.apply(p.ll + 1.96 * p.se), "#d95f02");
        }
        svg.circle(px, ys.apply(p.ll), 3, "#d95f02");
    }
    return svg.render();
}
