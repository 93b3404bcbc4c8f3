/** Minimal deterministic SVG assembly: pure string building, no DOM. */

export interface Margin {
    top: number;
    right: number;
    bottom: number;
    left: number;
}

const FMT = (v: number): string => {
    if (!Number.isFinite(v)) return "0";
    return Number(v.toPrecision(6)).toString();
};

export class LinearScale {
    constructor(
        readonly d0: number,
        readonly d1: number,
        readonly r0: number,
        readonly r1: number,
    ) {}

    apply(v: number): number {
        if (this.d1 === this.d0) return (this.r0 + this.r1) / 2;
        return this.r0 + ((v - this.d0) / (this.d1 - this.d0)) * (this.r1 - this.r0);
    }

    ticks(count = 5): number[] {
        const span = this.d1 - this.d0;
        if (span <= 0) return [this.d0];
        const step = niceStep(span / count);
        const start = Math.ceil(this.d0 / step) * step;
        const out: number[] = [];
        for (let v = start; v <= this.d1 + 1e-9 * step; v += step) {
            out.push(Number(v.toPrecision(12)));
        }
        return out;
    }
}

function niceStep(raw: number): number {
    const mag = Math.pow(10, Math.floor(Math.log10(raw)));
    const norm = raw / mag;
    if (norm < 1.5) return mag;
    if (norm < 3.5) return 2 * mag;
    if (norm < 7.5) return 5 * mag;
    return 10 * mag;
}

export function extent(values: number[], pad = 0.05): [number, number] {
    const finite = values.filter(Number.isFinite);
    if (finite.length === 0) return [0, 1];
    let lo = Math.min(...finite);
    let hi = Math.max(...finite);
    if (lo === hi) {
        lo -= 1;
        hi += 1;
    }
    const span = hi - lo;
    return [lo - pad * span, hi + pad * span];
}

export class Svg {
    private parts: string[] = [];

    constructor(readonly width: number, readonly height: number) {
        this.parts.push(
            `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
            `height="${height}" viewBox="0 0 ${width} ${height}" ` +
            `font-family="Helvetica, Arial, sans-serif">`,
            `<rect width="${width}" height="${height}" fill="white"/>`,
        );
    }

    line(x1: number, y1: number, x2: number, y2: number, stroke: string,
         opts: { width?: number; dash?: string } = {}): void {
        const dash = opts.dash ? ` stroke-dasharray="${opts.dash}"` : "";
        this.parts.push(
            `<line x1="${FMT(x1)}" y1="${FMT(y1)}" x2="${FMT(x2)}" ` +
            `y2="${FMT(y2)}" stroke="${stroke}" ` +
            `stroke-width="${opts.width ?? 1}"${dash}/>`,
        );
    }

    polyline(points: Array<[number, number]>, stroke: string,
             opts: { width?: number; dash?: string } = {}): void {
        if (points.length === 0) return;
        const pts = points.map(([x, y]) => `${FMT(x)},${FMT(y)}`).join(" ");
        const dash = opts.dash ? ` stroke-dasharray="${opts.dash}"` : "";
        this.parts.push(
            `<polyline points="${pts}" fill="none" stroke="${stroke}" ` +
            `stroke-width="${opts.width ?? 1.5}"${dash}/>`,
        );
    }

    circle(x: number, y: number, r: number, fill: string, opacity = 1): void {
        const op = opacity < 1 ? ` fill-opacity="${FMT(opacity)}"` : "";
        this.parts.push(
            `<circle cx="${FMT(x)}" cy="${FMT(y)}" r="${r}" fill="${fill}"${op}/>`,
        );
    }

    text(x: number, y: number, content: string,
         opts: { size?: number; anchor?: string; fill?: string;
                 rotate?: number } = {}): void {
        const rot = opts.rotate
            ? ` transform="rotate(${opts.rotate} ${FMT(x)} ${FMT(y)})"`
            : "";
        this.parts.push(
            `<text x="${FMT(x)}" y="${FMT(y)}" font-size="${opts.size ?? 11}" ` +
            `text-anchor="${opts.anchor ?? "middle"}" ` +
            `fill="${opts.fill ?? "#222"}"${rot}>${escapeXml(content)}</text>`,
        );
    }

    render(): string {
        return this.parts.join("\n") + "\n</svg>\n";
    }
}

function escapeXml(s: string): string {
    return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function drawAxes(svg: Svg, xs: LinearScale, ys: LinearScale,
                         margin: Margin, width: number, height: number,
                         xLabel: string, yLabel: string): void {
    const x0 = margin.left;
    const x1 = width - margin.right;
    const y0 = height - margin.bottom;
    const y1 = margin.top;
    svg.line(x0, y0, x1, y0, "#222");
    svg.line(x0, y0, x0, y1, "#222");
    for (const t of xs.ticks()) {
        const px = xs.apply(t);
        svg.line(px, y0, px, y0 + 4, "#222");
        svg.text(px, y0 + 16, String(t));
    }
    for (const t of ys.ticks()) {
        const py = ys.apply(t);
        svg.line(x0 - 4, py, x0, py, "#222");
        svg.text(x0 - 7, py + 3.5, String(t), { anchor: "end", size: 10 });
    }
    svg.text((x0 + x1) / 2, height - 8, xLabel, { size: 12 });
    svg.text(14, (y0 + y1) / 2, yLabel, { size: 12, rotate: -90 });
}
