import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "./args.js";
import { buildScalingFigure } from "./scaling.js";

try {
    const args = parseArgs(process.argv.slice(2));
    const csv = readFileSync(args.input, "utf-8");
    const svg = buildScalingFigure(csv, {
        title: args.title, xLabel: args.xLabel, yLabel: args.yLabel,
    });
    writeFileSync(args.output, svg);
    console.log(`wrote ${args.output}`);
} catch (err) {
    console.error(`error: ${(err as Error).message}`);
    process.exit(1);
}
