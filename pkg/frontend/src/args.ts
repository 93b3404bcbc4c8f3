export interface CliArgs {
    input: string;
    output: string;
    title?: string;
    xLabel?: string;
    yLabel?: string;
}

export function parseArgs(argv: string[]): CliArgs {
    const out: Partial<CliArgs> = {};
    for (let i = 0; i < argv.length; i += 1) {
        const flag = argv[i];
        const next = () => {
            i += 1;
            if (i >= argv.length) throw new Error(`${flag} needs a value`);
            return argv[i];
        };
        switch (flag) {
            case "--in": out.input = next(); break;
            case "--out": out.output = next(); break;
            case "--title": out.title = next(); break;
            case "--x-label": out.xLabel = next(); break;
            case "--y-label": out.yLabel = next(); break;
            default: throw new Error(`unknown flag: ${flag}`);
        }
    }
    if (!out.input || !out.output) {
        throw new Error("usage: --in CSV --out SVG [--title T] " +
                        "[--x-label X] [--y-label Y]");
    }
    return out as CliArgs;
}
