import Papa from "papaparse";

export interface Table {
    columns: string[];
    rows: Record<string, string>[];
}

export class SchemaError extends Error {}

/** Parse a result CSV into string-valued records (header required). */
export function parseCsv(text: string): Table {
    const parsed = Papa.parse<Record<string, string>>(text.trim(), {
        header: true,
        skipEmptyLines: true,
    });
    if (parsed.errors.length > 0) {
        const first = parsed.errors[0];
        throw new SchemaError(`CSV parse error: ${first.message} (row ${first.row})`);
    }
    const columns = parsed.meta.fields ?? [];
    return { columns, rows: parsed.data };
}

/** Assert that every required column is present; lists what is missing. */
export function requireColumns(table: Table, required: string[]): void {
    const missing = required.filter((c) => !table.columns.includes(c));
    if (missing.length > 0) {
        throw new SchemaError(
            `missing required columns: ${missing.join(", ")} ` +
            `(found: ${table.columns.join(", ")})`,
        );
    }
}

export function asNumber(value: string): number {
    const v = Number(value);
    if (!Number.isFinite(v)) {
        return NaN;
    }
    return v;
}
