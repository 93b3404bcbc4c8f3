/** Fixed series ordering and colors so figures are comparable across runs. */

export const FILTER_ORDER = [
    "kf", "ubf", "abf", "abfir", "girf", "pf", "bpf", "enkf",
] as const;

export const FILTER_COLORS: Record<string, string> = {
    kf: "#000000",
    ubf: "#1b9e77",
    abf: "#d95f02",
    abfir: "#7570b3",
    girf: "#e7298a",
    pf: "#66a61e",
    bpf: "#e6ab02",
    enkf: "#386cb0",
};

export function colorFor(name: string): string {
    return FILTER_COLORS[name] ?? "#888888";
}

export function orderedFilters(present: Iterable<string>): string[] {
    const set = new Set(present);
    const known = FILTER_ORDER.filter((f) => set.has(f));
    const extra = [...set].filter(
        (f) => !(FILTER_ORDER as readonly string[]).includes(f)).sort();
    return [...known, ...extra];
}
