/* tslint:disable */
/* eslint-disable */

/**
 * A Heisenberg geodesic with its length.
 */
export class Geodesic {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    length(): number;
    /**
     * Interleaved `x0, y0, x1, y1, ..`.
     */
    points(): Float64Array;
}

/**
 * A simulated path with its greedy partition.
 */
export class PathView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Levy area of the whole path.
     */
    area(): number;
    count(): number;
    /**
     * Grid indices of the greedy stopping times, starting with 0.
     */
    hits(): Uint32Array;
    /**
     * Accumulated local 2.5-variation, NaN if the grid is too coarse.
     */
    m(): number;
    /**
     * First level-1 coordinate at every grid point.
     */
    xs(): Float64Array;
    ys(): Float64Array;
}

/**
 * Empirical tail of the greedy count over many paths.
 */
export class Survival {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Fitted Weibull exponent, NaN when the tail is too thin to fit.
     */
    alpha(): number;
    /**
     * `P(N >= k)` for `k = 0, 1, ..`.
     */
    tail(): Float64Array;
}

export function geodesic(x: number, y: number, area: number, samples: number): Geodesic;

export function simulate_path(seed: number, n_steps: number, radius: number): PathView;

export function survival(seed: number, samples: number, n_steps: number, radius: number): Survival;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_geodesic_free: (a: number, b: number) => void;
    readonly __wbg_pathview_free: (a: number, b: number) => void;
    readonly __wbg_survival_free: (a: number, b: number) => void;
    readonly geodesic: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly geodesic_length: (a: number) => number;
    readonly geodesic_points: (a: number) => [number, number];
    readonly pathview_area: (a: number) => number;
    readonly pathview_count: (a: number) => number;
    readonly pathview_hits: (a: number) => [number, number];
    readonly pathview_m: (a: number) => number;
    readonly pathview_xs: (a: number) => [number, number];
    readonly pathview_ys: (a: number) => [number, number];
    readonly simulate_path: (a: number, b: number, c: number) => [number, number, number];
    readonly survival: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly survival_alpha: (a: number) => number;
    readonly survival_tail: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
