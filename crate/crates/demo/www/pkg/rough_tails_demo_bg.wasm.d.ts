/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_geodesic_free: (a: number, b: number) => void;
export const __wbg_pathview_free: (a: number, b: number) => void;
export const __wbg_survival_free: (a: number, b: number) => void;
export const geodesic: (a: number, b: number, c: number, d: number) => [number, number, number];
export const geodesic_length: (a: number) => number;
export const geodesic_points: (a: number) => [number, number];
export const pathview_area: (a: number) => number;
export const pathview_count: (a: number) => number;
export const pathview_hits: (a: number) => [number, number];
export const pathview_m: (a: number) => number;
export const pathview_xs: (a: number) => [number, number];
export const pathview_ys: (a: number) => [number, number];
export const simulate_path: (a: number, b: number, c: number) => [number, number, number];
export const survival: (a: number, b: number, c: number, d: number) => [number, number, number];
export const survival_alpha: (a: number) => number;
export const survival_tail: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
