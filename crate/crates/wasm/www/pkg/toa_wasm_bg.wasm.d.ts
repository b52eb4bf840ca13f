/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_readout_free: (a: number, b: number) => void;
export const booster_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const clock_readout: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const detection_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const readout_classical_toa: (a: number) => number;
export const readout_density: (a: number) => [number, number];
export const readout_detection_weight: (a: number) => number;
export const readout_y_hi: (a: number) => number;
export const readout_y_lo: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
