/* tslint:disable */
/* eslint-disable */

export class Readout {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly classical_toa: number;
    /**
     * Density per bin, uniform bins over `[y_lo, y_hi]`.
     */
    readonly density: Float64Array;
    readonly detection_weight: number;
    readonly y_hi: number;
    readonly y_lo: number;
}

/**
 * Booster fluxes across the propagating window: `[k, J_R↓, J_L↑, ...]`.
 */
export function booster_curve(m: number, k: number, k_prime: number, lambda: number, n: number): Float64Array;

/**
 * Clock pointer histogram for a packet started at `x = -x0`, read out once
 * the packet has passed the detector.
 */
export function clock_readout(m: number, k0: number, dx: number, x0: number, p0: number, dy: number, bins: number): Readout;

/**
 * Detection weight against `E·Δy` on `n` log-spaced points, with the clock
 * momentum scaled so that `p0·Δy` stays fixed. Returns `[x0, w0, x1, w1, ...]`.
 */
export function detection_curve(m: number, k0: number, dx: number, p0_dy: number, edy_lo: number, edy_hi: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_readout_free: (a: number, b: number) => void;
    readonly booster_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly clock_readout: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly detection_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly readout_classical_toa: (a: number) => number;
    readonly readout_density: (a: number) => [number, number];
    readonly readout_detection_weight: (a: number) => number;
    readonly readout_y_hi: (a: number) => number;
    readonly readout_y_lo: (a: number) => number;
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
