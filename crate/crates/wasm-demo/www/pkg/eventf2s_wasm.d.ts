/* tslint:disable */
/* eslint-disable */

/**
 * Encodes a synthetic signal-plus-noise mixture and reports what was kept.
 */
export function encode(snr: number, theta: number, tau_us: number, beta: number, seed: number): string;

/**
 * First spike time, causal inputs and membrane trace of one neuron.
 */
export function neuron(weights: Float64Array, times: Float64Array): string;

/**
 * TP/FP rate at each threshold (ascending) on one mixture.
 */
export function roc(snr: number, tau_us: number, beta: number, seed: number, thetas: Float64Array): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly encode: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly neuron: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly roc: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
