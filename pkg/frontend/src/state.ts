/** Session state for the console, kept as a plain immutable value with
 * pure transition functions so every rule is unit-testable without a DOM.
 *
 * The central invariant: highlights shown on screen always come from the
 * latest API response for the current document text.  Every mutation that
 * could make a response stale — editing the text, switching mode or
 * model, starting a newer run — bumps `runToken`, and a response is only
 * applied when the token captured at launch still matches.  A response
 * that lost the race is discarded, never rendered.
 */

import type {
  CompareResponse,
  PredictResponse,
  SamplesResponse,
} from "./types.js";

export type Mode = "single" | "compare";

export interface SessionState {
  readonly text: string;
  readonly mode: Mode;
  readonly modelA: string | null;
  readonly modelB: string | null;
  /** Generation counter; responses carrying an older token are stale. */
  readonly runToken: number;
  readonly running: boolean;
  readonly predict: PredictResponse | null;
  readonly compare: CompareResponse | null;
  /** True only while the stored response still describes `text`. */
  readonly highlightsValid: boolean;
  readonly samplesCache: Readonly<Record<string, SamplesResponse>>;
}

export function initialState(): SessionState {
  return {
    text: "",
    mode: "single",
    modelA: null,
    modelB: null,
    runToken: 0,
    running: false,
    predict: null,
    compare: null,
    highlightsValid: false,
    samplesCache: {},
  };
}

/** Drop any stored results and outdate in-flight ones. */
function invalidated(state: SessionState): SessionState {
  return {
    ...state,
    runToken: state.runToken + 1,
    running: false,
    predict: null,
    compare: null,
    highlightsValid: false,
  };
}

/** Replace the document text; any existing or in-flight results no longer
 * describe it, so they are discarded. Identical text is a no-op. */
export function editText(state: SessionState, text: string): SessionState {
  if (text === state.text) return state;
  return { ...invalidated(state), text };
}

export function setMode(state: SessionState, mode: Mode): SessionState {
  if (mode === state.mode) return state;
  return { ...invalidated(state), mode };
}

/** Changing a model makes the shown highlights describe the wrong model,
 * so selection changes clear them just like edits do. */
export function selectModelA(
  state: SessionState,
  id: string | null,
): SessionState {
  if (id === state.modelA) return state;
  return { ...invalidated(state), modelA: id };
}

export function selectModelB(
  state: SessionState,
  id: string | null,
): SessionState {
  if (id === state.modelB) return state;
  return { ...invalidated(state), modelB: id };
}

/** Start a run.  The caller must read `runToken` off the returned state
 * and present it when applying the response; a newer run or any edit in
 * between makes that token stale. */
export function beginRun(state: SessionState): SessionState {
  return { ...state, runToken: state.runToken + 1, running: true };
}

export function applyPredict(
  state: SessionState,
  token: number,
  response: PredictResponse,
): SessionState {
  if (token !== state.runToken) return state;
  return {
    ...state,
    running: false,
    predict: response,
    compare: null,
    highlightsValid: true,
  };
}

export function applyCompare(
  state: SessionState,
  token: number,
  response: CompareResponse,
): SessionState {
  if (token !== state.runToken) return state;
  return {
    ...state,
    running: false,
    compare: response,
    predict: null,
    highlightsValid: true,
  };
}

/** A run errored out; only clears the spinner if the run is still the
 * current one. */
export function runFailed(state: SessionState, token: number): SessionState {
  if (token !== state.runToken) return state;
  return { ...state, running: false };
}

export function cacheSamples(
  state: SessionState,
  infoType: string,
  samples: SamplesResponse,
): SessionState {
  return {
    ...state,
    samplesCache: { ...state.samplesCache, [infoType]: samples },
  };
}

export function cachedSamples(
  state: SessionState,
  infoType: string,
): SamplesResponse | undefined {
  return state.samplesCache[infoType];
}

/** Splice a sample snippet into the document at the caret (replacing any
 * selection) and report where the caret lands afterwards.  Selection
 * offsets are UTF-16 indices, exactly what a textarea reports. */
export function insertSnippet(
  text: string,
  selectionStart: number,
  selectionEnd: number,
  snippet: string,
): { text: string; cursor: number } {
  const start = Math.min(Math.max(0, selectionStart), text.length);
  const end = Math.min(Math.max(start, selectionEnd), text.length);
  const before = text.slice(0, start);
  return {
    text: before + snippet + text.slice(end),
    cursor: before.length + snippet.length,
  };
}
