import { describe, expect, it } from "vitest";

import {
  applyCompare,
  applyPredict,
  beginRun,
  cacheSamples,
  cachedSamples,
  editText,
  initialState,
  insertSnippet,
  runFailed,
  selectModelA,
  selectModelB,
  setMode,
} from "../src/state.js";
import type { SessionState } from "../src/state.js";
import type { CompareResponse, PredictResponse } from "../src/types.js";

const PREDICT: PredictResponse = {
  sentences: [
    {
      text: "the key is hidden.", start: 0, end: 18,
      label: 1, probability: 0.9, status: "scored",
    },
  ],
};

const COMPARE: CompareResponse = {
  sentences: [
    {
      text: "the key is hidden.", start: 0, end: 18,
      label_a: 1, probability_a: 0.9,
      label_b: 0, probability_b: 0.2,
      disagree: true,
    },
  ],
  disagreements: 1,
};

function readyState(): SessionState {
  let s = initialState();
  s = editText(s, "the key is hidden.");
  s = selectModelA(s, "m1");
  s = selectModelB(s, "m2");
  return s;
}

describe("run lifecycle", () => {
  it("applies a response whose token is still current", () => {
    let s = beginRun(readyState());
    const token = s.runToken;
    s = applyPredict(s, token, PREDICT);
    expect(s.highlightsValid).toBe(true);
    expect(s.predict).toBe(PREDICT);
    expect(s.running).toBe(false);
  });

  it("discards a response that arrives after an edit", () => {
    let s = beginRun(readyState());
    const token = s.runToken;
    s = editText(s, "the key is hidden. now longer");
    s = applyPredict(s, token, PREDICT);
    expect(s.highlightsValid).toBe(false);
    expect(s.predict).toBeNull();
  });

  it("discards a response superseded by a newer run", () => {
    let s = beginRun(readyState());
    const staleToken = s.runToken;
    s = beginRun(s);
    const freshToken = s.runToken;
    s = applyPredict(s, staleToken, PREDICT);
    expect(s.predict).toBeNull();
    s = applyPredict(s, freshToken, PREDICT);
    expect(s.predict).toBe(PREDICT);
    expect(s.highlightsValid).toBe(true);
  });

  it("applies compare responses under the same token rule", () => {
    let s = beginRun(setMode(readyState(), "compare"));
    const token = s.runToken;
    s = applyCompare(s, token, COMPARE);
    expect(s.compare).toBe(COMPARE);
    expect(s.highlightsValid).toBe(true);
    s = editText(s, "changed");
    expect(s.compare).toBeNull();
  });

  it("clears the running flag on failure only for the current run", () => {
    let s = beginRun(readyState());
    const token = s.runToken;
    s = runFailed(s, token);
    expect(s.running).toBe(false);

    let t = beginRun(readyState());
    const stale = t.runToken;
    t = beginRun(t);
    t = runFailed(t, stale);
    expect(t.running).toBe(true);
  });
});

describe("editing invalidates highlights", () => {
  function withResults(): SessionState {
    let s = beginRun(readyState());
    return applyPredict(s, s.runToken, PREDICT);
  }

  it("drops results and marks highlights stale on edit", () => {
    let s = withResults();
    expect(s.highlightsValid).toBe(true);
    s = editText(s, "something else");
    expect(s.highlightsValid).toBe(false);
    expect(s.predict).toBeNull();
    expect(s.compare).toBeNull();
  });

  it("treats identical text as a no-op that keeps highlights", () => {
    const s = withResults();
    expect(editText(s, s.text)).toBe(s);
  });

  it("invalidates on mode switch", () => {
    let s = withResults();
    s = setMode(s, "compare");
    expect(s.highlightsValid).toBe(false);
    expect(setMode(s, "compare")).toBe(s);
  });

  it("invalidates when either selected model changes", () => {
    let s = withResults();
    s = selectModelA(s, "other");
    expect(s.highlightsValid).toBe(false);

    let t = withResults();
    t = selectModelB(t, "third");
    expect(t.highlightsValid).toBe(false);
    expect(selectModelB(t, "third")).toBe(t);
  });
});

describe("samples cache", () => {
  const SAMPLES = { sensitive: ["a b c."], non_sensitive: ["x y z."] };

  it("misses before anything is cached", () => {
    expect(cachedSamples(initialState(), "CONTACT")).toBeUndefined();
  });

  it("caches per information type", () => {
    let s = cacheSamples(initialState(), "CONTACT", SAMPLES);
    expect(cachedSamples(s, "CONTACT")).toEqual(SAMPLES);
    expect(cachedSamples(s, "HEALTH")).toBeUndefined();
    const other = { sensitive: [], non_sensitive: ["fine."] };
    s = cacheSamples(s, "HEALTH", other);
    expect(cachedSamples(s, "CONTACT")).toEqual(SAMPLES);
    expect(cachedSamples(s, "HEALTH")).toEqual(other);
  });

  it("survives edits untouched", () => {
    let s = cacheSamples(initialState(), "CONTACT", SAMPLES);
    s = editText(s, "new text");
    expect(cachedSamples(s, "CONTACT")).toEqual(SAMPLES);
  });
});

describe("insertSnippet", () => {
  it("inserts at the caret and parks the caret after the snippet", () => {
    const out = insertSnippet("hello world", 6, 6, "cruel ");
    expect(out.text).toBe("hello cruel world");
    expect(out.cursor).toBe(12);
  });

  it("replaces the active selection", () => {
    const out = insertSnippet("hello world", 6, 11, "there");
    expect(out.text).toBe("hello there");
    expect(out.cursor).toBe(11);
  });

  it("inserts the exact snippet text into an empty document", () => {
    const snippet = "the password is swordfish.";
    const out = insertSnippet("", 0, 0, snippet);
    expect(out.text).toBe(snippet);
    expect(out.cursor).toBe(snippet.length);
  });

  it("appends cleanly at the end and prepends at the start", () => {
    expect(insertSnippet("abc", 3, 3, "def").text).toBe("abcdef");
    expect(insertSnippet("abc", 0, 0, "xy").text).toBe("xyabc");
  });

  it("clamps out-of-range selections instead of corrupting text", () => {
    const out = insertSnippet("abc", 10, 99, "Z");
    expect(out.text).toBe("abcZ");
    expect(out.cursor).toBe(4);
  });
});
