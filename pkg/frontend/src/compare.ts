/** Pure helpers for the two-model comparison view: project the combined
 * response into one span list per pane, and derive the disagreement strip.
 * Every value comes straight from the API response — nothing is
 * reclassified here.
 */

import type { SentenceSpan } from "./segments.js";
import type { CompareResponse, ComparedSentence } from "./types.js";

/** Spans for one pane of the side-by-side view. */
export function paneSpans(
  sentences: readonly ComparedSentence[],
  which: "a" | "b",
): SentenceSpan[] {
  return sentences.map((s) => ({
    start: s.start,
    end: s.end,
    label: which === "a" ? s.label_a : s.label_b,
    probability: which === "a" ? s.probability_a : s.probability_b,
  }));
}

/** One boolean per sentence, in document order: did the models disagree? */
export function disagreementFlags(
  sentences: readonly ComparedSentence[],
): boolean[] {
  return sentences.map((s) => s.disagree);
}

/** Number of sentences whose per-sentence flags mark a disagreement. */
export function disagreementCount(
  sentences: readonly ComparedSentence[],
): number {
  return sentences.reduce((n, s) => n + (s.disagree ? 1 : 0), 0);
}

/** True when the response's summary count matches its per-sentence flags.
 * The view displays the server's count; this check guards against ever
 * showing a number the strip contradicts. */
export function countsConsistent(response: CompareResponse): boolean {
  return response.disagreements === disagreementCount(response.sentences);
}
