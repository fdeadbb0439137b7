/** Response shapes of the detection service's JSON API.
 *
 * Field names mirror the wire format exactly (see docs/api-schema.json in
 * the repository root); the console renders these values verbatim and
 * never classifies anything on its own.
 */

/** One row of GET /api/models. */
export interface ModelInfo {
  id: string;
  kind: string;
  info_type: string;
}

/** One classified sentence from POST /api/predict. */
export interface PredictedSentence {
  text: string;
  /** Inclusive start offset into the submitted document, in code points. */
  start: number;
  /** Exclusive end offset into the submitted document, in code points. */
  end: number;
  label: number;
  probability: number;
  /** "scored", or "unscored" for sentences too short to classify. */
  status: string;
}

export interface PredictResponse {
  sentences: PredictedSentence[];
}

/** One sentence from POST /api/compare, labelled by both models. */
export interface ComparedSentence {
  text: string;
  start: number;
  end: number;
  label_a: number;
  probability_a: number;
  label_b: number;
  probability_b: number;
  disagree: boolean;
}

export interface CompareResponse {
  sentences: ComparedSentence[];
  /** Server-side count of sentences whose labels differ. */
  disagreements: number;
}

/** GET /api/samples?info_type=X: curated snippets, grouped by class. */
export interface SamplesResponse {
  sensitive: string[];
  non_sensitive: string[];
}
