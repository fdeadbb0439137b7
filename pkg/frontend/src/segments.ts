/** Turn a document plus sentence spans into an ordered list of render
 * segments, so the view can paint sensitive sentences red and leave
 * everything else alone.
 *
 * Offsets arriving from the API count Unicode code points (the server
 * slices its documents that way), while JavaScript string indices count
 * UTF-16 units.  All slicing here therefore goes through a code-point
 * array, so a document containing astral-plane characters (emoji etc.)
 * still maps every span onto exactly the text the server classified.
 */

/** The minimal span shape needed for rendering; both the predict and the
 * compare endpoints provide supersets of this. */
export interface SentenceSpan {
  start: number;
  end: number;
  label: number;
  probability?: number;
  status?: string;
}

export interface Segment {
  /** The exact substring of the document this segment covers. */
  text: string;
  /** "sentence" for a classified span, "gap" for text between spans. */
  kind: "sentence" | "gap";
  /** True exactly when this is a sentence span with label 1. */
  highlighted: boolean;
  probability?: number;
  status?: string;
}

function checkSpan(span: SentenceSpan, cursor: number, length: number): void {
  if (!Number.isInteger(span.start) || !Number.isInteger(span.end)) {
    throw new RangeError(
      `span offsets must be integers, got [${span.start}, ${span.end})`);
  }
  if (span.start < cursor) {
    throw new RangeError(
      `span starting at ${span.start} overlaps or precedes text already ` +
      `consumed up to ${cursor}; spans must be disjoint and in document order`);
  }
  if (span.end < span.start) {
    throw new RangeError(
      `span end ${span.end} lies before its start ${span.start}`);
  }
  if (span.end > length) {
    throw new RangeError(
      `span end ${span.end} exceeds document length ${length}`);
  }
}

/** Split `text` into gap and sentence segments according to `spans`.
 *
 * Spans are applied verbatim and must be disjoint, in document order, and
 * within bounds — the API guarantees all three, and a violation throws a
 * RangeError rather than rendering a wrong highlight.  The concatenation
 * of all returned segment texts always equals `text`.
 */
export function computeSegments(
  text: string,
  spans: readonly SentenceSpan[],
): Segment[] {
  const codePoints = Array.from(text);
  const segments: Segment[] = [];
  let cursor = 0;
  for (const span of spans) {
    checkSpan(span, cursor, codePoints.length);
    if (span.start > cursor) {
      segments.push({
        text: codePoints.slice(cursor, span.start).join(""),
        kind: "gap",
        highlighted: false,
      });
    }
    segments.push({
      text: codePoints.slice(span.start, span.end).join(""),
      kind: "sentence",
      highlighted: span.label === 1,
      probability: span.probability,
      status: span.status,
    });
    cursor = span.end;
  }
  if (cursor < codePoints.length) {
    segments.push({
      text: codePoints.slice(cursor).join(""),
      kind: "gap",
      highlighted: false,
    });
  }
  return segments;
}
