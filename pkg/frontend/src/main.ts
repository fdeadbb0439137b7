/** DOM wiring for the analyst console.  All decision logic lives in the
 * pure modules (state, segments, compare); this file only moves values
 * between them, the fetch layer, and the page.
 *
 * Interaction contract:
 *   - Detection runs only when the Run button is pressed.
 *   - Editing the document (typing or inserting a sample) clears the
 *     highlights until the next run — no stale overlays.
 *   - At most one detection request is in flight; starting a new run
 *     aborts the previous one, and late responses are dropped.
 */

import { fetchModels, fetchSamples, postCompare, postPredict } from "./api.js";
import {
  countsConsistent,
  disagreementFlags,
  paneSpans,
} from "./compare.js";
import { computeSegments } from "./segments.js";
import type { SentenceSpan } from "./segments.js";
import * as session from "./state.js";
import type { ModelInfo, SamplesResponse } from "./types.js";

let state = session.initialState();
let runController: AbortController | null = null;
let samplesController: AbortController | null = null;

function element<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`console page is missing #${id}`);
  return el as T;
}

const docInput = element<HTMLTextAreaElement>("doc");
const modelASelect = element<HTMLSelectElement>("model-a");
const modelBSelect = element<HTMLSelectElement>("model-b");
const modelBWrap = element<HTMLElement>("model-b-wrap");
const runButton = element<HTMLButtonElement>("run");
const statusLine = element<HTMLElement>("status");
const singleView = element<HTMLElement>("single-view");
const compareView = element<HTMLElement>("compare-view");
const singleResult = element<HTMLElement>("single-result");
const paneA = element<HTMLElement>("cmp-a");
const paneB = element<HTMLElement>("cmp-b");
const paneATitle = element<HTMLElement>("pane-a-title");
const paneBTitle = element<HTMLElement>("pane-b-title");
const strip = element<HTMLElement>("strip");
const disagreeCount = element<HTMLElement>("disagree-count");
const resultNote = element<HTMLElement>("result-note");
const infoTypeSelect = element<HTMLSelectElement>("info-type");
const samplesPanel = element<HTMLElement>("samples");

function setStatus(message: string, kind: "info" | "error" = "info"): void {
  statusLine.textContent = message;
  statusLine.className = kind === "error" ? "status error" : "status";
}

/* ---------------------------------------------------------------- views */

function renderDocument(
  container: HTMLElement,
  text: string,
  spans: readonly SentenceSpan[],
): void {
  container.textContent = "";
  for (const segment of computeSegments(text, spans)) {
    if (segment.kind === "gap") {
      container.appendChild(document.createTextNode(segment.text));
      continue;
    }
    const span = document.createElement("span");
    span.textContent = segment.text;
    span.className = segment.highlighted ? "sentence hl" : "sentence";
    if (segment.probability !== undefined) {
      const status = segment.status === "unscored" ? ", unscored" : "";
      span.title =
        `label ${segment.highlighted ? 1 : 0}` +
        `, probability ${segment.probability.toFixed(3)}${status}`;
    }
    container.appendChild(span);
  }
}

function renderStrip(flags: readonly boolean[]): void {
  strip.textContent = "";
  flags.forEach((disagree, i) => {
    const cell = document.createElement("span");
    cell.className = disagree ? "cell disagree" : "cell agree";
    cell.title = `sentence ${i + 1}: ${disagree ? "labels differ" : "labels agree"}`;
    strip.appendChild(cell);
  });
}

function clearResults(note: string): void {
  singleResult.textContent = "";
  paneA.textContent = "";
  paneB.textContent = "";
  strip.textContent = "";
  disagreeCount.textContent = "";
  resultNote.textContent = note;
}

function renderResults(): void {
  singleView.hidden = state.mode !== "single";
  compareView.hidden = state.mode !== "compare";
  if (!state.highlightsValid) {
    clearResults(
      state.running
        ? "Running…"
        : "No current result — press Run to analyze the document.",
    );
    return;
  }
  resultNote.textContent = "";
  if (state.mode === "single" && state.predict !== null) {
    renderDocument(singleResult, state.text, state.predict.sentences);
    const hits = state.predict.sentences.filter((s) => s.label === 1).length;
    resultNote.textContent =
      `${state.predict.sentences.length} sentence(s), ${hits} flagged sensitive.`;
  } else if (state.mode === "compare" && state.compare !== null) {
    const sentences = state.compare.sentences;
    paneATitle.textContent = state.modelA ?? "model A";
    paneBTitle.textContent = state.modelB ?? "model B";
    renderDocument(paneA, state.text, paneSpans(sentences, "a"));
    renderDocument(paneB, state.text, paneSpans(sentences, "b"));
    renderStrip(disagreementFlags(sentences));
    disagreeCount.textContent =
      `Disagreements: ${state.compare.disagreements} of ${sentences.length} sentence(s)`;
  }
}

function renderSamples(
  samples: SamplesResponse | undefined,
  note?: string,
): void {
  samplesPanel.textContent = "";
  if (samples === undefined) {
    const p = document.createElement("p");
    p.className = "placeholder";
    p.textContent = note ?? "Loading samples…";
    samplesPanel.appendChild(p);
    return;
  }
  const groups: Array<[string, string, string[]]> = [
    ["Sensitive", "chip sensitive", samples.sensitive],
    ["Non-sensitive", "chip safe", samples.non_sensitive],
  ];
  let total = 0;
  for (const [heading, chipClass, snippets] of groups) {
    if (snippets.length === 0) continue;
    total += snippets.length;
    const h = document.createElement("h3");
    h.textContent = heading;
    samplesPanel.appendChild(h);
    for (const snippet of snippets) {
      const chip = document.createElement("button");
      chip.type = "button";
      chip.className = chipClass;
      chip.textContent = snippet;
      chip.title = "Insert into the document at the cursor";
      chip.addEventListener("click", () => insertSample(snippet));
      samplesPanel.appendChild(chip);
    }
  }
  if (total === 0) {
    const p = document.createElement("p");
    p.className = "placeholder";
    p.textContent = "No samples for this information type.";
    samplesPanel.appendChild(p);
  }
}

/* -------------------------------------------------------------- actions */

function documentEdited(): void {
  const hadResults = state.highlightsValid;
  state = session.editText(state, docInput.value);
  if (hadResults) setStatus("Document edited — highlights cleared; run again.");
  renderResults();
}

function insertSample(snippet: string): void {
  const spliced = session.insertSnippet(
    docInput.value,
    docInput.selectionStart,
    docInput.selectionEnd,
    snippet,
  );
  docInput.value = spliced.text;
  docInput.focus();
  docInput.setSelectionRange(spliced.cursor, spliced.cursor);
  documentEdited();
}

async function run(): Promise<void> {
  state = session.editText(state, docInput.value);
  const { mode, modelA, modelB } = state;
  if (modelA === null) {
    setStatus("Select a model first.", "error");
    return;
  }
  if (mode === "compare" && modelB === null) {
    setStatus("Select a second model to compare against.", "error");
    return;
  }
  state = session.beginRun(state);
  const token = state.runToken;
  runController?.abort();
  runController = new AbortController();
  const signal = runController.signal;
  setStatus("Running…");
  renderResults();
  try {
    if (mode === "single") {
      const response = await postPredict(modelA, state.text, signal);
      state = session.applyPredict(state, token, response);
    } else if (modelB === null) {
      return; // unreachable: checked before the run began
    } else {
      const response = await postCompare(modelA, modelB, state.text, signal);
      if (!countsConsistent(response)) {
        console.warn(
          "compare response summary count disagrees with its per-sentence flags",
          response,
        );
      }
      state = session.applyCompare(state, token, response);
    }
    if (state.runToken === token) setStatus("Done.");
    renderResults();
  } catch (error) {
    if (error instanceof DOMException && error.name === "AbortError") return;
    state = session.runFailed(state, token);
    setStatus(`Request failed: ${String((error as Error).message ?? error)}`,
      "error");
    renderResults();
  }
}

async function showSamples(infoType: string): Promise<void> {
  const cached = session.cachedSamples(state, infoType);
  if (cached !== undefined) {
    renderSamples(cached);
    return;
  }
  samplesController?.abort();
  samplesController = new AbortController();
  renderSamples(undefined);
  try {
    const samples = await fetchSamples(infoType, samplesController.signal);
    state = session.cacheSamples(state, infoType, samples);
    if (infoTypeSelect.value === infoType) renderSamples(samples);
  } catch (error) {
    if (error instanceof DOMException && error.name === "AbortError") return;
    renderSamples(undefined,
      `Could not load samples: ${String((error as Error).message ?? error)}`);
  }
}

function applyMode(mode: session.Mode): void {
  state = session.setMode(state, mode);
  modelBWrap.hidden = mode !== "compare";
  renderResults();
}

/* ----------------------------------------------------------------- boot */

function fillModelSelect(select: HTMLSelectElement, models: ModelInfo[]): void {
  select.textContent = "";
  for (const model of models) {
    const option = document.createElement("option");
    option.value = model.id;
    option.textContent = `${model.id} (${model.kind}, ${model.info_type})`;
    select.appendChild(option);
  }
}

async function boot(): Promise<void> {
  docInput.addEventListener("input", documentEdited);
  runButton.addEventListener("click", () => { void run(); });
  modelASelect.addEventListener("change", () => {
    state = session.selectModelA(state, modelASelect.value || null);
    renderResults();
  });
  modelBSelect.addEventListener("change", () => {
    state = session.selectModelB(state, modelBSelect.value || null);
    renderResults();
  });
  for (const radio of document.querySelectorAll<HTMLInputElement>(
    'input[name="mode"]')) {
    radio.addEventListener("change", () => {
      if (radio.checked) applyMode(radio.value as session.Mode);
    });
  }
  infoTypeSelect.addEventListener("change", () => {
    void showSamples(infoTypeSelect.value);
  });

  renderResults();
  setStatus("Loading models…");
  let models: ModelInfo[];
  try {
    models = await fetchModels();
  } catch (error) {
    setStatus(
      `Could not load models: ${String((error as Error).message ?? error)}`,
      "error");
    renderSamples(undefined, "Samples unavailable — no models loaded.");
    return;
  }
  if (models.length === 0) {
    setStatus("The server has no models loaded.", "error");
    renderSamples(undefined, "Samples unavailable — no models loaded.");
    return;
  }
  fillModelSelect(modelASelect, models);
  fillModelSelect(modelBSelect, models);
  modelASelect.selectedIndex = 0;
  modelBSelect.selectedIndex = models.length > 1 ? 1 : 0;
  state = session.selectModelA(state, modelASelect.value);
  state = session.selectModelB(state, modelBSelect.value);

  const infoTypes = [...new Set(models.map((m) => m.info_type))];
  infoTypeSelect.textContent = "";
  for (const infoType of infoTypes) {
    const option = document.createElement("option");
    option.value = infoType;
    option.textContent = infoType;
    infoTypeSelect.appendChild(option);
  }
  setStatus(`${models.length} model(s) loaded.`);
  if (infoTypes.length > 0) {
    infoTypeSelect.selectedIndex = 0;
    void showSamples(infoTypeSelect.value);
  } else {
    renderSamples(undefined, "No information types advertised.");
  }
}

void boot();
