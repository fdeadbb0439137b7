/** Thin fetch wrappers over the detection service's JSON API — the only
 * backend the console talks to.  The page is served by the same server
 * (its --static directory), so all paths are same-origin relative.
 */

import type {
  CompareResponse,
  ModelInfo,
  PredictResponse,
  SamplesResponse,
} from "./types.js";

async function requestJson<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, init);
  const body: unknown = await response.json().catch(() => null);
  if (!response.ok) {
    const message =
      body !== null && typeof body === "object" && "error" in body
        ? String((body as { error: unknown }).error)
        : `HTTP ${response.status}`;
    throw new Error(message);
  }
  return body as T;
}

export function fetchModels(signal?: AbortSignal): Promise<ModelInfo[]> {
  return requestJson("api/models", { signal });
}

export function fetchSamples(
  infoType: string,
  signal?: AbortSignal,
): Promise<SamplesResponse> {
  const query = encodeURIComponent(infoType);
  return requestJson(`api/samples?info_type=${query}`, { signal });
}

export function postPredict(
  modelId: string,
  text: string,
  signal?: AbortSignal,
): Promise<PredictResponse> {
  return requestJson("api/predict", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ model_id: modelId, text }),
    signal,
  });
}

export function postCompare(
  modelA: string,
  modelB: string,
  text: string,
  signal?: AbortSignal,
): Promise<CompareResponse> {
  return requestJson("api/compare", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ model_a: modelA, model_b: modelB, text }),
    signal,
  });
}
