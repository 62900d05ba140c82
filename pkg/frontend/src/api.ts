/** The service client: one POST for audio, one GET for health.
 *
 * No recording bytes leave the page any other way. fetch and the clock
 * are injectable so tests can drive timing and failure modes exactly.
 */

import type { HealthResponse, IdentifyResponse, SpeakerResult } from "./types.js";
import type { UploadFailure } from "./state.js";

interface MinimalResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: ArrayBuffer | Blob;
  },
) => Promise<MinimalResponse>;

export interface ApiOptions {
  baseUrl?: string;
  fetchImpl?: FetchLike;
  now?: () => number;
}

export interface IdentifyOutcome {
  response: IdentifyResponse;
  roundTripMs: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly requestId?: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

export class MalformedResponse extends Error {
  constructor(message: string, readonly requestId?: string) {
    super(message);
    this.name = "MalformedResponse";
  }
}

function defaults(opts?: ApiOptions) {
  return {
    baseUrl: opts?.baseUrl ?? "",
    fetchImpl: opts?.fetchImpl ?? (fetch as unknown as FetchLike),
    now: opts?.now ?? (() => performance.now()),
  };
}

function isResult(value: unknown): value is SpeakerResult {
  const r = value as SpeakerResult;
  return (
    typeof r === "object" && r !== null &&
    typeof r.rank === "number" &&
    typeof r.speaker_id === "string" &&
    typeof r.display_name === "string" &&
    typeof r.score === "number" &&
    typeof r.video_url === "string" &&
    typeof r.clip_start_s === "number"
  );
}

function parseIdentifyBody(body: unknown): IdentifyResponse {
  const doc = body as IdentifyResponse;
  const requestId =
    typeof (doc as { request_id?: unknown })?.request_id === "string"
      ? doc.request_id
      : undefined;
  if (
    typeof doc !== "object" || doc === null ||
    typeof doc.request_id !== "string" ||
    !Array.isArray(doc.results) ||
    !doc.results.every(isResult) ||
    typeof doc.timing !== "object" || doc.timing === null
  ) {
    throw new MalformedResponse("identify response missing required fields", requestId);
  }
  return doc;
}

/** POST one WAV recording; resolves with the parsed ranking and the
 * measured round-trip time in milliseconds. */
export async function identify(
  wav: ArrayBuffer | Blob,
  opts?: ApiOptions,
): Promise<IdentifyOutcome> {
  const { baseUrl, fetchImpl, now } = defaults(opts);
  const t0 = now();
  let resp: MinimalResponse;
  try {
    resp = await fetchImpl(`${baseUrl}/api/identify`, {
      method: "POST",
      headers: { "Content-Type": "audio/wav" },
      body: wav,
    });
  } catch (err) {
    throw new NetworkError(`could not reach the identification service: ${String(err)}`);
  }
  const roundTripMs = now() - t0;

  let body: unknown;
  try {
    body = await resp.json();
  } catch {
    throw new MalformedResponse(`response body was not JSON (HTTP ${resp.status})`);
  }
  if (!resp.ok) {
    const err = body as { error?: unknown; message?: unknown; request_id?: unknown };
    throw new ApiError(
      resp.status,
      typeof err.error === "string" ? err.error : "unknown_error",
      typeof err.message === "string" ? err.message : `HTTP ${resp.status}`,
      typeof err.request_id === "string" ? err.request_id : undefined,
    );
  }
  return { response: parseIdentifyBody(body), roundTripMs };
}

export async function health(opts?: ApiOptions): Promise<HealthResponse> {
  const { baseUrl, fetchImpl } = defaults(opts);
  let resp: MinimalResponse;
  try {
    resp = await fetchImpl(`${baseUrl}/api/health`);
  } catch (err) {
    throw new NetworkError(`could not reach the identification service: ${String(err)}`);
  }
  const body = (await resp.json()) as HealthResponse;
  if (typeof body?.status !== "string") {
    throw new MalformedResponse("health response missing status");
  }
  return body;
}

/** Classify a thrown upload error for the state machine and the UI. */
export function toFailure(err: unknown): UploadFailure {
  if (err instanceof ApiError) {
    return {
      kind: "http",
      status: err.status,
      code: err.code,
      message: err.message,
      requestId: err.requestId,
      retryable: err.status >= 500,
    };
  }
  if (err instanceof MalformedResponse) {
    return {
      kind: "malformed",
      message: err.message,
      requestId: err.requestId,
      retryable: false,
    };
  }
  return {
    kind: "network",
    message: err instanceof Error ? err.message : String(err),
    retryable: true,
  };
}
