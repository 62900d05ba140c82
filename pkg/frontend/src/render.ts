/** Pure view construction.
 *
 * Every renderer here maps plain data to a VNode tree and touches nothing
 * else — no globals, no clock, no document. That keeps "same response JSON,
 * same DOM" a testable property rather than a hope.
 */

import type { HealthResponse, SpeakerResult } from "./types.js";
import type { RecordingState, UploadFailure } from "./state.js";

export interface VNode {
  tag: string;
  props: Record<string, string>;
  children: Array<VNode | string>;
}

export function h(
  tag: string,
  props: Record<string, string> = {},
  ...children: Array<VNode | string>
): VNode {
  return { tag, props, children };
}

export const MAX_CARDS = 5;
export const NUDGE_BELOW_S = 5;
export const IDEAL_FROM_S = 9;

export interface RenderOptions {
  /** When true, clips render as inline players instead of linked thumbnails. */
  embedVideos?: boolean;
}

function clockFace(seconds: number): string {
  const whole = Math.max(0, Math.floor(seconds));
  const m = Math.floor(whole / 60);
  const s = whole % 60;
  return `${m}:${String(s).padStart(2, "0")}`;
}

function thumbnailUrl(videoId: string): string {
  return `https://i.ytimg.com/vi/${encodeURIComponent(videoId)}/hqdefault.jpg`;
}

function embedUrl(result: SpeakerResult): string {
  const start = Math.max(0, Math.floor(result.clip_start_s));
  return `https://www.youtube.com/embed/${encodeURIComponent(result.video_id)}?start=${start}`;
}

function videoBlock(result: SpeakerResult, opts: RenderOptions): VNode {
  if (opts.embedVideos) {
    return h("iframe", {
      class: "card-video",
      src: embedUrl(result),
      title: `clip of ${result.display_name}`,
      allow: "encrypted-media; picture-in-picture",
      allowfullscreen: "",
    });
  }
  return h(
    "a",
    {
      class: "card-video-link",
      href: result.video_url,
      target: "_blank",
      rel: "noopener noreferrer",
    },
    h("img", {
      class: "card-thumb",
      src: thumbnailUrl(result.video_id),
      alt: `watch a clip of ${result.display_name}`,
      loading: "lazy",
    }),
  );
}

function resultCard(result: SpeakerResult, opts: RenderOptions): VNode {
  return h(
    "article",
    { class: "result-card", "data-rank": String(result.rank), "data-speaker": result.speaker_id },
    h("div", { class: "card-rank" }, `#${result.rank}`),
    videoBlock(result, opts),
    h(
      "div",
      { class: "card-body" },
      h("h3", { class: "card-name" }, result.display_name),
      h("p", { class: "card-score" }, `match score ${result.score.toFixed(2)}`),
      h(
        "p",
        { class: "card-clip" },
        `clip ${clockFace(result.clip_start_s)}–${clockFace(result.clip_end_s)}`,
      ),
    ),
  );
}

/** Top matches, best first, never more than MAX_CARDS of them. */
export function renderResultCards(
  results: readonly SpeakerResult[],
  opts: RenderOptions = {},
): VNode {
  const shown = [...results]
    .sort((a, b) => a.rank - b.rank)
    .slice(0, MAX_CARDS)
    .map((r) => resultCard(r, opts));
  if (shown.length === 0) {
    return h("div", { class: "results empty" }, h("p", {}, "No matches found."));
  }
  return h("div", { class: "results" }, ...shown);
}

export function renderRoundTrip(roundTripMs: number): VNode {
  return h(
    "p",
    { class: "round-trip", "data-ms": roundTripMs.toFixed(1) },
    `answered in ${(roundTripMs / 1000).toFixed(2)} s`,
  );
}

/** Length / quality hint shown while recording and after stopping. */
export function renderRecordingHint(durationS: number): VNode {
  if (durationS < NUDGE_BELOW_S) {
    return h(
      "p",
      { class: "hint nudge" },
      "Keep going — at least 5 seconds of speech gives a usable match.",
    );
  }
  if (durationS >= IDEAL_FROM_S) {
    return h(
      "p",
      { class: "hint" },
      h("span", { class: "badge ideal" }, "ideal length"),
      " — this is plenty for a confident match.",
    );
  }
  return h("p", { class: "hint" }, "Good — a little more improves accuracy.");
}

/** Error panel. A 422 is guidance, not failure: show the server's message
 * prominently so the speaker knows what to change before retrying. */
export function renderErrorCard(failure: UploadFailure): VNode {
  if (failure.kind === "http" && failure.status === 422) {
    return h(
      "div",
      { class: "guidance", role: "status" },
      h("p", { class: "guidance-text" }, failure.message),
    );
  }
  const lines: Array<VNode | string> = [
    h("p", { class: "error-message" }, failure.message),
  ];
  if (failure.kind === "http" && failure.code) {
    lines.push(h("p", { class: "error-code" }, `error code: ${failure.code}`));
  }
  if (failure.requestId) {
    lines.push(h("p", { class: "error-request" }, `request id: ${failure.requestId}`));
  }
  lines.push(
    h(
      "p",
      { class: "error-retry" },
      failure.retryable
        ? "This looks temporary — try submitting again."
        : "Record a fresh clip and try again.",
    ),
  );
  return h("div", { class: "error-card", role: "alert" }, ...lines);
}

export function renderHealthLine(info: HealthResponse | null): VNode {
  if (info === null) {
    return h("p", { class: "health unknown" }, "service status unknown");
  }
  const ready = info.status === "ok";
  return h(
    "p",
    { class: ready ? "health ok" : "health degraded" },
    ready
      ? `service ready — ${info.num_speakers} speakers indexed`
      : `service ${info.status}`,
  );
}

/** Live meter: recording clock plus a coarse level readout. */
export function renderMeter(state: RecordingState): VNode {
  const latest = state.peaks.length > 0 ? state.peaks[state.peaks.length - 1] : 0;
  return h(
    "div",
    { class: "meter" },
    h("span", { class: "meter-clock" }, `${state.durationS.toFixed(1)} s`),
    h("span", {
      class: "meter-level",
      style: `--level: ${Math.min(1, latest).toFixed(3)}`,
    }),
  );
}
