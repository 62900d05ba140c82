/** Page controller: wires the recorder, state machine, API client, and
 * renderers to the static shell in index.html.
 *
 * All state lives in one RecordingState value driven through transition();
 * the DOM is re-derived from it after every event. Audio goes exactly one
 * place: the POST in api.identify().
 */

import { identify, health, toFailure, type ApiOptions } from "./api.js";
import { mount, type DocumentLike, type ElementLike } from "./dom.js";
import { chunkPeak, peaksToBins } from "./peaks.js";
import {
  startRecording,
  PermissionDenied,
  UnsupportedBrowser,
  type CaptureResult,
  type Recorder,
} from "./recorder.js";
import {
  h,
  renderErrorCard,
  renderHealthLine,
  renderMeter,
  renderRecordingHint,
  renderResultCards,
  renderRoundTrip,
  type VNode,
} from "./render.js";
import { initialState, transition, type RecordingEvent, type RecordingState } from "./state.js";
import { recordingToWav } from "./wav.js";

interface UiConfig {
  apiBase?: string;
  embedVideos?: boolean;
  feedbackUrl?: string;
}

declare global {
  interface Window {
    VOICERANK_UI?: UiConfig;
  }
}

const config: UiConfig = window.VOICERANK_UI ?? {};
const apiOptions: ApiOptions = { baseUrl: config.apiBase ?? "" };

const doc = document as unknown as DocumentLike;

function slot(id: string): ElementLike & HTMLElement {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`index.html is missing #${id}`);
  }
  return el as ElementLike & HTMLElement;
}

const recordBtn = slot("record-btn") as HTMLButtonElement;
const submitBtn = slot("submit-btn") as HTMLButtonElement;
const discardBtn = slot("discard-btn") as HTMLButtonElement;
const meterSlot = slot("meter");
const hintSlot = slot("hint");
const noticeSlot = slot("notice");
const resultsSlot = slot("results");
const timingSlot = slot("timing");
const healthSlot = slot("health");
const playback = slot("playback") as HTMLAudioElement;
const waveCanvas = slot("wave") as HTMLCanvasElement;
const feedbackLink = slot("feedback-link") as HTMLAnchorElement;

let state: RecordingState = initialState();
let recorder: Recorder | null = null;
let capture: CaptureResult | null = null;
let roundTripMs: number | null = null;
/** Guidance that should outlive the error->idle reset (the 422 case). */
let notice: VNode | null = null;

function dispatch(event: RecordingEvent): RecordingState {
  state = transition(state, event);
  render();
  return state;
}

function drawWave(): void {
  const ctx = waveCanvas.getContext("2d");
  if (!ctx) {
    return;
  }
  const { width, height } = waveCanvas;
  ctx.clearRect(0, 0, width, height);
  const bins = peaksToBins(state.peaks, 64);
  const barWidth = width / bins.length;
  ctx.fillStyle = "#4cc2ff";
  bins.forEach((level, i) => {
    const barHeight = Math.max(2, level * height);
    ctx.fillRect(i * barWidth + 1, (height - barHeight) / 2, barWidth - 2, barHeight);
  });
}

function render(): void {
  const { status } = state;
  recordBtn.textContent = status === "recording" ? "Stop" : "Record";
  recordBtn.disabled = status === "uploading";
  submitBtn.disabled = status !== "recorded";
  discardBtn.disabled = !(status === "recorded" || status === "done" || status === "error");
  submitBtn.textContent = status === "uploading" ? "Identifying…" : "Who is this?";

  mount(meterSlot, renderMeter(state), doc);
  mount(
    hintSlot,
    status === "recording" || status === "recorded"
      ? renderRecordingHint(state.durationS)
      : h("span", {}),
    doc,
  );
  mount(noticeSlot, notice ?? h("span", {}), doc);

  if (status === "done" && state.response) {
    mount(
      resultsSlot,
      renderResultCards(state.response.results, { embedVideos: config.embedVideos ?? false }),
      doc,
    );
    mount(
      timingSlot,
      roundTripMs !== null ? renderRoundTrip(roundTripMs) : h("span", {}),
      doc,
    );
  } else if (status === "error" && state.failure) {
    mount(resultsSlot, renderErrorCard(state.failure), doc);
    mount(timingSlot, h("span", {}), doc);
  } else if (status === "idle" || status === "recording") {
    mount(resultsSlot, h("span", {}), doc);
    mount(timingSlot, h("span", {}), doc);
  }

  playback.hidden = !(status === "recorded" || status === "done" || status === "error");
  drawWave();
}

function showNotice(node: VNode | null): void {
  notice = node;
  mount(noticeSlot, notice ?? h("span", {}), doc);
}

async function finishCapture(): Promise<void> {
  if (!recorder) {
    return;
  }
  const active = recorder;
  recorder = null;
  capture = await active.stop();
  if (state.status === "recording") {
    dispatch({ type: "STOP" });
  }
  const wav = recordingToWav(capture.samples, capture.sampleRate);
  playback.src = URL.createObjectURL(new Blob([wav], { type: "audio/wav" }));
  render();
}

async function beginCapture(): Promise<void> {
  showNotice(null);
  capture = null;
  roundTripMs = null;
  try {
    recorder = await startRecording((chunk) => {
      if (state.status !== "recording") {
        return;
      }
      const after = dispatch({
        type: "TICK",
        dt: chunk.length / (recorder?.sampleRate ?? 1),
        peak: chunkPeak(chunk),
      });
      if (after.status === "recorded") {
        // hit the 60 s cap: the machine already moved on, stop the mic
        void finishCapture();
      }
    });
  } catch (err) {
    if (err instanceof UnsupportedBrowser || err instanceof PermissionDenied) {
      showNotice(h("div", { class: "error-card", role: "alert" }, h("p", {}, err.message)));
      return;
    }
    throw err;
  }
  dispatch({ type: "START" });
}

async function submit(): Promise<void> {
  if (!capture || state.status !== "recorded") {
    return;
  }
  dispatch({ type: "SUBMIT" });
  const wav = recordingToWav(capture.samples, capture.sampleRate);
  try {
    const outcome = await identify(wav, apiOptions);
    roundTripMs = outcome.roundTripMs;
    dispatch({ type: "RESOLVE_OK", response: outcome.response });
  } catch (err) {
    const failure = toFailure(err);
    dispatch({ type: "RESOLVE_ERROR", failure });
    if (failure.kind === "http" && failure.status === 422) {
      // too short / silent: keep the advice on screen but return the
      // controls to a fresh start
      showNotice(renderErrorCard(failure));
      dispatch({ type: "RESET" });
    }
  }
}

function discard(): void {
  if (state.status === "done" || state.status === "error") {
    dispatch({ type: "RESET" });
  } else if (state.status === "recorded") {
    state = initialState();
    render();
  }
  capture = null;
  roundTripMs = null;
  playback.removeAttribute("src");
}

recordBtn.addEventListener("click", () => {
  if (state.status === "recording") {
    void finishCapture();
    return;
  }
  if (state.status === "done" || state.status === "error") {
    dispatch({ type: "RESET" });
  }
  if (state.status === "idle") {
    void beginCapture();
  }
});

submitBtn.addEventListener("click", () => void submit());
discardBtn.addEventListener("click", discard);

if (config.feedbackUrl) {
  feedbackLink.href = config.feedbackUrl;
} else {
  feedbackLink.closest("p")?.remove();
}

async function refreshHealth(): Promise<void> {
  try {
    mount(healthSlot, renderHealthLine(await health(apiOptions)), doc);
  } catch {
    mount(healthSlot, renderHealthLine(null), doc);
  }
}

void refreshHealth();
setInterval(() => void refreshHealth(), 30_000);

render();
