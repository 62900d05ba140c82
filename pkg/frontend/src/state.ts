/** The recording/upload state machine.
 *
 * Statuses move only along
 *   idle -> recording -> recorded -> uploading -> done | error -> idle
 * and nothing else; transition() throws IllegalTransition for any event
 * that is not legal in the current status, leaving the state untouched.
 */

import type { IdentifyResponse } from "./types.js";

export type RecordingStatus =
  | "idle"
  | "recording"
  | "recorded"
  | "uploading"
  | "done"
  | "error";

export interface UploadFailure {
  kind: "http" | "network" | "malformed";
  status?: number;
  code?: string;
  message: string;
  requestId?: string;
  retryable: boolean;
}

export interface RecordingState {
  status: RecordingStatus;
  durationS: number;
  peaks: number[];
  response: IdentifyResponse | null;
  failure: UploadFailure | null;
}

export type RecordingEvent =
  | { type: "START" }
  | { type: "TICK"; dt: number; peak: number }
  | { type: "STOP" }
  | { type: "SUBMIT" }
  | { type: "RESOLVE_OK"; response: IdentifyResponse }
  | { type: "RESOLVE_ERROR"; failure: UploadFailure }
  | { type: "RESET" };

export const MAX_DURATION_S = 60;

export class IllegalTransition extends Error {
  constructor(status: RecordingStatus, event: string) {
    super(`event ${event} is not legal in status ${status}`);
    this.name = "IllegalTransition";
  }
}

export function initialState(): RecordingState {
  return { status: "idle", durationS: 0, peaks: [], response: null, failure: null };
}

export function transition(
  state: RecordingState,
  event: RecordingEvent,
  maxDurationS: number = MAX_DURATION_S,
): RecordingState {
  switch (state.status) {
    case "idle":
      if (event.type === "START") {
        return { status: "recording", durationS: 0, peaks: [], response: null, failure: null };
      }
      break;

    case "recording":
      if (event.type === "TICK") {
        const durationS = Math.min(state.durationS + event.dt, maxDurationS);
        const peaks = [...state.peaks, event.peak];
        // hitting the cap forces the stop edge; durationS never exceeds it
        const status = durationS >= maxDurationS ? "recorded" : "recording";
        return { ...state, status, durationS, peaks };
      }
      if (event.type === "STOP") {
        return { ...state, status: "recorded" };
      }
      break;

    case "recorded":
      if (event.type === "SUBMIT") {
        return { ...state, status: "uploading" };
      }
      break;

    case "uploading":
      if (event.type === "RESOLVE_OK") {
        return { ...state, status: "done", response: event.response, failure: null };
      }
      if (event.type === "RESOLVE_ERROR") {
        return { ...state, status: "error", failure: event.failure, response: null };
      }
      break;

    case "done":
    case "error":
      if (event.type === "RESET") {
        return initialState();
      }
      break;
  }
  throw new IllegalTransition(state.status, event.type);
}
