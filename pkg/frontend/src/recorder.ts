/** Microphone capture.
 *
 * Wraps getUserMedia + an AudioContext tap and hands raw Float32 chunks to
 * a callback while buffering them for the final WAV. All capability and
 * permission problems surface as typed errors with a message a person can
 * act on, not a bare DOMException.
 */

export class UnsupportedBrowser extends Error {
  constructor(readonly capability: string) {
    super(
      `This browser is missing ${capability}, which is required to record audio. ` +
        "Try a current version of Firefox, Chrome, or Safari.",
    );
    this.name = "UnsupportedBrowser";
  }
}

export class PermissionDenied extends Error {
  constructor() {
    super(
      "Microphone access was blocked. Allow microphone use for this page in " +
        "your browser's site settings, then reload and try again.",
    );
    this.name = "PermissionDenied";
  }
}

export interface CaptureResult {
  samples: Float32Array;
  sampleRate: number;
}

export interface Recorder {
  readonly sampleRate: number;
  stop(): Promise<CaptureResult>;
}

const CHUNK_FRAMES = 4096;

function requireCapabilities(): void {
  if (typeof navigator === "undefined" || !navigator.mediaDevices?.getUserMedia) {
    throw new UnsupportedBrowser("navigator.mediaDevices.getUserMedia");
  }
  if (typeof AudioContext === "undefined") {
    throw new UnsupportedBrowser("AudioContext (Web Audio)");
  }
}

/** Ask for the microphone and start streaming chunks to `onChunk`. */
export async function startRecording(
  onChunk: (chunk: Float32Array) => void,
): Promise<Recorder> {
  requireCapabilities();

  let stream: MediaStream;
  try {
    stream = await navigator.mediaDevices.getUserMedia({
      audio: { channelCount: 1, echoCancellation: true, noiseSuppression: true },
    });
  } catch (err) {
    if (err instanceof DOMException &&
        (err.name === "NotAllowedError" || err.name === "SecurityError")) {
      throw new PermissionDenied();
    }
    throw err;
  }

  const context = new AudioContext();
  const source = context.createMediaStreamSource(stream);
  // ScriptProcessor is deprecated but universally available; an AudioWorklet
  // needs a separately served module file, which this static page avoids.
  const tap = context.createScriptProcessor(CHUNK_FRAMES, 1, 1);
  const chunks: Float32Array[] = [];

  tap.onaudioprocess = (event) => {
    const chunk = new Float32Array(event.inputBuffer.getChannelData(0));
    chunks.push(chunk);
    onChunk(chunk);
  };
  source.connect(tap);
  tap.connect(context.destination);

  return {
    sampleRate: context.sampleRate,
    async stop(): Promise<CaptureResult> {
      tap.disconnect();
      source.disconnect();
      for (const track of stream.getTracks()) {
        track.stop();
      }
      await context.close();
      const total = chunks.reduce((n, c) => n + c.length, 0);
      const samples = new Float32Array(total);
      let offset = 0;
      for (const chunk of chunks) {
        samples.set(chunk, offset);
        offset += chunk.length;
      }
      return { samples, sampleRate: context.sampleRate };
    },
  };
}
