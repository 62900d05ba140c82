/** Mono PCM16 WAV encoding at 16 kHz, downsampling from the capture rate. */

export const TARGET_SAMPLE_RATE = 16000;

/**
 * Reduce `input` from `fromRate` to `toRate` by averaging each output
 * sample's source span (a polyphase box filter). Fractional span edges
 * are weighted, so non-integer ratios such as 44100 -> 16000 stay
 * alias-damped and the output length is round(n * toRate / fromRate).
 */
export function downsample(
  input: Float32Array,
  fromRate: number,
  toRate: number = TARGET_SAMPLE_RATE,
): Float32Array {
  if (fromRate <= 0 || toRate <= 0) {
    throw new RangeError(`sample rates must be positive, got ${fromRate} -> ${toRate}`);
  }
  if (fromRate === toRate) {
    return new Float32Array(input);
  }
  if (fromRate < toRate) {
    throw new RangeError(
      `cannot upsample ${fromRate} Hz capture to ${toRate} Hz`,
    );
  }
  const ratio = fromRate / toRate;
  const outLength = Math.round(input.length / ratio);
  const out = new Float32Array(outLength);
  for (let i = 0; i < outLength; i++) {
    const start = i * ratio;
    const end = Math.min((i + 1) * ratio, input.length);
    let acc = 0;
    let weight = 0;
    let pos = start;
    while (pos < end) {
      const idx = Math.floor(pos);
      const next = Math.min(idx + 1, end);
      const w = next - pos;
      acc += input[idx] * w;
      weight += w;
      pos = next;
    }
    out[i] = weight > 0 ? acc / weight : 0;
  }
  return out;
}

/** Canonical 44-byte-header mono PCM16 WAV. */
export function encodeWavPcm16(
  samples: Float32Array,
  sampleRateHz: number = TARGET_SAMPLE_RATE,
): ArrayBuffer {
  const dataBytes = samples.length * 2;
  const buffer = new ArrayBuffer(44 + dataBytes);
  const view = new DataView(buffer);

  const ascii = (offset: number, text: string) => {
    for (let i = 0; i < text.length; i++) {
      view.setUint8(offset + i, text.charCodeAt(i));
    }
  };

  ascii(0, "RIFF");
  view.setUint32(4, 36 + dataBytes, true);
  ascii(8, "WAVE");
  ascii(12, "fmt ");
  view.setUint32(16, 16, true); // fmt chunk length
  view.setUint16(20, 1, true); // PCM
  view.setUint16(22, 1, true); // mono
  view.setUint32(24, sampleRateHz, true);
  view.setUint32(28, sampleRateHz * 2, true); // byte rate
  view.setUint16(32, 2, true); // block align
  view.setUint16(34, 16, true); // bits per sample
  ascii(36, "data");
  view.setUint32(40, dataBytes, true);

  for (let i = 0; i < samples.length; i++) {
    const clamped = Math.max(-1, Math.min(1, samples[i]));
    view.setInt16(44 + i * 2, Math.round(clamped * 32767), true);
  }
  return buffer;
}

/** Capture-rate samples -> 16 kHz mono PCM16 WAV bytes, in one step. */
export function recordingToWav(
  samples: Float32Array,
  captureRateHz: number,
): ArrayBuffer {
  return encodeWavPcm16(downsample(samples, captureRateHz));
}
