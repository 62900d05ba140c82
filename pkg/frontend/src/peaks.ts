/** Rolling waveform peaks for the live level display. */

/** Largest absolute amplitude in one audio chunk. */
export function chunkPeak(chunk: Float32Array | number[]): number {
  let peak = 0;
  for (let i = 0; i < chunk.length; i++) {
    const a = Math.abs(chunk[i]);
    if (a > peak) peak = a;
  }
  return peak;
}

/**
 * Max-pool a per-chunk peak history into a fixed number of display bins.
 * Shorter histories are left-aligned and zero-padded so the drawing
 * surface never rescales while recording.
 */
export function peaksToBins(peaks: number[], binCount: number): number[] {
  if (binCount <= 0) throw new RangeError(`binCount must be positive, got ${binCount}`);
  const bins = new Array<number>(binCount).fill(0);
  if (peaks.length === 0) return bins;
  if (peaks.length <= binCount) {
    for (let i = 0; i < peaks.length; i++) bins[i] = peaks[i];
    return bins;
  }
  for (let b = 0; b < binCount; b++) {
    const start = Math.floor((b * peaks.length) / binCount);
    const end = Math.floor(((b + 1) * peaks.length) / binCount);
    let m = 0;
    for (let i = start; i < Math.max(end, start + 1); i++) {
      if (peaks[i] > m) m = peaks[i];
    }
    bins[b] = m;
  }
  return bins;
}
