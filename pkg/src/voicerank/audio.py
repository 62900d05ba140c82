"""WAV decoding, MFCC+delta feature extraction, energy VAD and CMVN."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import signal
from scipy.fft import dct

from .errors import (
    AllFramesRejected,
    EmptyAudio,
    MalformedContainer,
    TooShort,
    UnsupportedEncoding,
)

TARGET_RATE = 16000

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    """Mono PCM audio, amplitudes in [-1, 1], canonically at 16 kHz."""

    samples: np.ndarray
    sample_rate_hz: int

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class FeatureConfig:
    """Parameters for the MFCC front end and the energy VAD.

    Defaults: 25 ms Hamming windows with a 10 ms hop, 512-point FFT,
    27 mel filters spanning 20-7600 Hz, 20 cepstra (c0 kept, not replaced
    by log-energy; log-energy feeds only the VAD).
    """

    sample_rate_hz: int = TARGET_RATE
    window_s: float = 0.025
    hop_s: float = 0.010
    fft_size: int = 512
    mel_filters: int = 27
    mel_low_hz: float = 20.0
    mel_high_hz: float = 7600.0
    num_ceps: int = 20
    preemphasis: float = 0.97
    delta_window: int = 2
    # Frames more than vad_threshold_db below the loudest frame are dropped;
    # frames whose mean-square energy is under vad_energy_floor are dropped
    # unconditionally (catches digital silence, where every frame ties).
    vad_threshold_db: float = 30.0
    vad_energy_floor: float = 1e-10
    min_frames: int = 50

    @property
    def window_len(self) -> int:
        return int(round(self.window_s * self.sample_rate_hz))

    @property
    def hop_len(self) -> int:
        return int(round(self.hop_s * self.sample_rate_hz))

    @property
    def feature_dim(self) -> int:
        return 3 * self.num_ceps

    def to_dict(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "window_s": self.window_s,
            "hop_s": self.hop_s,
            "fft_size": self.fft_size,
            "mel_filters": self.mel_filters,
            "mel_low_hz": self.mel_low_hz,
            "mel_high_hz": self.mel_high_hz,
            "num_ceps": self.num_ceps,
            "preemphasis": self.preemphasis,
            "delta_window": self.delta_window,
            "vad_threshold_db": self.vad_threshold_db,
            "vad_energy_floor": self.vad_energy_floor,
            "min_frames": self.min_frames,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(**d)


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-utterance feature rows (T x 60) after VAD and normalization."""

    frames: np.ndarray
    frame_hop_s: float
    vad_kept_ratio: float


# ---------------------------------------------------------------------------
# WAV ingestion
# ---------------------------------------------------------------------------

def _iter_riff_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        yield cid, body
        pos += 8 + size + (size & 1)  # chunks are word-aligned


def decode_wav(data: bytes) -> AudioClip:
    """Decode a RIFF/WAVE container to a mono 16 kHz clip.

    Accepts PCM16 and IEEE-float payloads at common sample rates;
    anything else raises UnsupportedEncoding. Multi-channel audio is
    averaged down to mono before resampling.

    Raises:
        MalformedContainer: bytes are not a RIFF/WAVE file.
        UnsupportedEncoding: compressed codec or unsupported sample layout.
        EmptyAudio: the data chunk holds zero samples.
    """
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedContainer("not a RIFF/WAVE container")

    fmt = None
    payload = None
    for cid, body in _iter_riff_chunks(data):
        if cid == b"fmt " and fmt is None:
            if len(body) < 16:
                raise MalformedContainer("fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == WAVE_FORMAT_EXTENSIBLE:
                if len(body) < 40:
                    raise MalformedContainer("extensible fmt chunk truncated")
                # first two GUID bytes carry the actual format tag
                (subformat,) = struct.unpack_from("<H", body, 24)
                fmt = (subformat,) + fmt[1:]
        elif cid == b"data" and payload is None:
            payload = body

    if fmt is None or payload is None:
        raise MalformedContainer("missing fmt or data chunk")

    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if channels < 1 or rate <= 0:
        raise MalformedContainer("invalid channel count or sample rate")

    if audio_format == WAVE_FORMAT_PCM and bits == 16:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 4], dtype="<f4")
        samples = raw.astype(np.float64)
    elif audio_format == WAVE_FORMAT_IEEE_FLOAT and bits == 64:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 8], dtype="<f8")
        samples = raw.astype(np.float64)
    else:
        raise UnsupportedEncoding(
            f"format tag {audio_format:#06x} with {bits} bits is not supported"
        )

    if channels > 1:
        usable = len(samples) - len(samples) % channels
        samples = samples[:usable].reshape(-1, channels).mean(axis=1)

    if len(samples) == 0:
        raise EmptyAudio("data chunk holds zero samples")

    if rate != TARGET_RATE:
        samples = resample(samples, rate, TARGET_RATE)
        if len(samples) == 0:
            raise EmptyAudio("clip vanished during resampling")

    samples = np.clip(samples, -1.0, 1.0)
    return AudioClip(samples=samples, sample_rate_hz=TARGET_RATE)


def resample(samples: np.ndarray, src_hz: int, dst_hz: int) -> np.ndarray:
    """Polyphase resampling with a 64-taps-per-phase Kaiser-windowed sinc."""
    if src_hz == dst_hz:
        return np.asarray(samples, dtype=np.float64)
    g = np.gcd(int(src_hz), int(dst_hz))
    up, down = dst_hz // g, src_hz // g
    max_rate = max(up, down)
    half = 32 * max_rate
    n = np.arange(-half, half + 1)
    taps = np.sinc(n / max_rate) / max_rate * np.kaiser(2 * half + 1, 8.6)
    taps /= taps.sum()  # unit DC gain; resample_poly rescales by `up`
    return signal.resample_poly(np.asarray(samples, dtype=np.float64), up, down,
                                window=taps)


# ---------------------------------------------------------------------------
# MFCC front end
# ---------------------------------------------------------------------------

def _frame_signal(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    n_frames = 1 + (len(x) - win) // hop
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def _mel_filterbank(cfg: FeatureConfig) -> np.ndarray:
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    n_bins = cfg.fft_size // 2 + 1
    mels = np.linspace(hz_to_mel(cfg.mel_low_hz), hz_to_mel(cfg.mel_high_hz),
                       cfg.mel_filters + 2)
    bins = np.floor((cfg.fft_size + 1) * mel_to_hz(mels) / cfg.sample_rate_hz)
    fbank = np.zeros((cfg.mel_filters, n_bins))
    for j in range(cfg.mel_filters):
        lo, mid, hi = bins[j], bins[j + 1], bins[j + 2]
        for i in range(int(lo), int(mid)):
            fbank[j, i] = (i - lo) / max(mid - lo, 1)
        for i in range(int(mid), int(hi)):
            fbank[j, i] = (hi - i) / max(hi - mid, 1)
    return fbank


def _deltas(feat: np.ndarray, width: int) -> np.ndarray:
    padded = np.pad(feat, ((width, width), (0, 0)), mode="edge")
    denom = 2.0 * sum(j * j for j in range(1, width + 1))
    out = np.zeros_like(feat)
    t0 = width
    for j in range(1, width + 1):
        out += j * (padded[t0 + j:t0 + j + len(feat)]
                    - padded[t0 - j:t0 - j + len(feat)])
    return out / denom


def mfcc_with_energy(clip: AudioClip, cfg: FeatureConfig):
    """Static MFCCs plus per-frame log-energies (pre-VAD, pre-CMVN)."""
    x = clip.samples
    win, hop = cfg.window_len, cfg.hop_len
    if len(x) < win:
        raise TooShort(f"clip shorter than one window ({len(x)} samples)")

    raw_frames = _frame_signal(x, win, hop)
    energies = np.sum(raw_frames ** 2, axis=1)
    log_energy = np.log(np.maximum(energies, 1e-30))

    pre = np.empty_like(x)
    pre[0] = x[0]
    pre[1:] = x[1:] - cfg.preemphasis * x[:-1]
    frames = _frame_signal(pre, win, hop) * np.hamming(win)

    spec = np.abs(np.fft.rfft(frames, cfg.fft_size)) ** 2 / cfg.fft_size
    fb_energy = spec @ _mel_filterbank(cfg).T
    fb_energy = np.log(np.maximum(fb_energy, 1e-30))
    ceps = dct(fb_energy, type=2, axis=1, norm="ortho")[:, :cfg.num_ceps]
    return ceps, log_energy, energies / win


def apply_cmvn(frames: np.ndarray) -> np.ndarray:
    """Per-utterance mean/variance normalization, columns with zero spread
    are centered but left unscaled."""
    mean = frames.mean(axis=0)
    std = frames.std(axis=0)
    out = frames - mean
    nz = std > 1e-10
    out[:, nz] /= std[nz]
    return out


def extract_features(clip: AudioClip, cfg: FeatureConfig | None = None) -> FeatureMatrix:
    """Full front end: MFCC+delta+double-delta, energy VAD, then CMVN.

    Raises:
        TooShort: fewer than cfg.min_frames frames before VAD.
        AllFramesRejected: the VAD removed every frame.
    """
    cfg = cfg or FeatureConfig()
    ceps, log_energy, mean_sq = mfcc_with_energy(clip, cfg)
    n_frames = len(ceps)
    if n_frames < cfg.min_frames:
        raise TooShort(f"{n_frames} frames before VAD, need {cfg.min_frames}")

    feat = np.hstack([ceps, _deltas(ceps, cfg.delta_window),
                      _deltas(_deltas(ceps, cfg.delta_window), cfg.delta_window)])

    cutoff = log_energy.max() - cfg.vad_threshold_db * np.log(10.0) / 10.0
    keep = (log_energy >= cutoff) & (mean_sq >= cfg.vad_energy_floor)
    if not keep.any():
        raise AllFramesRejected("energy VAD removed every frame")

    kept = apply_cmvn(feat[keep])
    return FeatureMatrix(frames=kept, frame_hop_s=cfg.hop_s,
                         vad_kept_ratio=float(keep.mean()))
