"""Synthetic data with known ground truth, for tests and benchmarks.

Two generators live here. The embedding-level one draws speaker
offsets from a low-rank Gaussian subspace plus isotropic residual
noise; because that is exactly the generative family the scorer
assumes, the true generator parameters double as a Bayes-optimal
reference scorer. The audio-level one synthesizes crude but
speaker-distinct "voices" (pulse-train excitation through a cascade
of per-speaker formant resonators, gated into bursts with real
silence gaps) and writes a WAV corpus plus gallery metadata, so the
whole pipeline from bytes to ranked speakers can run without any
recorded speech.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .plda import PldaModel

# --------------------------------------------------------------------
# embedding-level generator
# --------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingWorld:
    """Linear-Gaussian population: eta = mean + basis @ y + noise.

    ``y`` is a standard normal speaker factor shared by all of a
    speaker's utterances; the residual is drawn fresh per utterance.
    """

    mean: np.ndarray
    speaker_basis: np.ndarray  # (dim, speaker_rank)
    noise_std: float

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def speaker_rank(self) -> int:
        return self.speaker_basis.shape[1]

    def oracle_scorer(self) -> PldaModel:
        """Scorer built from the true parameters (Bayes optimal here)."""
        sigma = (self.noise_std ** 2) * np.eye(self.dim)
        model = PldaModel(mu=self.mean.copy(), V=self.speaker_basis.copy(),
                          Sigma=sigma)
        model.finalize()
        return model

    def sample_speakers(self, count: int, rng) -> np.ndarray:
        """Per-speaker offsets from the population mean, shape (count, dim)."""
        factors = rng.standard_normal((count, self.speaker_rank))
        return factors @ self.speaker_basis.T

    def sample_utterances(self, offsets: np.ndarray, per_speaker: int,
                          rng) -> tuple[np.ndarray, list[str]]:
        """Draw ``per_speaker`` embeddings around each speaker offset."""
        num = offsets.shape[0] * per_speaker
        noise = rng.standard_normal((num, self.dim)) * self.noise_std
        etas = np.repeat(offsets, per_speaker, axis=0) + self.mean + noise
        labels = [f"spk{i:04d}" for i in range(offsets.shape[0])
                  for _ in range(per_speaker)]
        return etas, labels


def make_embedding_world(dim: int, speaker_rank: int, rng,
                         speaker_scale: float = 3.0,
                         noise_std: float = 1.0) -> EmbeddingWorld:
    """Random world with controllable between/within speaker spread."""
    basis = rng.standard_normal((dim, speaker_rank))
    basis *= speaker_scale / np.sqrt(speaker_rank)
    mean = rng.standard_normal(dim)
    return EmbeddingWorld(mean=mean, speaker_basis=basis,
                          noise_std=float(noise_std))


def make_verification_trials(labels, rng, num_target: int,
                             num_nontarget: int):
    """Sample (i, j, is_target) index pairs from labeled embeddings."""
    labels = list(labels)
    by_speaker: dict[str, list[int]] = {}
    for idx, lab in enumerate(labels):
        by_speaker.setdefault(lab, []).append(idx)
    multi = [ids for ids in by_speaker.values() if len(ids) >= 2]
    if not multi:
        raise ValueError("need at least one speaker with two utterances")
    speakers = list(by_speaker)

    trials = []
    for _ in range(num_target):
        ids = multi[rng.integers(len(multi))]
        i, j = rng.choice(len(ids), size=2, replace=False)
        trials.append((ids[i], ids[j], True))
    for _ in range(num_nontarget):
        a, b = rng.choice(len(speakers), size=2, replace=False)
        i = by_speaker[speakers[a]][rng.integers(len(by_speaker[speakers[a]]))]
        j = by_speaker[speakers[b]][rng.integers(len(by_speaker[speakers[b]]))]
        trials.append((i, j, False))
    return trials


# --------------------------------------------------------------------
# audio-level generator
# --------------------------------------------------------------------

_F1_RANGE = (300.0, 900.0)
_F2_RANGE = (1000.0, 2400.0)
_F3_RANGE = (2500.0, 3400.0)
_F0_RANGE = (85.0, 255.0)


@dataclass(frozen=True)
class VoiceProfile:
    """Sparse parametric description of one synthetic speaker."""

    fundamental_hz: float
    formants_hz: tuple
    bandwidths_hz: tuple
    breathiness: float


def sample_voice_profile(rng) -> VoiceProfile:
    """Draw a speaker voice; wide ranges keep speakers distinguishable."""
    formants = (rng.uniform(*_F1_RANGE), rng.uniform(*_F2_RANGE),
                rng.uniform(*_F3_RANGE))
    bandwidths = tuple(rng.uniform(60.0, 140.0) for _ in formants)
    return VoiceProfile(fundamental_hz=float(rng.uniform(*_F0_RANGE)),
                        formants_hz=formants, bandwidths_hz=bandwidths,
                        breathiness=float(rng.uniform(0.02, 0.12)))


def _resonator_coeffs(freq_hz, bandwidth_hz, sample_rate_hz):
    r = np.exp(-np.pi * bandwidth_hz / sample_rate_hz)
    theta = 2.0 * np.pi * freq_hz / sample_rate_hz
    a = np.array([1.0, -2.0 * r * np.cos(theta), r * r])
    # unit gain at the resonant frequency
    b = np.array([1.0 - r])
    return b, a


def _burst_envelope(num_samples, sample_rate_hz, rng):
    """On/off gating with jittered segment lengths and soft edges."""
    env = np.zeros(num_samples)
    pos = 0
    voiced = True
    edge = max(1, int(0.01 * sample_rate_hz))
    ramp = np.linspace(0.0, 1.0, edge)
    while pos < num_samples:
        length_s = rng.uniform(0.35, 0.75) if voiced else rng.uniform(0.1, 0.3)
        seg = min(int(length_s * sample_rate_hz), num_samples - pos)
        if voiced and seg > 0:
            env[pos:pos + seg] = 1.0
            k = min(edge, seg)
            env[pos:pos + k] = ramp[:k]
            env[pos + seg - k:pos + seg] = ramp[:k][::-1]
        pos += seg
        voiced = not voiced
    return env


def synthesize_utterance(profile: VoiceProfile, duration_s: float, rng,
                         sample_rate_hz: int = 16000) -> np.ndarray:
    """Render one burst-gated utterance for the given voice.

    Excitation is a jittered impulse train at the speaker fundamental
    mixed with a little noise, pushed through the speaker's formant
    resonators. Output peaks near 0.5 with a faint sensor-noise floor
    to keep the silence gaps realistic rather than digitally zero.
    """
    n = int(round(duration_s * sample_rate_hz))
    f0 = profile.fundamental_hz * (1.0 + 0.04 * rng.standard_normal())
    period = sample_rate_hz / max(f0, 40.0)

    excitation = np.zeros(n)
    t = rng.uniform(0.0, period)
    while t < n:
        idx = int(t)
        excitation[idx] = 1.0 + 0.15 * rng.standard_normal()
        t += period * (1.0 + 0.03 * rng.standard_normal())
    excitation += profile.breathiness * rng.standard_normal(n)

    signal = excitation
    for freq, bw in zip(profile.formants_hz, profile.bandwidths_hz):
        jittered = freq * (1.0 + 0.015 * rng.standard_normal())
        b, a = _resonator_coeffs(jittered, bw, sample_rate_hz)
        signal = lfilter(b, a, signal)

    signal = signal * _burst_envelope(n, sample_rate_hz, rng)
    peak = np.max(np.abs(signal))
    if peak > 0:
        signal = 0.5 * signal / peak
    signal += 1e-4 * rng.standard_normal(n)
    return signal


def encode_wav_pcm16(samples: np.ndarray, sample_rate_hz: int) -> bytes:
    """Minimal mono PCM16 WAV writer (canonical 44-byte header)."""
    clipped = np.clip(samples, -1.0, 1.0)
    pcm = (clipped * 32767.0).astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, 1, 1, sample_rate_hz, sample_rate_hz * 2, 2, 16,
        b"data", len(pcm))
    return header + pcm


@dataclass
class CorpusManifest:
    """Where a generated corpus lives and what is in it."""

    root: Path
    metadata_path: Path
    entries: list = field(default_factory=list)

    def paths_for_speaker(self, speaker_id: str) -> list:
        return [self.root / e["audio_path"] for e in self.entries
                if e["speaker_id"] == speaker_id]

    def path_of(self, utterance_id: str) -> Path:
        for e in self.entries:
            if e["utterance_id"] == utterance_id:
                return self.root / e["audio_path"]
        raise KeyError(utterance_id)

    @property
    def speaker_ids(self) -> list:
        seen = dict.fromkeys(e["speaker_id"] for e in self.entries)
        return list(seen)


def generate_audio_corpus(root, num_speakers: int,
                          utterances_per_speaker: int,
                          duration_s: float = 3.0, seed: int = 0,
                          sample_rate_hz: int = 16000,
                          fps: float = 25.0) -> CorpusManifest:
    """Write a WAV corpus plus metadata rows for gallery ingestion.

    Each utterance gets a fabricated source-video id and a frame range
    consistent with its duration, so the metadata file exercises the
    same ingestion path as real annotations.
    """
    root = Path(root)
    audio_dir = root / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    manifest = CorpusManifest(root=root, metadata_path=root / "metadata.jsonl")
    rows = []
    for s in range(num_speakers):
        speaker_id = f"spk{s:04d}"
        profile = sample_voice_profile(rng)
        for u in range(utterances_per_speaker):
            utt_id = f"{speaker_id}_utt{u:03d}"
            wav_path = audio_dir / f"{utt_id}.wav"
            samples = synthesize_utterance(profile, duration_s, rng,
                                           sample_rate_hz)
            wav_path.write_bytes(encode_wav_pcm16(samples, sample_rate_hz))
            start = int(rng.integers(0, 90000))
            row = {
                "speaker_id": speaker_id,
                "display_name": f"Synthetic Speaker {s:04d}",
                "utterance_id": utt_id,
                "video_id": f"synthvid{s:04d}x{u:03d}",
                "start_frame": start,
                "end_frame": start + int(round(duration_s * fps)),
                "fps": fps,
                # corpus-root-relative so the corpus directory can move
                "audio_path": str(Path("audio") / f"{utt_id}.wav"),
            }
            rows.append(row)
            manifest.entries.append(row)

    with open(manifest.metadata_path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return manifest
