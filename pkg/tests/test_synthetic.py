"""Synthetic data generators: embedding worlds and rendered audio corpora."""

import json

import numpy as np
import pytest

from voicerank.audio import decode_wav, extract_features
from voicerank.embedding import IVector
from voicerank.gallery import ingest_metadata
from voicerank.plda import score_pairwise
from voicerank.synthetic import (EmbeddingWorld, encode_wav_pcm16,
                                 generate_audio_corpus,
                                 make_embedding_world,
                                 make_verification_trials,
                                 sample_voice_profile, synthesize_utterance)


class TestEmbeddingWorld:
    def test_shapes_and_labels(self):
        rng = np.random.default_rng(0)
        world = make_embedding_world(16, 4, rng)
        offsets = world.sample_speakers(5, rng)
        etas, labels = world.sample_utterances(offsets, 3, rng)
        assert offsets.shape == (5, 16)
        assert etas.shape == (15, 16)
        assert labels[:4] == ["spk0000"] * 3 + ["spk0001"]
        assert len(set(labels)) == 5

    def test_oracle_separates_same_from_different(self):
        rng = np.random.default_rng(1)
        world = make_embedding_world(12, 3, rng)
        oracle = world.oracle_scorer()
        offsets = world.sample_speakers(20, rng)
        etas, labels = world.sample_utterances(offsets, 4, rng)
        ivs = [IVector(e / np.linalg.norm(e), normalized=True) for e in etas]
        target, nontarget = [], []
        for i, j, is_target in make_verification_trials(
                labels, rng, num_target=150, num_nontarget=150):
            s = score_pairwise(ivs[i], ivs[j], oracle)
            (target if is_target else nontarget).append(s)
        assert np.mean(target) > np.mean(nontarget)

    def test_within_speaker_spread_matches_noise(self):
        rng = np.random.default_rng(2)
        world = make_embedding_world(10, 2, rng, noise_std=0.7)
        offsets = world.sample_speakers(1, rng)
        etas, _ = world.sample_utterances(offsets, 4000, rng)
        per_dim_std = etas.std(axis=0)
        assert np.allclose(per_dim_std, 0.7, atol=0.05)

    def test_between_speaker_scale(self):
        rng = np.random.default_rng(3)
        world = make_embedding_world(50, 10, rng, speaker_scale=3.0,
                                     noise_std=1e-9)
        offsets = world.sample_speakers(4000, rng)
        # per-dimension variance of offsets is the squared basis row norm;
        # the 1/sqrt(rank) convention puts its average near speaker_scale^2
        want = (world.speaker_basis ** 2).sum(axis=1)
        assert np.allclose(offsets.var(axis=0), want, rtol=0.15)
        assert abs(want.mean() - 9.0) < 2.0


class TestVerificationTrials:
    def test_trial_labels_are_correct(self):
        rng = np.random.default_rng(4)
        labels = [f"s{i % 7}" for i in range(35)]
        trials = make_verification_trials(labels, rng, 40, 60)
        assert len(trials) == 100
        for i, j, is_target in trials:
            assert i != j
            assert (labels[i] == labels[j]) == is_target
        assert sum(t for _, _, t in trials) == 40

    def test_requires_a_multi_session_speaker(self):
        rng = np.random.default_rng(5)
        with pytest.raises(ValueError):
            make_verification_trials(["a", "b", "c"], rng, 1, 1)


class TestVoiceSynthesis:
    def test_profile_ranges(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            p = sample_voice_profile(rng)
            assert 85.0 <= p.fundamental_hz <= 255.0
            f1, f2, f3 = p.formants_hz
            assert 300.0 <= f1 <= 900.0 < 1000.0 <= f2 <= 2400.0
            assert 2500.0 <= f3 <= 3400.0
            assert all(60.0 <= b <= 140.0 for b in p.bandwidths_hz)
            assert 0.02 <= p.breathiness <= 0.12

    def test_utterance_length_peak_and_floor(self):
        rng = np.random.default_rng(7)
        x = synthesize_utterance(sample_voice_profile(rng), 2.0, rng)
        assert len(x) == 32000
        assert 0.45 <= np.max(np.abs(x)) <= 0.55
        assert x.std() > 0  # noise floor keeps gaps non-degenerate

    def test_fundamental_shows_up_in_spectrum(self):
        rng = np.random.default_rng(8)
        profile = sample_voice_profile(rng)
        x = synthesize_utterance(profile, 4.0, rng)
        spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
        freqs = np.fft.rfftfreq(len(x), 1.0 / 16000)
        band = (freqs > 60) & (freqs < 300)
        peak_hz = freqs[band][np.argmax(spec[band])]
        # f0 jitters by a few percent per utterance
        assert abs(peak_hz - profile.fundamental_hz) < 0.12 * profile.fundamental_hz

    def test_features_extractable(self):
        rng = np.random.default_rng(9)
        x = synthesize_utterance(sample_voice_profile(rng), 3.0, rng)
        wav = encode_wav_pcm16(x, 16000)
        feat = extract_features(decode_wav(wav))
        assert feat.frames.shape[1] == 60
        assert 0.3 < feat.vad_kept_ratio <= 1.0


class TestEncodeWav:
    def test_header_layout(self):
        wav = encode_wav_pcm16(np.zeros(160), 16000)
        assert wav[:4] == b"RIFF" and wav[8:12] == b"WAVE"
        assert len(wav) == 44 + 320
        assert int.from_bytes(wav[4:8], "little") == len(wav) - 8

    def test_round_trip_through_decoder(self):
        rng = np.random.default_rng(10)
        x = 0.3 * np.sin(2 * np.pi * 440 * np.arange(16000) / 16000)
        clip = decode_wav(encode_wav_pcm16(x, 16000))
        assert np.max(np.abs(clip.samples - x)) < 1e-3
        assert clip.sample_rate_hz == 16000


class TestGenerateAudioCorpus:
    def test_layout_and_metadata(self, tmp_path):
        manifest = generate_audio_corpus(tmp_path / "c", num_speakers=2,
                                         utterances_per_speaker=3,
                                         duration_s=1.5, seed=0)
        assert manifest.metadata_path.exists()
        assert len(manifest.entries) == 6
        assert manifest.speaker_ids == ["spk0000", "spk0001"]
        for entry in manifest.entries:
            wav_path = manifest.root / entry["audio_path"]
            assert wav_path.exists()
            clip = decode_wav(wav_path.read_bytes())
            assert abs(clip.duration_s - 1.5) < 0.01
            frames = entry["end_frame"] - entry["start_frame"]
            # frame counts are whole numbers, so durations are quantized
            # to the frame grid (here 37.5 -> 38 frames)
            assert abs(frames / entry["fps"] - 1.5) <= 0.5 / entry["fps"] + 1e-9

    def test_paths_are_corpus_root_relative(self, tmp_path):
        manifest = generate_audio_corpus(tmp_path / "c", 1, 1,
                                         duration_s=1.0, seed=0)
        entry = manifest.entries[0]
        assert not entry["audio_path"].startswith("/")
        assert manifest.path_of(entry["utterance_id"]).exists()
        assert manifest.paths_for_speaker("spk0000") == [
            manifest.root / entry["audio_path"]]

    def test_deterministic_given_seed(self, tmp_path):
        a = generate_audio_corpus(tmp_path / "a", 2, 2, duration_s=1.0, seed=3)
        b = generate_audio_corpus(tmp_path / "b", 2, 2, duration_s=1.0, seed=3)
        for ea, eb in zip(a.entries, b.entries):
            assert (a.root / ea["audio_path"]).read_bytes() == \
                (b.root / eb["audio_path"]).read_bytes()
        meta_a = a.metadata_path.read_text().replace(str(a.root), "")
        meta_b = b.metadata_path.read_text().replace(str(b.root), "")
        assert meta_a == meta_b

    def test_metadata_feeds_gallery_ingestion(self, tmp_path):
        manifest = generate_audio_corpus(tmp_path / "c", num_speakers=3,
                                         utterances_per_speaker=6,
                                         duration_s=6.0, seed=1)
        gallery = ingest_metadata(manifest.metadata_path)
        assert len(gallery) == 3          # 6 utts of 6 s pass the rule
        assert gallery.num_utterances == 18
        raw = ingest_metadata(manifest.metadata_path,
                              apply_selection_rule=False)
        assert raw.num_utterances == 18

    def test_speakers_sound_different(self, tmp_path):
        # two speakers' long-term spectra should differ more across
        # speakers than within one speaker's own utterances
        manifest = generate_audio_corpus(tmp_path / "c", 2, 2,
                                         duration_s=3.0, seed=5)

        def mean_logspec(path):
            clip = decode_wav(path.read_bytes())
            spec = np.abs(np.fft.rfft(clip.samples)) + 1e-9
            return np.log(spec[:2000])

        s0 = [mean_logspec(p) for p in manifest.paths_for_speaker("spk0000")]
        s1 = [mean_logspec(p) for p in manifest.paths_for_speaker("spk0001")]
        within = np.linalg.norm(s0[0] - s0[1])
        across = np.linalg.norm(s0[0] - s1[0])
        assert across > within
