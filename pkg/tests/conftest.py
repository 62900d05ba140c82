"""Shared fixtures: a small synthetic corpus and a trained model stack.

Both are session-scoped because generating audio and fitting models—
while fast at these sizes—adds up across the test files that need them.
"""

import json
import sys

import numpy as np
import pytest

from voicerank.audio import decode_wav, extract_features
from voicerank.gallery import ingest_metadata_text
from voicerank.pipeline import (IdentificationEngine, TrainingPlan,
                                enroll_index, train_model_stack)
from voicerank.synthetic import generate_audio_corpus


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    return generate_audio_corpus(root, num_speakers=6,
                                 utterances_per_speaker=7,
                                 duration_s=6.0, seed=1)


@pytest.fixture(scope="session")
def tiny_features(tiny_corpus):
    feats = {}
    for entry in tiny_corpus.entries:
        wav = (tiny_corpus.root / entry["audio_path"]).read_bytes()
        feats[entry["utterance_id"]] = extract_features(decode_wav(wav))
    return feats


@pytest.fixture(scope="session")
def trained_models(tiny_corpus, tiny_features):
    plan = TrainingPlan(components=8, ivector_dim=16, speaker_dim=5,
                        ubm_fraction=1.0, ppca_fraction=1.0, seed=1)
    feats = [tiny_features[e["utterance_id"]] for e in tiny_corpus.entries]
    labels = [e["speaker_id"] for e in tiny_corpus.entries]
    models = train_model_stack(feats, labels, plan)

    engine = IdentificationEngine(ubm=models.ubm, ppca=models.ppca,
                                  ivector_mean=models.ivector_mean,
                                  plda=models.plda)
    embedded = []
    for entry in tiny_corpus.entries:
        wav = (tiny_corpus.root / entry["audio_path"]).read_bytes()
        embedded.append((entry["utterance_id"], engine.embed_wav_bytes(wav)))
    enroll_index(models, embedded, dtype=np.float64)
    models.gallery_jsonl = "\n".join(
        json.dumps(e) for e in tiny_corpus.entries).encode("utf-8")
    return models


@pytest.fixture(scope="session")
def engine(tiny_corpus, trained_models):
    gallery = ingest_metadata_text(
        trained_models.gallery_jsonl.decode("utf-8"))
    return IdentificationEngine(
        ubm=trained_models.ubm, ppca=trained_models.ppca,
        ivector_mean=trained_models.ivector_mean, plda=trained_models.plda,
        index=trained_models.index, gallery=gallery)


@pytest.fixture(scope="session")
def sample_wav(tiny_corpus):
    entry = tiny_corpus.entries[10]
    wav = (tiny_corpus.root / entry["audio_path"]).read_bytes()
    return entry["speaker_id"], wav


def pytest_terminal_summary(terminalreporter):
    """Replay the per-criterion verdict lines from the acceptance suite.

    They are printed inside the tests too, but default fd-level capture
    swallows that copy; the terminal reporter writes to the real stdout.
    """
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULT_LINES", None) if acceptance else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
