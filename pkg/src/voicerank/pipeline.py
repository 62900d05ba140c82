"""End-to-end identification engine: WAV bytes in, ranked speakers out.

Wires the front end (decode, MFCC, VAD, CMVN), the UBM sufficient-stats
and MAP-adaptation step, PPCA compression, i-vector post-processing,
and gallery scoring into one object that owns the loaded models. Each
identify() call times every stage with a monotonic clock and reports
milliseconds at 0.1 ms resolution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import container
from .audio import AudioClip, FeatureConfig, decode_wav, extract_features
from .embedding import (IVector, PpcaModel, center_and_normalize,
                        extract_ivector, train_ppca)
from .errors import ModelsNotLoaded
from .gallery import (Gallery, SpeakerCollapse, ingest_metadata_text,
                      rank_speakers)
from .gmm import DiagonalGmm, compute_stats, map_adapt_means, train_ubm
from .plda import (IdentificationIndex, PldaModel, build_index,
                   score_projected, train_plda)

DEFAULT_RELEVANCE = 16.0

STAGE_NAMES = ("audio_load_mfcc", "suff_stats", "map_adapt", "ppca_project",
               "center_lnorm", "plda_project", "plda_score", "sort_speakers",
               "total_server")


@dataclass(frozen=True)
class TimingReport:
    """Wall time per pipeline stage, in milliseconds."""

    audio_load_mfcc: float = 0.0
    suff_stats: float = 0.0
    map_adapt: float = 0.0
    ppca_project: float = 0.0
    center_lnorm: float = 0.0
    plda_project: float = 0.0
    plda_score: float = 0.0
    sort_speakers: float = 0.0
    total_server: float = 0.0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_seconds(cls, marks: dict) -> "TimingReport":
        """Round stage durations (seconds) into a 0.1 ms-resolution report."""
        return cls(**{name: round(seconds * 1e3, 1)
                      for name, seconds in marks.items()})


class _StageClock:
    """Tiny helper: clock.lap('name') records time since the previous lap."""

    def __init__(self):
        self.marks: dict = {}
        self.start = time.perf_counter()
        self._last = self.start

    def lap(self, name: str):
        now = time.perf_counter()
        self.marks[name] = now - self._last
        self._last = now

    def finish(self) -> dict:
        self.marks["total_server"] = time.perf_counter() - self.start
        return self.marks


@dataclass
class IdentificationOutcome:
    """What one identification produced: ranked speakers plus timings."""

    results: list
    timing: TimingReport


@dataclass(frozen=True)
class TrainingPlan:
    """Dimensions and subset fractions for fitting the model stack.

    The background model sees only ubm_fraction of the utterances and
    the compressor ppca_fraction (floored at ivector_dim + 1 samples);
    the scoring model always trains on everything.
    """

    components: int = 64
    ivector_dim: int = 100
    speaker_dim: int = 50
    ubm_fraction: float = 1.0 / 30.0
    ppca_fraction: float = 1.0 / 15.0
    relevance: float = DEFAULT_RELEVANCE
    seed: int = 0


def train_model_stack(features, labels, plan: TrainingPlan,
                      progress=None) -> container.ModelSet:
    """Fit UBM, compressor, population mean, and scorer from features.

    Args:
        features: one feature matrix per utterance.
        labels: parallel speaker labels.
        plan: dimensions, subset fractions, and the seed.
        progress: optional callable taking one status string.

    Returns a ModelSet ready to serialize (without an enrollment index).
    """
    say = progress or (lambda msg: None)
    features = list(features)
    labels = list(labels)
    if len(features) != len(labels):
        raise ValueError("features and labels must align")
    rng = np.random.default_rng(plan.seed)
    n = len(features)

    t0 = time.perf_counter()
    n_ubm = max(1, int(round(plan.ubm_fraction * n)))
    pick = np.sort(rng.choice(n, size=n_ubm, replace=False))
    frames = np.vstack([features[i].frames for i in pick])
    ubm = train_ubm(frames, plan.components)
    say(f"ubm: {plan.components} components on {n_ubm}/{n} utterances "
        f"({frames.shape[0]} frames) [{time.perf_counter() - t0:.1f}s]")

    t0 = time.perf_counter()
    supervectors = np.vstack([
        map_adapt_means(compute_stats(f, ubm), ubm, plan.relevance)
        for f in features])
    say(f"map supervectors: {supervectors.shape} "
        f"[{time.perf_counter() - t0:.1f}s]")

    t0 = time.perf_counter()
    n_ppca = min(n, max(plan.ivector_dim + 1,
                        int(round(plan.ppca_fraction * n))))
    pick = np.sort(rng.choice(n, size=n_ppca, replace=False))
    ppca = train_ppca(supervectors[pick], plan.ivector_dim, seed=plan.seed)
    say(f"ppca: {plan.ivector_dim}-dim on {n_ppca}/{n} supervectors "
        f"[{time.perf_counter() - t0:.1f}s]")

    t0 = time.perf_counter()
    raw = np.vstack([extract_ivector(sv, ppca).eta for sv in supervectors])
    ivector_mean = raw.mean(axis=0)
    ivectors = [center_and_normalize(IVector(eta=eta), ivector_mean)
                for eta in raw]
    plda = train_plda(list(zip(labels, ivectors)), plan.speaker_dim,
                      seed=plan.seed)
    say(f"plda: {plan.speaker_dim}-dim speaker space on {n} i-vectors "
        f"[{time.perf_counter() - t0:.1f}s]")

    return container.ModelSet(ubm=ubm, ppca=ppca,
                              ivector_mean=ivector_mean, plda=plda)


def enroll_index(models: container.ModelSet, embedded,
                 dtype=np.float64) -> container.ModelSet:
    """Attach an enrollment index built from (utterance_id, IVector) pairs."""
    models.index = build_index(list(embedded), models.plda, dtype=dtype)
    return models


@dataclass
class IdentificationEngine:
    """Preloaded model stack plus the methods that drive it."""

    ubm: DiagonalGmm
    ppca: PpcaModel
    ivector_mean: np.ndarray
    plda: PldaModel
    index: IdentificationIndex = None
    gallery: Gallery = None
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)
    relevance: float = DEFAULT_RELEVANCE
    score_workers: int = 1
    _collapse: SpeakerCollapse = field(default=None, repr=False,
                                       compare=False)

    @classmethod
    def from_container(cls, path, gallery: Gallery = None,
                       feature_config: FeatureConfig = None,
                       relevance: float = DEFAULT_RELEVANCE,
                       score_workers: int = 1) -> "IdentificationEngine":
        """Load a model container; an embedded gallery is used as fallback."""
        models = container.load(path)
        missing = [name for name in ("ubm", "ppca", "ivector_mean", "plda")
                   if getattr(models, name) is None]
        if missing:
            raise ModelsNotLoaded(
                f"container {path} lacks sections: {', '.join(missing)}")
        if gallery is None and models.gallery_jsonl is not None:
            gallery = ingest_metadata_text(
                models.gallery_jsonl.decode("utf-8"),
                apply_selection_rule=False)
        return cls(ubm=models.ubm, ppca=models.ppca,
                   ivector_mean=models.ivector_mean, plda=models.plda,
                   index=models.index, gallery=gallery,
                   feature_config=feature_config or FeatureConfig(),
                   relevance=relevance, score_workers=score_workers)

    # ---- embedding -------------------------------------------------

    def embed_clip(self, clip: AudioClip) -> IVector:
        """Run one decoded clip through features → stats → MAP → i-vector."""
        feat = extract_features(clip, self.feature_config)
        stats = compute_stats(feat, self.ubm)
        supervector = map_adapt_means(stats, self.ubm, self.relevance)
        ivec = extract_ivector(supervector, self.ppca)
        return center_and_normalize(ivec, self.ivector_mean)

    def embed_wav_bytes(self, data: bytes) -> IVector:
        return self.embed_clip(decode_wav(data))

    def embed_wav_file(self, path) -> IVector:
        with open(path, "rb") as fh:
            return self.embed_wav_bytes(fh.read())

    # ---- identification --------------------------------------------

    def identify(self, wav_bytes: bytes, k: int = 5) -> IdentificationOutcome:
        """Full scoring path against the loaded gallery, with timings.

        Raises ModelsNotLoaded when no index/gallery is attached, plus
        whatever the front end raises for undecodable or silent audio.
        """
        self._require_gallery()
        clock = _StageClock()
        return self._identify_from(decode_wav(wav_bytes), clock, k)

    def identify_clip(self, clip: AudioClip, k: int = 5) -> IdentificationOutcome:
        """Like identify(), for audio that is already decoded."""
        self._require_gallery()
        return self._identify_from(clip, _StageClock(), k)

    def _require_gallery(self):
        if self.index is None or self.gallery is None:
            raise ModelsNotLoaded("no enrollment index/gallery loaded")
        if self._collapse is None:
            self._collapse = SpeakerCollapse.build(self.index, self.gallery)

    def _identify_from(self, clip: AudioClip, clock: _StageClock,
                       k: int) -> IdentificationOutcome:
        feat = extract_features(clip, self.feature_config)
        clock.lap("audio_load_mfcc")

        stats = compute_stats(feat, self.ubm)
        clock.lap("suff_stats")

        supervector = map_adapt_means(stats, self.ubm, self.relevance)
        clock.lap("map_adapt")

        ivec = extract_ivector(supervector, self.ppca)
        clock.lap("ppca_project")

        ivec = center_and_normalize(ivec, self.ivector_mean)
        clock.lap("center_lnorm")

        query = self.plda.project(ivec.eta)
        clock.lap("plda_project")

        scores = score_projected(query, self.index,
                                 workers=self.score_workers)
        clock.lap("plda_score")

        results = rank_speakers(scores, self.index, self.gallery, k=k,
                                collapse=self._collapse)
        clock.lap("sort_speakers")

        timing = TimingReport.from_seconds(clock.finish())
        return IdentificationOutcome(results=results, timing=timing)
