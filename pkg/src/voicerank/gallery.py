"""Speaker/utterance metadata, selection filtering, and top-k ranking."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DuplicateUtterance, EmptyGallery, ParseError
from .plda import IdentificationIndex

DEFAULT_FPS = 25.0
VIDEO_URL_TEMPLATE = "https://www.youtube.com/watch?v={video_id}&t={start}s"

# corpus selection rule: keep speakers with more than this many
# sufficiently long utterances
MIN_UTTERANCE_S = 5.0
MIN_UTTERANCES_EXCLUSIVE = 5


@dataclass(frozen=True)
class UtteranceRef:
    utterance_id: str
    video_id: str
    clip_start_s: float
    clip_end_s: float

    @property
    def duration_s(self) -> float:
        return self.clip_end_s - self.clip_start_s

    @property
    def video_url(self) -> str:
        return VIDEO_URL_TEMPLATE.format(video_id=self.video_id,
                                         start=math.floor(self.clip_start_s))


@dataclass(frozen=True)
class SpeakerRecord:
    speaker_id: str
    display_name: str
    utterances: tuple


@dataclass(frozen=True)
class RankedResult:
    rank: int
    speaker_id: str
    display_name: str
    best_utterance: UtteranceRef
    score: float

    @property
    def video_url(self) -> str:
        return self.best_utterance.video_url


class Gallery:
    """Immutable speaker metadata with utterance-id lookup."""

    def __init__(self, records):
        self.records = tuple(records)
        self._by_speaker = {r.speaker_id: r for r in self.records}
        self._speaker_of = {}
        for rec in self.records:
            for utt in rec.utterances:
                self._speaker_of[utt.utterance_id] = rec.speaker_id

    def __len__(self):
        return len(self.records)

    @property
    def num_utterances(self) -> int:
        return len(self._speaker_of)

    def speaker(self, speaker_id: str) -> SpeakerRecord:
        return self._by_speaker[speaker_id]

    def speaker_of(self, utterance_id: str) -> str:
        return self._speaker_of[utterance_id]

    def __contains__(self, speaker_id: str) -> bool:
        return speaker_id in self._by_speaker

    def utterance_ids(self):
        return tuple(self._speaker_of)


REQUIRED_FIELDS = ("speaker_id", "display_name", "utterance_id", "video_id",
                   "start_frame", "end_frame")


def ingest_metadata(path, apply_selection_rule: bool = True) -> Gallery:
    """Load a JSON-lines corpus metadata file into a Gallery.

    See ingest_metadata_text for the row format and selection rule.
    """
    return ingest_metadata_text(Path(path).read_text(encoding="utf-8"),
                                apply_selection_rule=apply_selection_rule)


def ingest_metadata_text(text: str, apply_selection_rule: bool = True) -> Gallery:
    """Parse JSON-lines gallery metadata already held in memory.

    Each line is an object with speaker_id, display_name, utterance_id,
    video_id, start_frame, end_frame and optional fps (default 25); frame
    offsets convert to clip seconds at ingestion. When the selection rule
    is on, utterances shorter than five seconds are dropped and speakers
    keep their slot only with more than five remaining utterances.

    Raises:
        ParseError: malformed line (message carries the line number).
        DuplicateUtterance: the same utterance id appeared twice.
    """
    per_speaker: dict = {}
    names: dict = {}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            for key in REQUIRED_FIELDS:
                if key not in row:
                    raise KeyError(key)
            fps = float(row.get("fps", DEFAULT_FPS))
            if fps <= 0:
                raise ValueError("fps must be positive")
            start_s = float(row["start_frame"]) / fps
            end_s = float(row["end_frame"]) / fps
            if end_s <= start_s:
                raise ValueError("end_frame must exceed start_frame")
            utt = UtteranceRef(utterance_id=str(row["utterance_id"]),
                               video_id=str(row["video_id"]),
                               clip_start_s=start_s, clip_end_s=end_s)
            speaker_id = str(row["speaker_id"])
            display_name = str(row["display_name"])
        except DuplicateUtterance:
            raise
        except Exception as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        if utt.utterance_id in seen:
            raise DuplicateUtterance(
                f"line {lineno}: utterance {utt.utterance_id!r} repeated")
        seen.add(utt.utterance_id)
        per_speaker.setdefault(speaker_id, []).append(utt)
        names[speaker_id] = display_name

    records = []
    for speaker_id, utts in per_speaker.items():
        if apply_selection_rule:
            utts = [u for u in utts if u.duration_s >= MIN_UTTERANCE_S]
            if len(utts) <= MIN_UTTERANCES_EXCLUSIVE:
                continue
        records.append(SpeakerRecord(speaker_id=speaker_id,
                                     display_name=names[speaker_id],
                                     utterances=tuple(utts)))
    return Gallery(records)


@dataclass(frozen=True)
class SpeakerCollapse:
    """Precomputed row -> speaker grouping for fast score collapsing.

    Building this walks the whole index once; queries then reduce to a
    gather plus one segmented maximum, which matters for large galleries.
    rows_by_speaker lists index rows grouped per speaker; speaker s owns
    the slice rows_by_speaker[segment_starts[s]:segment_starts[s + 1]].
    """

    speaker_ids: tuple
    rows_by_speaker: np.ndarray
    segment_starts: np.ndarray

    @classmethod
    def build(cls, index: IdentificationIndex,
              gallery: Gallery) -> "SpeakerCollapse":
        ordinal: dict = {}
        ordinals = np.empty(index.size, dtype=np.int32)
        for row, utt_id in enumerate(index.utterance_ids):
            speaker_id = gallery.speaker_of(utt_id)
            ordinals[row] = ordinal.setdefault(speaker_id, len(ordinal))
        if not ordinal:
            raise EmptyGallery("no utterances mapped to any speaker")
        order = np.argsort(ordinals, kind="stable")
        counts = np.bincount(ordinals, minlength=len(ordinal))
        starts = np.concatenate(([0], np.cumsum(counts)))
        return cls(speaker_ids=tuple(ordinal), rows_by_speaker=order,
                   segment_starts=starts)


def rank_speakers(scores: np.ndarray, index: IdentificationIndex,
                  gallery: Gallery, k: int = 5,
                  collapse: SpeakerCollapse = None) -> list:
    """Collapse utterance scores to a best-utterance-per-speaker top-k list.

    Each speaker is represented by their highest-scoring utterance;
    speakers are ordered by that score, ties broken by speaker_id. Ranks
    are consecutive from 1; at most min(k, #speakers) results return.
    Pass a prebuilt SpeakerCollapse to skip the per-call index walk.

    Raises:
        EmptyGallery: no index row maps to a gallery speaker.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    scores = np.asarray(scores)
    if len(scores) != index.size:
        raise ValueError(
            f"scores length {len(scores)} != index size {index.size}")
    if collapse is None:
        collapse = SpeakerCollapse.build(index, gallery)

    grouped = scores[collapse.rows_by_speaker]
    best = np.maximum.reduceat(grouped, collapse.segment_starts[:-1])

    # order speakers by descending best score, speaker_id breaking ties
    ids = np.asarray(collapse.speaker_ids)
    order = np.lexsort((ids, -best))[:k]

    results = []
    for rank, ordinal in enumerate(order, start=1):
        speaker_id = collapse.speaker_ids[ordinal]
        lo, hi = collapse.segment_starts[ordinal:ordinal + 2]
        segment = collapse.rows_by_speaker[lo:hi]
        row = segment[np.argmax(grouped[lo:hi])]
        rec = gallery.speaker(speaker_id)
        utt_id = index.utterance_ids[row]
        utt = next(u for u in rec.utterances if u.utterance_id == utt_id)
        results.append(RankedResult(rank=rank, speaker_id=speaker_id,
                                    display_name=rec.display_name,
                                    best_utterance=utt,
                                    score=float(scores[row])))
    return results
