"""Evaluation harnesses: verification EER, rank testing, length sweep,
and scoring benchmarks.

Everything here consumes and emits plain rows (lists of dicts) so the
CLI can serialize them as CSV and runs stay diffable.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip
from .errors import ClipTooShort, MissingUtterance, UnknownSpeakerLabel
from .plda import PldaModel, score_pairwise

# --------------------------------------------------------------------
# verification trials and EER
# --------------------------------------------------------------------


@dataclass(frozen=True)
class Trial:
    """One verification trial: does test_id match enroll_id's speaker?"""

    enroll_id: str
    test_id: str
    target: bool


def load_trial_list(path) -> list:
    """Read trials from CSV with columns enroll_id,test_id,label."""
    trials = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            label = row["label"].strip().lower()
            if label not in ("same", "different"):
                raise ValueError(f"unknown trial label {row['label']!r}")
            trials.append(Trial(enroll_id=row["enroll_id"].strip(),
                                test_id=row["test_id"].strip(),
                                target=label == "same"))
    return trials


def save_trial_list(path, trials):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["enroll_id", "test_id", "label"])
        for t in trials:
            writer.writerow([t.enroll_id, t.test_id,
                             "same" if t.target else "different"])


def score_trial_list(trials, ivectors: dict, model: PldaModel):
    """Score every trial with the pairwise log-likelihood ratio.

    ivectors maps utterance id -> normalized i-vector. Returns parallel
    (scores, labels) arrays. Raises MissingUtterance for unresolvable ids.
    """
    scores = np.empty(len(trials))
    labels = np.empty(len(trials), dtype=bool)
    for i, trial in enumerate(trials):
        try:
            enroll = ivectors[trial.enroll_id]
            test = ivectors[trial.test_id]
        except KeyError as exc:
            raise MissingUtterance(f"trial {i}: no i-vector for "
                                   f"{exc.args[0]!r}") from exc
        scores[i] = score_pairwise(enroll, test, model)
        labels[i] = trial.target
    return scores, labels


def compute_eer(scores, labels) -> float:
    """Equal error rate in percent, by interpolated threshold sweep.

    Acceptance is score >= threshold. False-accept and false-reject
    rates are evaluated at every distinct score; the crossing is found
    by linear interpolation between the two adjacent thresholds where
    FAR - FRR changes sign.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must align")
    target = np.sort(scores[labels])
    nontarget = np.sort(scores[~labels])
    if target.size == 0 or nontarget.size == 0:
        raise ValueError("need at least one trial of each label")

    thresholds = np.unique(scores)
    # append a sentinel above every score so FAR reaches 0 / FRR reaches 1
    thresholds = np.append(thresholds, thresholds[-1] + 1.0)
    frr = np.searchsorted(target, thresholds, side="left") / target.size
    far = 1.0 - np.searchsorted(nontarget, thresholds,
                                side="left") / nontarget.size
    diff = far - frr  # non-increasing in the threshold
    k = int(np.argmax(diff <= 0.0))
    if diff[k] == 0.0:
        return float(100.0 * far[k])
    alpha = diff[k - 1] / (diff[k - 1] - diff[k])
    eer = far[k - 1] + alpha * (far[k] - far[k - 1])
    return float(100.0 * eer)


# --------------------------------------------------------------------
# rank testing
# --------------------------------------------------------------------


@dataclass(frozen=True)
class RankOutcome:
    """Where the true speaker landed for one probe clip (None = miss)."""

    clip_id: str
    true_speaker: str
    position: int | None


@dataclass
class RankReport:
    """Per-clip rank positions plus the aggregate top-k hit rates."""

    outcomes: list
    k: int = 5

    def hit_rate(self, k: int) -> float:
        """Percent of clips whose true speaker ranked within the top k."""
        if not self.outcomes:
            return 0.0
        hits = sum(1 for o in self.outcomes
                   if o.position is not None and o.position <= k)
        return 100.0 * hits / len(self.outcomes)

    @property
    def top1(self) -> float:
        return self.hit_rate(1)

    @property
    def top3(self) -> float:
        return self.hit_rate(3)

    @property
    def top5(self) -> float:
        return self.hit_rate(5)

    def rows(self) -> list:
        """CSV-ready rows; misses are marked 'x' as in rank-test printouts."""
        out = [{"clip_id": o.clip_id, "true_speaker": o.true_speaker,
                "position": o.position if o.position is not None else "x"}
               for o in self.outcomes]
        return out


def rank_of_speaker(results, true_speaker: str):
    """Position (1-based) of the true speaker in a ranked list, or None."""
    for res in results:
        if res.speaker_id == true_speaker:
            return res.rank
    return None


def evaluate_rankings(per_clip_results, gallery) -> RankReport:
    """Aggregate (clip_id, true_speaker, results) triples into a report.

    Raises UnknownSpeakerLabel when a probe is labeled with a speaker
    the gallery does not contain (such probes cannot ever hit).
    """
    outcomes = []
    for clip_id, true_speaker, results in per_clip_results:
        if true_speaker not in gallery:
            raise UnknownSpeakerLabel(
                f"clip {clip_id!r}: speaker {true_speaker!r} not enrolled")
        outcomes.append(RankOutcome(clip_id=clip_id,
                                    true_speaker=true_speaker,
                                    position=rank_of_speaker(results,
                                                             true_speaker)))
    return RankReport(outcomes=outcomes)


# --------------------------------------------------------------------
# utterance-length sweep
# --------------------------------------------------------------------


def truncate_clip(clip: AudioClip, length_s: float) -> AudioClip:
    """Keep the first length_s seconds of raw audio (pre-VAD)."""
    n = int(round(length_s * clip.sample_rate_hz))
    if n > clip.samples.shape[0]:
        raise ClipTooShort(
            f"clip is {clip.duration_s:.2f}s, cannot take {length_s:.2f}s")
    return AudioClip(samples=clip.samples[:n],
                     sample_rate_hz=clip.sample_rate_hz)


def sweep_lengths(engine, labeled_clips, lengths, ks=(1, 3, 5)) -> list:
    """Top-k accuracy after truncating every probe to each length.

    labeled_clips: iterable of (clip_id, AudioClip, true_speaker).
    Returns one row dict per (length, k) pair.
    """
    labeled_clips = list(labeled_clips)
    lengths = sorted(lengths)
    for clip_id, clip, _ in labeled_clips:
        if clip.duration_s < max(lengths):
            raise ClipTooShort(
                f"clip {clip_id!r} is {clip.duration_s:.2f}s; "
                f"sweep needs {max(lengths):.2f}s")

    rows = []
    for length in lengths:
        triples = []
        for clip_id, clip, speaker in labeled_clips:
            outcome = engine.identify_clip(truncate_clip(clip, length),
                                           k=max(ks))
            triples.append((clip_id, speaker, outcome.results))
        report = evaluate_rankings(triples, engine.gallery)
        for k in ks:
            rows.append({"length_s": length, "k": k,
                         "accuracy_pct": round(report.hit_rate(k), 2),
                         "n_clips": len(labeled_clips)})
    return rows


# --------------------------------------------------------------------
# timing benchmarks
# --------------------------------------------------------------------


def summarize_samples(samples_ms) -> dict:
    """Median / mean / SD of a timing sample, in milliseconds."""
    return {"median_ms": round(statistics.median(samples_ms), 2),
            "mean_ms": round(statistics.fmean(samples_ms), 2),
            "sd_ms": round(statistics.pstdev(samples_ms), 2)}


def bench_identify(engine, wav_bytes: bytes, runs: int = 100) -> list:
    """Repeat identify() and summarize each stage over all runs."""
    per_stage: dict = {}
    for _ in range(runs):
        outcome = engine.identify(wav_bytes)
        for stage, value in outcome.timing.as_dict().items():
            per_stage.setdefault(stage, []).append(value)
    return [{"stage": stage, **summarize_samples(vals)}
            for stage, vals in per_stage.items()]


def time_scoring(index_rows: np.ndarray, self_terms: np.ndarray,
                 query: np.ndarray, runs: int, workers: int = 1) -> list:
    """Wall times (ms) of the gallery score kernel on given arrays."""
    from .plda import IdentificationIndex, score_projected
    ids = tuple(str(i) for i in range(index_rows.shape[0]))
    index = IdentificationIndex(self_terms=self_terms,
                                weighted_rows=index_rows,
                                utterance_ids=ids)
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        score_projected(query, index, workers=workers)
        times.append((time.perf_counter() - t0) * 1e3)
    return times


def linear_fit_r2(x, y):
    """Least-squares line y ~ a*x + b and its coefficient of determination."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = np.polyfit(x, y, 1)
    pred = a * x + b
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(a), float(b), r2


def write_csv(path, rows, fieldnames=None):
    """Write row dicts as CSV with a header; returns the path."""
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    return path
