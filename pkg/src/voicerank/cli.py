"""Command-line driver: training, enrollment, evaluation, serving.

Subcommands: make-corpus, train, enroll, build-index, eval-eer,
rank-test, length-sweep, bench, serve. Tabular results are written as
CSV with a header row; report-style commands also render a figure next
to each CSV so runs are inspectable at a glance.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import container
from .audio import decode_wav, extract_features
from .config import load_config
from .embedding import IVector
from .errors import VoicerankError
from .evaluation import (bench_identify, compute_eer, evaluate_rankings,
                         linear_fit_r2, load_trial_list, save_trial_list,
                         score_trial_list, sweep_lengths, time_scoring,
                         write_csv)
from .gallery import Gallery, SpeakerRecord, UtteranceRef, ingest_metadata
from .pipeline import IdentificationEngine, TrainingPlan, train_model_stack
from .plda import IdentificationIndex, build_index
from .synthetic import generate_audio_corpus


def _log(msg: str):
    print(msg, flush=True)


def _load_corpus_rows(corpus_dir) -> list:
    """Read metadata.jsonl rows (with audio paths) from a corpus dir."""
    meta = Path(corpus_dir) / "metadata.jsonl"
    rows = []
    with open(meta) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    for row in rows:
        path = Path(row["audio_path"])
        if not path.is_absolute():
            row["audio_path"] = str(Path(corpus_dir) / path)
    return rows


def _metadata_text(corpus_dir) -> str:
    return (Path(corpus_dir) / "metadata.jsonl").read_text(encoding="utf-8")


def _engine_from_args(args, need_index: bool = False) -> IdentificationEngine:
    cfg = load_config(getattr(args, "config", None))
    engine = IdentificationEngine.from_container(
        args.models, feature_config=cfg.features,
        relevance=cfg.map_relevance,
        score_workers=getattr(args, "threads", None) or cfg.score_workers)
    if need_index and (engine.index is None or engine.gallery is None):
        raise VoicerankError(
            f"{args.models} holds no enrollment index/gallery; "
            "run enroll + build-index first")
    return engine


def _embed_corpus(engine: IdentificationEngine, rows,
                  label: str = "corpus") -> dict:
    """i-vector per utterance id; logs progress every ~200 clips."""
    out = {}
    for i, row in enumerate(rows, start=1):
        out[row["utterance_id"]] = engine.embed_wav_file(row["audio_path"])
        if i % 200 == 0:
            _log(f"  embedded {i}/{len(rows)} {label} utterances")
    return out


# --------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------


def cmd_make_corpus(args) -> int:
    manifest = generate_audio_corpus(
        args.output, num_speakers=args.speakers,
        utterances_per_speaker=args.utterances,
        duration_s=args.duration, seed=args.seed)
    _log(f"wrote {len(manifest.entries)} utterances for "
         f"{args.speakers} speakers under {manifest.root}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out_path = Path(args.output)
    existed_before = out_path.exists()

    try:
        t0 = time.perf_counter()
        rows = _load_corpus_rows(args.corpus)
        feats = []
        for i, row in enumerate(rows, start=1):
            with open(row["audio_path"], "rb") as fh:
                clip = decode_wav(fh.read())
            feats.append(extract_features(clip, cfg.features))
            if i % 200 == 0:
                _log(f"  features {i}/{len(rows)}")
        _log(f"features: {len(rows)} utterances "
             f"[{time.perf_counter() - t0:.1f}s]")

        plan = TrainingPlan(components=args.components,
                            ivector_dim=args.ivector_dim,
                            speaker_dim=args.speaker_dim,
                            ubm_fraction=args.ubm_fraction,
                            ppca_fraction=args.ppca_fraction,
                            relevance=cfg.map_relevance, seed=args.seed)
        labels = [row["speaker_id"] for row in rows]
        models = train_model_stack(feats, labels, plan, progress=_log)
        if args.embed_gallery:
            models.gallery_jsonl = _metadata_text(args.corpus).encode("utf-8")
        container.save(out_path, models)
        _log(f"wrote {out_path} ({out_path.stat().st_size} bytes)")
        return 0
    except BaseException:
        if not existed_before and out_path.exists():
            out_path.unlink()
        raise


def cmd_enroll(args) -> int:
    engine = _engine_from_args(args)
    gallery = ingest_metadata(Path(args.corpus) / "metadata.jsonl",
                              apply_selection_rule=not args.no_selection_rule)
    keep = set(gallery.utterance_ids())
    rows = [r for r in _load_corpus_rows(args.corpus)
            if r["utterance_id"] in keep]
    _log(f"enrolling {len(rows)} utterances across "
         f"{len(gallery)} speakers")
    ivectors = _embed_corpus(engine, rows, "enrollment")
    ids = list(ivectors)
    etas = np.vstack([ivectors[i].eta for i in ids])
    np.savez(args.output, utterance_ids=np.array(ids), etas=etas)
    _log(f"wrote {args.output}")
    return 0


def cmd_build_index(args) -> int:
    models = container.load(args.models)
    if models.plda is None:
        raise VoicerankError(f"{args.models} lacks a scoring model section")
    data = np.load(args.embeddings, allow_pickle=False)
    ids = [str(u) for u in data["utterance_ids"]]
    etas = data["etas"]
    pairs = [(utt_id, IVector(eta=eta, normalized=True))
             for utt_id, eta in zip(ids, etas)]
    dtype = np.float32 if args.dtype == "float32" else np.float64
    models.index = build_index(pairs, models.plda, dtype=dtype)
    if args.corpus:
        models.gallery_jsonl = _metadata_text(args.corpus).encode("utf-8")
    out = args.output or args.models
    container.save(out, models)
    _log(f"index: {models.index.size} rows ({args.dtype}) -> {out}")
    return 0


def cmd_eval_eer(args) -> int:
    engine = _engine_from_args(args)
    rows = _load_corpus_rows(args.corpus)

    if args.trials:
        trials = load_trial_list(args.trials)
    else:
        from .synthetic import make_verification_trials
        rng = np.random.default_rng(args.seed)
        labels = [r["speaker_id"] for r in rows]
        pairs = make_verification_trials(labels, rng, args.num_trials // 2,
                                         args.num_trials // 2)
        from .evaluation import Trial
        ids = [r["utterance_id"] for r in rows]
        trials = [Trial(ids[i], ids[j], target) for i, j, target in pairs]
        if args.output:
            trial_path = Path(args.output).with_suffix(".trials.csv")
            save_trial_list(trial_path, trials)
            _log(f"wrote generated trials to {trial_path}")

    needed = {t.enroll_id for t in trials} | {t.test_id for t in trials}
    rows = [r for r in rows if r["utterance_id"] in needed]
    ivectors = _embed_corpus(engine, rows, "trial")
    scores, labels = score_trial_list(trials, ivectors, engine.plda)
    eer = compute_eer(scores, labels)
    _log(f"trials: {len(trials)} | EER: {eer:.2f}%")

    if args.output:
        out_rows = [{"enroll_id": t.enroll_id, "test_id": t.test_id,
                     "label": "same" if t.target else "different",
                     "score": float(s)} for t, s in zip(trials, scores)]
        write_csv(args.output, out_rows)
        _log(f"wrote {args.output}")
    return 0


def _load_probes(path) -> list:
    """Probe CSV rows: clip_id, audio_path, speaker_id."""
    probes = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            probes.append((row["clip_id"].strip(), row["audio_path"].strip(),
                           row["speaker_id"].strip()))
    return probes


def _print_rank_table(report):
    by_speaker: dict = {}
    for o in report.outcomes:
        by_speaker.setdefault(o.true_speaker, []).append(
            str(o.position) if o.position is not None else "x")
    width = max(len(s) for s in by_speaker)
    _log(f"{'speaker'.ljust(width)} | ranks")
    for speaker in sorted(by_speaker):
        _log(f"{speaker.ljust(width)} | {' '.join(by_speaker[speaker])}")
    _log(f"{'total'.ljust(width)} | top1 {report.top1:.0f}% | "
         f"top3 {report.top3:.0f}% | top5 {report.top5:.0f}%")


def cmd_rank_test(args) -> int:
    engine = _engine_from_args(args, need_index=True)
    probes = _load_probes(args.probes)
    triples = []
    for clip_id, audio_path, speaker_id in probes:
        with open(audio_path, "rb") as fh:
            outcome = engine.identify(fh.read(), k=5)
        triples.append((clip_id, speaker_id, outcome.results))
    report = evaluate_rankings(triples, engine.gallery)
    _print_rank_table(report)
    if args.output:
        write_csv(args.output, report.rows())
        _log(f"wrote {args.output}")
    return 0


def cmd_length_sweep(args) -> int:
    engine = _engine_from_args(args, need_index=True)
    probes = _load_probes(args.probes)
    lengths = [float(x) for x in args.lengths.split(",")]
    clips = []
    for clip_id, audio_path, speaker_id in probes:
        with open(audio_path, "rb") as fh:
            clips.append((clip_id, decode_wav(fh.read()), speaker_id))
    rows = sweep_lengths(engine, clips, lengths)
    out = Path(args.output or "length_sweep.csv")
    write_csv(out, rows)
    from .plots import plot_length_sweep
    fig_path = plot_length_sweep(rows, out.with_suffix(".png"))
    _log(f"wrote {out} and {fig_path}")
    return 0


def _synthetic_bench_setting(engine: IdentificationEngine, n_rows: int,
                             rng, utts_per_speaker: int = 10):
    """Swap in a random index + matching gallery of the requested size."""
    k = engine.plda.speaker_dim
    index = IdentificationIndex(
        self_terms=rng.standard_normal(n_rows).astype(np.float32),
        weighted_rows=rng.standard_normal((n_rows, k)).astype(np.float32),
        utterance_ids=tuple(f"bench{i:07d}" for i in range(n_rows)))
    records = []
    for s in range(0, n_rows, utts_per_speaker):
        speaker = f"benchspk{s // utts_per_speaker:06d}"
        utts = tuple(
            UtteranceRef(utterance_id=f"bench{i:07d}",
                         video_id=f"benchvid{i:07d}",
                         clip_start_s=0.0, clip_end_s=6.0)
            for i in range(s, min(s + utts_per_speaker, n_rows)))
        records.append(SpeakerRecord(speaker_id=speaker,
                                     display_name=speaker, utterances=utts))
    return IdentificationEngine(
        ubm=engine.ubm, ppca=engine.ppca, ivector_mean=engine.ivector_mean,
        plda=engine.plda, index=index, gallery=Gallery(tuple(records)),
        feature_config=engine.feature_config, relevance=engine.relevance,
        score_workers=engine.score_workers)


def cmd_bench(args) -> int:
    engine = _engine_from_args(args)
    rng = np.random.default_rng(args.seed)
    if args.probe:
        wav = Path(args.probe).read_bytes()
    else:
        from .synthetic import (encode_wav_pcm16, sample_voice_profile,
                                synthesize_utterance)
        profile = sample_voice_profile(rng)
        wav = encode_wav_pcm16(
            synthesize_utterance(profile, args.probe_duration, rng), 16000)

    sizes = [int(float(x)) for x in args.sizes.split(",")]
    all_rows = []
    scaling = []
    for n in sizes:
        sized = _synthetic_bench_setting(engine, n, rng)
        stage_rows = bench_identify(sized, wav, runs=args.runs)
        for row in stage_rows:
            all_rows.append({"n_rows": n, **row})
        # the scaling series times the bare kernel: report timings are
        # quantized to 0.1 ms, too coarse for small galleries
        query = rng.standard_normal(
            engine.plda.speaker_dim).astype(np.float32)
        kernel_ms = float(np.median(time_scoring(
            sized.index.weighted_rows, sized.index.self_terms, query,
            runs=args.runs, workers=engine.score_workers)))
        scaling.append({"n_rows": n, "median_ms": round(kernel_ms, 4)})
        _log(f"n={n}: score median {kernel_ms:.4f}ms over "
             f"{args.runs} runs")

    out = Path(args.output or "bench.csv")
    write_csv(out, all_rows,
              fieldnames=["n_rows", "stage", "median_ms", "mean_ms", "sd_ms"])
    from .plots import plot_scoring_scaling, plot_stage_times
    figs = [plot_stage_times(
        [r for r in all_rows if r["n_rows"] == sizes[-1]],
        out.with_suffix(".stages.png"))]
    if len(sizes) >= 2:
        figs.append(plot_scoring_scaling(scaling, out.with_suffix(".scaling.png")))
        slope, intercept, r2 = linear_fit_r2(
            [s["n_rows"] for s in scaling],
            [s["median_ms"] for s in scaling])
        _log(f"scoring scaling: {slope * 1e6:.2f} ms per 1e6 rows, "
             f"r^2 = {r2:.4f}")
    _log(f"wrote {out} and {', '.join(str(f) for f in figs)}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    cfg = load_config(args.config)
    if args.models:
        cfg.model_path = args.models
    if args.port:
        cfg.port = args.port
    if getattr(args, "threads", None):
        cfg.score_workers = args.threads
    serve(cfg)
    return 0


# --------------------------------------------------------------------
# parser
# --------------------------------------------------------------------


def _add_common(p, output_default=None):
    p.add_argument("--config", help="path to config JSON "
                   "(default: $VOICERANK_CONFIG if set)")
    p.add_argument("--seed", type=int, default=0,
                   help="RNG seed for anything stochastic (default 0)")
    p.add_argument("--threads", type=int,
                   help="worker threads for gallery scoring")
    p.add_argument("--output", default=output_default,
                   help="output file path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voicerank",
        description="Speaker identification: training, enrollment, "
                    "evaluation harnesses, and the HTTP service.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-corpus",
                       help="generate a synthetic WAV corpus with metadata")
    p.add_argument("--speakers", type=int, default=20)
    p.add_argument("--utterances", type=int, default=8,
                   help="utterances per speaker")
    p.add_argument("--duration", type=float, default=6.0,
                   help="seconds per utterance")
    _add_common(p, output_default="corpus")
    p.set_defaults(func=cmd_make_corpus)

    p = sub.add_parser("train", help="train the full model stack")
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument("--components", type=int, default=64,
                   help="mixture components (power of two)")
    p.add_argument("--ivector-dim", type=int, default=100)
    p.add_argument("--speaker-dim", type=int, default=50)
    p.add_argument("--ubm-fraction", type=float, default=1.0 / 30.0,
                   help="fraction of utterances for background-model fitting")
    p.add_argument("--ppca-fraction", type=float, default=1.0 / 15.0,
                   help="fraction of supervectors for compressor fitting")
    p.add_argument("--embed-gallery", action="store_true",
                   help="embed corpus metadata into the container")
    _add_common(p, output_default="models.vrk")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enroll", help="embed enrollment utterances")
    p.add_argument("--corpus", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--no-selection-rule", action="store_true",
                   help="keep all speakers regardless of utterance counts")
    _add_common(p, output_default="enrollment.npz")
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("build-index",
                       help="turn enrollment embeddings into a fast index")
    p.add_argument("--models", required=True)
    p.add_argument("--embeddings", required=True, help="enroll output .npz")
    p.add_argument("--corpus", help="embed this corpus' metadata as gallery")
    p.add_argument("--dtype", choices=["float32", "float64"],
                   default="float32")
    _add_common(p)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("eval-eer", help="verification EER over a trial list")
    p.add_argument("--models", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--trials", help="trial CSV (generated when omitted)")
    p.add_argument("--num-trials", type=int, default=2000,
                   help="trials to generate when --trials is omitted")
    _add_common(p)
    p.set_defaults(func=cmd_eval_eer)

    p = sub.add_parser("rank-test", help="top-k identification over probes")
    p.add_argument("--models", required=True)
    p.add_argument("--probes", required=True,
                   help="CSV with clip_id,audio_path,speaker_id")
    _add_common(p)
    p.set_defaults(func=cmd_rank_test)

    p = sub.add_parser("length-sweep",
                       help="accuracy vs. probe duration (CSV + figure)")
    p.add_argument("--models", required=True)
    p.add_argument("--probes", required=True)
    p.add_argument("--lengths", default="1,2,3,5,7,9",
                   help="comma-separated seconds")
    _add_common(p, output_default="length_sweep.csv")
    p.set_defaults(func=cmd_length_sweep)

    p = sub.add_parser("bench",
                       help="pipeline stage timings vs. gallery size")
    p.add_argument("--models", required=True)
    p.add_argument("--sizes", default="10000,30000,100000",
                   help="comma-separated synthetic index sizes")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--probe", help="probe WAV (synthesized when omitted)")
    p.add_argument("--probe-duration", type=float, default=10.0)
    _add_common(p, output_default="bench.csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--models", help="override config model path")
    p.add_argument("--port", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VoicerankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
