"""Command-line entry point: collection service, QC, ground-truth
rendering, calibration, evaluation, leaderboard, baseline, splits, and the
end-to-end driver."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import center_prior as cp
from . import leaderboard as lb
from . import metrics, pipeline, qc, trackio
from .metrics import METRIC_NAMES, MetricScores
from .splits import split_dataset
from .types import MouseTrack, PipelineConfig, SaliencyFrame, ValidationError, VideoMeta


def _load_pipeline_config(path: str | None, overrides: dict | None = None) -> PipelineConfig:
    base = {}
    if path:
        base = json.loads(Path(path).read_text())
    if overrides:
        base.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig.from_dict(base)


def _read_tracks_dir(tracks_dir: Path) -> dict[str, list[MouseTrack]]:
    by_video: dict[str, list[MouseTrack]] = {}
    for path in sorted(Path(tracks_dir).glob("*.csv")):
        track = trackio.read_track_file(path)
        by_video.setdefault(track.video_id, []).append(track)
    if not by_video:
        raise click.ClickException(f"no track files in {tracks_dir}")
    return by_video


def _read_refs_dir(refs_dir: Path) -> dict[str, list[SaliencyFrame]]:
    refs_dir = Path(refs_dir)
    out = {}
    for sub in sorted(p for p in refs_dir.iterdir() if p.is_dir()):
        out[sub.name] = trackio.read_map_dir(sub)
    if not out:
        raise click.ClickException(f"no reference map directories in {refs_dir}")
    return out


def _render_one(args) -> tuple[str, int]:
    video, tracks, config, out_dir = args
    fixations, maps = pipeline.build_ground_truth(video, tracks, config=config)
    video_out = Path(out_dir)
    trackio.write_fixation_file(video_out / "fixations" / f"{video.video_id}.csv", fixations)
    trackio.write_map_dir(video_out / "maps" / video.video_id, maps)
    return video.video_id, len(maps)


def render_ground_truth(
    tracks_by_video: dict[str, list[MouseTrack]],
    meta: dict[str, VideoMeta],
    out_dir: Path,
    config: PipelineConfig,
    jobs: int = 1,
    only_videos: set[str] | None = None,
) -> list[tuple[str, int]]:
    out_dir = Path(out_dir)
    (out_dir / "fixations").mkdir(parents=True, exist_ok=True)
    (out_dir / "maps").mkdir(parents=True, exist_ok=True)
    work = []
    for video_id in sorted(tracks_by_video):
        if only_videos is not None and video_id not in only_videos:
            continue
        if video_id not in meta:
            raise ValidationError(f"no metadata for video {video_id}")
        work.append((meta[video_id], tracks_by_video[video_id], config, out_dir))
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_render_one, work))
    else:
        results = [_render_one(w) for w in work]
    return results


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="RNG seed for seeded commands.")
@click.option("--jobs", type=int, default=None, help="Worker processes (default: all cores).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="Pipeline config JSON.")
@click.pass_context
def main(ctx, seed, jobs, config_path):
    """Crowdsourced attention collection and saliency benchmark tooling."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["jobs"] = jobs if jobs is not None else (os.cpu_count() or 1)
    ctx.obj["config_path"] = config_path


@main.command()
@click.option("--videos", "videos_dir", type=click.Path(exists=True, file_okay=False), required=False)
@click.option("--meta", "meta_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--store", "store_dir", type=click.Path(file_okay=False), required=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--captchas", "captcha_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="JSON: {clips: [{clip_id, locale, answer}], synonyms: {locale: {word: digit}}}.")
@click.option("--validation-ids", "validation_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="File with one validation video id per line.")
@click.option("--captcha-dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.pass_context
def serve(ctx, videos_dir, meta_path, store_dir, port, host, captcha_path, validation_path, captcha_dir):
    """Run the collection service."""
    import uvicorn

    from .service import CaptchaClip, ServiceConfig, SessionStore, create_app

    meta = trackio.read_video_meta_csv(Path(meta_path))
    captcha_cfg = json.loads(Path(captcha_path).read_text())
    clips = [CaptchaClip(c["clip_id"], c.get("locale", "en"), c["answer"]) for c in captcha_cfg["clips"]]
    validation_ids = [ln.strip() for ln in Path(validation_path).read_text().splitlines() if ln.strip()]
    content_ids = sorted(set(meta) - set(validation_ids))
    config = ServiceConfig(
        store=SessionStore(Path(store_dir)),
        meta=meta,
        content_ids=content_ids,
        validation_ids=validation_ids,
        captcha_clips=clips,
        synonyms=captcha_cfg.get("synonyms", {}),
        videos_dir=Path(videos_dir) if videos_dir else None,
        captcha_dir=Path(captcha_dir) if captcha_dir else None,
        seed=ctx.obj["seed"],
        pipeline=_load_pipeline_config(ctx.obj["config_path"]),
    )
    app = create_app(config)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def run_qc(
    store_dir: Path,
    refs: dict[str, list[SaliencyFrame]],
    meta: dict[str, VideoMeta],
    config: PipelineConfig,
    service_synonyms: dict[str, dict[str, str]] | None = None,
) -> dict[str, qc.QcReport]:
    from .service import ServiceConfig, SessionStore
    from .service.app import session_data
    from .service.store import STATE_FINALIZED

    store = SessionStore(Path(store_dir))
    sc = ServiceConfig(
        store=store,
        meta=meta,
        content_ids=sorted(meta),
        validation_ids=sorted(refs),
        captcha_clips=[],
        synonyms=service_synonyms or {},
        pipeline=config,
    )
    reports = {}
    for session_id in store.session_ids():
        record = store.load_session(session_id)
        if record.state != STATE_FINALIZED:
            continue
        data = session_data(sc, record, store.load_views(session_id))
        reports[session_id] = qc.qc_session(data, refs, meta, config)
    return reports


def write_qc_report_csv(path: Path, reports: dict[str, qc.QcReport]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "session_id",
            "viewer_id",
            "screen_ok",
            "reaction_ok",
            "reaction_best",
            "captcha_start_ok",
            "captcha_middle_ok",
            "views_flagged",
            "validation_cc",
            "validation_ok",
            "overall_pass",
        ]
    )
    for session_id in sorted(reports):
        r = reports[session_id]
        flagged = sum(1 for v in r.views if not v.frequency_ok)
        cc_detail = ";".join(f"{vid}:{r.validation_cc[vid]:.4f}" for vid in sorted(r.validation_cc))
        writer.writerow(
            [
                session_id,
                r.viewer_id,
                int(r.screen_ok),
                int(r.reaction_ok),
                f"{r.reaction_best_fraction:.4f}",
                int(r.captcha_start_ok),
                int(r.captcha_middle_ok),
                flagged,
                cc_detail,
                int(r.validation_ok),
                int(r.overall_pass),
            ]
        )
    Path(path).write_text(buf.getvalue())


@main.command(name="qc")
@click.option("--sessions", "store_dir", type=click.Path(exists=True, file_okay=False), required=True,
              help="Service store directory.")
@click.option("--validation-refs", "refs_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--videos", "meta_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def qc_command(ctx, store_dir, refs_dir, meta_path, out_path):
    """Score every finalized session against all quality gates."""
    config = _load_pipeline_config(ctx.obj["config_path"])
    meta = trackio.read_video_meta_csv(Path(meta_path))
    refs = _read_refs_dir(Path(refs_dir))
    reports = run_qc(Path(store_dir), refs, meta, config)
    write_qc_report_csv(Path(out_path), reports)
    passed = sum(1 for r in reports.values() if r.overall_pass)
    click.echo(f"qc: {passed}/{len(reports)} sessions passed -> {out_path}")


@main.command()
@click.option("--tracks", "tracks_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--videos", "meta_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--sigma", type=float, default=None, help="Rendering sigma at FullHD width.")
@click.option("--shift", type=float, default=None, help="Temporal shift in ms.")
@click.option("--trim", type=float, default=None, help="Head trim in ms.")
@click.option("--rate", type=float, default=None, help="Resample rate in Hz.")
@click.pass_context
def render(ctx, tracks_dir, meta_path, out_dir, sigma, shift, trim, rate):
    """Build fixation files and saliency maps from track files."""
    config = _load_pipeline_config(
        ctx.obj["config_path"],
        {"render_sigma_px": sigma, "shift_ms": shift, "trim_ms": trim, "resample_hz": rate},
    )
    meta = trackio.read_video_meta_csv(Path(meta_path))
    tracks = _read_tracks_dir(Path(tracks_dir))
    results = render_ground_truth(tracks, meta, Path(out_dir), config, jobs=ctx.obj["jobs"])
    for video_id, n in results:
        click.echo(f"render: {video_id}: {n} frames")


@main.command()
@click.option("--tracks", "tracks_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--reference", "refs_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--videos", "meta_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--shifts", required=True, help="Comma-separated candidate shifts in ms.")
@click.option("--trims", required=True, help="Comma-separated candidate trims in ms.")
@click.pass_context
def calibrate(ctx, tracks_dir, refs_dir, meta_path, shifts, trims):
    """Grid-search the temporal shift and head trim against reference maps."""
    config = _load_pipeline_config(ctx.obj["config_path"])
    meta = trackio.read_video_meta_csv(Path(meta_path))
    tracks = _read_tracks_dir(Path(tracks_dir))
    refs = _read_refs_dir(Path(refs_dir))
    shift_list = [float(s) for s in shifts.split(",") if s != ""]
    trim_list = [float(s) for s in trims.split(",") if s != ""]
    result = pipeline.calibrate_alignment(tracks, refs, meta, shift_list, trim_list, config)
    click.echo(f"best shift: {result.best_shift_ms:g} ms, best trim: {result.best_trim_ms:g} ms")
    for i, s in enumerate(result.candidate_shifts_ms):
        row = " ".join(f"{result.score_grid[i, j]:+.4f}" for j in range(len(result.candidate_trims_ms)))
        click.echo(f"shift {s:>6g}: {row}")


def _pred_source_for(pred_dir: Path, video_id: str) -> Path:
    sub = pred_dir / video_id
    if sub.is_dir():
        return sub
    matches = sorted(pred_dir.glob(f"{video_id}.*"))
    if matches:
        return matches[0]
    raise ValidationError(f"no prediction for video {video_id} in {pred_dir}")


def evaluate_submission(
    pred_dir: Path, gt_maps_dir: Path, gt_fix_dir: Path
) -> dict[str, metrics.VideoEvaluation]:
    gt_maps_dir = Path(gt_maps_dir)
    video_ids = sorted(p.name for p in gt_maps_dir.iterdir() if p.is_dir())
    if not video_ids:
        raise ValidationError(f"no ground-truth map directories in {gt_maps_dir}")
    out = {}
    for video_id in video_ids:
        gt_maps = trackio.read_map_dir(gt_maps_dir / video_id)
        fix_path = Path(gt_fix_dir) / f"{video_id}.csv"
        if not fix_path.exists():
            raise ValidationError(f"no fixation file for video {video_id}")
        gt_fix = trackio.read_fixation_file(fix_path, n_frames=len(gt_maps))
        pred = trackio.read_map_source(_pred_source_for(Path(pred_dir), video_id))
        out[video_id] = metrics.evaluate_video(video_id, pred, gt_maps, gt_fix)
    return out


def write_scores_csv(path: Path, evaluations: dict[str, metrics.VideoEvaluation]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["video_id", *METRIC_NAMES, "frames", *[f"skipped_{m}" for m in METRIC_NAMES]])
    for video_id in sorted(evaluations):
        ev = evaluations[video_id]
        writer.writerow(
            [
                video_id,
                *[f"{ev.means.get(m):.6f}" for m in METRIC_NAMES],
                ev.n_frames,
                *[ev.skipped_count(m) for m in METRIC_NAMES],
            ]
        )
    Path(path).write_text(buf.getvalue())


def read_scores_csv(path: Path) -> dict[str, MetricScores]:
    out = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out[row["video_id"]] = MetricScores(
                *[float(row[m]) for m in METRIC_NAMES],
            )
    return out


@main.command()
@click.option("--pred", "pred_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--gt-maps", "gt_maps_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--gt-fix", "gt_fix_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def evaluate(pred_dir, gt_maps_dir, gt_fix_dir, out_path):
    """Score one submission against ground-truth maps and fixations."""
    try:
        evaluations = evaluate_submission(Path(pred_dir), Path(gt_maps_dir), Path(gt_fix_dir))
    except ValidationError as e:
        raise click.ClickException(str(e)) from e
    write_scores_csv(Path(out_path), evaluations)
    click.echo(f"evaluate: {len(evaluations)} videos -> {out_path}")


def write_leaderboard_csv(path: Path, entries: list[lb.LeaderboardEntry]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["position", "team", *METRIC_NAMES, "mean_rank"])
    for e in entries:
        writer.writerow(
            [e.final_position, e.team, *[f"{v:.6f}" for v in e.scores.as_tuple()], f"{e.mean_rank:.2f}"]
        )
    Path(path).write_text(buf.getvalue())


@main.command(name="leaderboard")
@click.option("--scores", "scores_dir", type=click.Path(exists=True, file_okay=False), required=True,
              help="Directory of per-submission scores.csv files (file stem = team name).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def leaderboard_command(scores_dir, out_path):
    """Rank submissions by mean metric rank."""
    tables = {}
    for path in sorted(Path(scores_dir).glob("*.csv")):
        tables[path.stem] = read_scores_csv(path)
    if not tables:
        raise click.ClickException(f"no score files in {scores_dir}")
    try:
        entries = lb.build_leaderboard(tables)
    except ValidationError as e:
        raise click.ClickException(str(e)) from e
    write_leaderboard_csv(Path(out_path), entries)
    click.echo(lb.render_table(entries), nl=False)


@main.group()
def baseline():
    """Center-prior baseline."""


@baseline.command(name="fit")
@click.option("--gt-maps", "gt_maps_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--canvas-w", type=int, default=1920, show_default=True)
@click.option("--canvas-h", type=int, default=1080, show_default=True)
def baseline_fit(gt_maps_dir, out_path, canvas_w, canvas_h):
    """Average the training maps and fit the centered Gaussian."""

    def frames():
        for sub in sorted(p for p in Path(gt_maps_dir).iterdir() if p.is_dir()):
            yield from trackio.iter_map_source(sub)

    try:
        avg = cp.average_training_map(frames(), canvas_w, canvas_h)
        prior = cp.fit_center_gaussian(avg)
    except ValidationError as e:
        raise click.ClickException(str(e)) from e
    Path(out_path).write_text(prior.to_json())
    click.echo(f"baseline fit: sigma_x={prior.sigma_x:.2f} sigma_y={prior.sigma_y:.2f} -> {out_path}")


@baseline.command(name="emit")
@click.option("--prior", "prior_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--videos", "meta_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def baseline_emit(prior_path, meta_path, out_dir):
    """Replicate the fitted prior over every frame of every listed video."""
    prior = cp.CenterPrior.from_json(Path(prior_path).read_text())
    meta = trackio.read_video_meta_csv(Path(meta_path))
    out_dir = Path(out_dir)
    for video_id in sorted(meta):
        video = meta[video_id]
        frame = cp.render_prior_for_video(prior, video.width, video.height)
        trackio.write_map_dir(out_dir / video_id, [frame] * video.frame_count)
        click.echo(f"baseline emit: {video_id}: {video.frame_count} frames")


@main.command()
@click.option("--ids", "ids_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Video id list (one per line) or a metadata CSV.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def split(ctx, ids_path, out_path):
    """Seeded train / public-test / private-test split."""
    text = Path(ids_path).read_text()
    if text.startswith("video_id,"):
        ids = [v.video_id for v in trackio.load_video_meta_csv(text.encode())]
    else:
        ids = [ln.strip() for ln in text.splitlines() if ln.strip()]
    try:
        result = split_dataset(ids, ctx.obj["seed"])
    except ValidationError as e:
        raise click.ClickException(str(e)) from e
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["video_id", "subset"])
    for subset, members in (
        ("train", result.train),
        ("public_test", result.public_test),
        ("private_test", result.private_test),
    ):
        for vid in members:
            writer.writerow([vid, subset])
    Path(out_path).write_text(buf.getvalue())
    click.echo(
        f"split: train={len(result.train)} public_test={len(result.public_test)} "
        f"private_test={len(result.private_test)} -> {out_path}"
    )


def hash_tree(root: Path) -> dict[str, str]:
    root = Path(root)
    out = {}
    for path in sorted(p for p in root.rglob("*") if p.is_file() and p.name != "manifest.json"):
        out[path.relative_to(root).as_posix()] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def run_end_to_end(
    store_dir: Path,
    meta: dict[str, VideoMeta],
    refs: dict[str, list[SaliencyFrame]],
    out_dir: Path,
    config: PipelineConfig,
    submissions_dir: Path | None = None,
    jobs: int = 1,
) -> Path:
    """export -> qc -> ground truth -> evaluate -> leaderboard, with a
    hash manifest of every artifact for reproducibility."""
    from .service import SessionStore, export_views

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = "export"
    try:
        store = SessionStore(Path(store_dir))
        export_views(store, out_dir / "export_all", qc_passed_only=False)

        stage = "qc"
        reports = run_qc(Path(store_dir), refs, meta, config)
        write_qc_report_csv(out_dir / "qc_report.csv", reports)
        export_views(store, out_dir / "export_passed", qc_passed_only=True, qc_reports=reports)

        stage = "ground_truth"
        tracks = _read_tracks_dir(out_dir / "export_passed" / "tracks")
        content_videos = {v for v in tracks if v not in refs}
        if not content_videos:
            raise ValidationError("no content videos with usable tracks")
        render_ground_truth(tracks, meta, out_dir / "gt", config, jobs=jobs, only_videos=content_videos)

        stage = "evaluate"
        scores_dir = out_dir / "scores"
        scores_dir.mkdir(exist_ok=True)
        if submissions_dir is not None:
            submissions = sorted(p for p in Path(submissions_dir).iterdir() if p.is_dir())
        else:
            submissions = [out_dir / "gt" / "maps"]  # identity submission
        for sub in submissions:
            evaluations = evaluate_submission(sub, out_dir / "gt" / "maps", out_dir / "gt" / "fixations")
            name = "reference" if sub == out_dir / "gt" / "maps" else sub.name
            write_scores_csv(scores_dir / f"{name}.csv", evaluations)

        stage = "leaderboard"
        tables = {p.stem: read_scores_csv(p) for p in sorted(scores_dir.glob("*.csv"))}
        entries = lb.build_leaderboard(tables)
        write_leaderboard_csv(out_dir / "leaderboard.csv", entries)
        (out_dir / "leaderboard.txt").write_text(lb.render_table(entries))
    except (ValidationError, trackio.ParseError, click.ClickException) as e:
        raise click.ClickException(f"[{stage}] {e}") from e

    manifest = {"artifacts": hash_tree(out_dir)}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out_dir / "manifest.json"


@main.command()
@click.option("--store", "store_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--videos", "meta_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--validation-refs", "refs_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--submissions", "submissions_dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.pass_context
def e2e(ctx, store_dir, meta_path, refs_dir, submissions_dir, out_dir):
    """Full pipeline from a populated store to a leaderboard."""
    config = _load_pipeline_config(ctx.obj["config_path"])
    meta = trackio.read_video_meta_csv(Path(meta_path))
    refs = _read_refs_dir(Path(refs_dir))
    manifest = run_end_to_end(
        Path(store_dir),
        meta,
        refs,
        Path(out_dir),
        config,
        submissions_dir=Path(submissions_dir) if submissions_dir else None,
        jobs=ctx.obj["jobs"],
    )
    click.echo(f"e2e: artifacts in {out_dir}, manifest {manifest}")


if __name__ == "__main__":
    main()
