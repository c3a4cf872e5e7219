"""CLI commands driven through click's runner, plus the end-to-end flow."""

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from salbench import pipeline, trackio
from salbench.cli import main
from salbench.service import create_app
from salbench.splits import split_dataset, split_sizes
from salbench.types import PipelineConfig, ValidationError

from conftest import (
    CONTENT_IDS,
    ScriptedViewer,
    build_validation_refs,
    corpus_meta,
    default_geometry,
    make_service_config,
    scripted_track,
    write_refs_dir,
)


@pytest.fixture
def runner():
    return CliRunner()


def write_meta_csv(path: Path, video_ids=None) -> Path:
    meta = corpus_meta()
    if video_ids is not None:
        meta = {k: v for k, v in meta.items() if k in video_ids}
    path.write_bytes(trackio.save_video_meta_csv(list(meta.values())))
    return path


def make_tracks_dir(tmp_path: Path, video_ids, viewers=2) -> Path:
    tracks_dir = tmp_path / "tracks"
    tracks_dir.mkdir(exist_ok=True)
    geometry = default_geometry()
    for vid in video_ids:
        for v in range(viewers):
            track = scripted_track(vid, geometry)
            trackio.write_track_file(tracks_dir / f"s{v}_{vid}.csv", track)
    return tracks_dir


class TestSplit:
    def test_sizes_at_challenge_scale(self):
        assert split_sizes(1500) == (1000, 150, 350)

    def test_sizes_golden_small(self):
        assert split_sizes(15) == (10, 2, 3)

    def test_same_seed_same_split(self):
        ids = [f"vid{i}" for i in range(100)]
        assert split_dataset(ids, 7) == split_dataset(ids, 7)
        assert split_dataset(ids, 7) != split_dataset(ids, 8)

    def test_partition_properties(self):
        ids = [f"vid{i}" for i in range(45)]
        s = split_dataset(ids, 3)
        all_out = list(s.train) + list(s.public_test) + list(s.private_test)
        assert sorted(all_out) == sorted(ids)
        assert len(set(s.train) & set(s.public_test)) == 0

    def test_duplicate_ids_error(self):
        with pytest.raises(ValidationError, match="duplicate"):
            split_dataset(["a", "b", "a"], 0)

    def test_cli_writes_csv(self, runner, tmp_path):
        ids_file = tmp_path / "ids.txt"
        ids_file.write_text("\n".join(f"vid{i}" for i in range(15)) + "\n")
        out = tmp_path / "split.csv"
        result = runner.invoke(main, ["--seed", "5", "split", "--ids", str(ids_file), "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "video_id,subset"
        assert len(lines) == 16
        counts = {}
        for ln in lines[1:]:
            counts[ln.split(",")[1]] = counts.get(ln.split(",")[1], 0) + 1
        assert counts == {"train": 10, "public_test": 2, "private_test": 3}


class TestRenderCli:
    def test_render_and_artifacts(self, runner, tmp_path):
        video_ids = ["c01", "c02"]
        tracks_dir = make_tracks_dir(tmp_path, video_ids)
        meta_path = write_meta_csv(tmp_path / "meta.csv")
        out_dir = tmp_path / "gt"
        result = runner.invoke(
            main,
            ["--jobs", "1", "render", "--tracks", str(tracks_dir), "--videos", str(meta_path),
             "--out", str(out_dir)],
        )
        assert result.exit_code == 0, result.output
        for vid in video_ids:
            maps = trackio.read_map_dir(out_dir / "maps" / vid)
            assert len(maps) == 20  # (3000 - 1000) ms * 10 fps
            fix = trackio.read_fixation_file(out_dir / "fixations" / f"{vid}.csv", n_frames=20)
            assert sum(len(f) for f in fix) > 0

    def test_render_respects_overrides(self, runner, tmp_path):
        tracks_dir = make_tracks_dir(tmp_path, ["c03"], viewers=1)
        meta_path = write_meta_csv(tmp_path / "meta.csv")
        out_dir = tmp_path / "gt2"
        result = runner.invoke(
            main,
            ["render", "--tracks", str(tracks_dir), "--videos", str(meta_path), "--out", str(out_dir),
             "--trim", "2000", "--shift", "0"],
        )
        assert result.exit_code == 0, result.output
        assert len(trackio.read_map_dir(out_dir / "maps" / "c03")) == 10


class TestEvaluateAndLeaderboardCli:
    def test_identity_submission_tops(self, runner, tmp_path):
        tracks_dir = make_tracks_dir(tmp_path, ["c01"])
        meta_path = write_meta_csv(tmp_path / "meta.csv")
        gt_dir = tmp_path / "gt"
        result = runner.invoke(
            main, ["render", "--tracks", str(tracks_dir), "--videos", str(meta_path), "--out", str(gt_dir)]
        )
        assert result.exit_code == 0, result.output

        # identity submission plus a blurred rival
        rival_dir = tmp_path / "rival"
        maps = trackio.read_map_dir(gt_dir / "maps" / "c01")
        rng = np.random.default_rng(4)
        noisy = [f.values + rng.random(f.values.shape) * f.values.max() for f in maps]
        trackio.write_map_dir(rival_dir / "c01", noisy)

        scores_dir = tmp_path / "scores"
        scores_dir.mkdir()
        for team, pred in (("identity", gt_dir / "maps"), ("noisy", rival_dir)):
            result = runner.invoke(
                main,
                ["evaluate", "--pred", str(pred), "--gt-maps", str(gt_dir / "maps"),
                 "--gt-fix", str(gt_dir / "fixations"), "--out", str(scores_dir / f"{team}.csv")],
            )
            assert result.exit_code == 0, result.output

        out = tmp_path / "leaderboard.csv"
        result = runner.invoke(main, ["leaderboard", "--scores", str(scores_dir), "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = out.read_text().strip().split("\n")
        assert lines[1].split(",")[1] == "identity"
        assert "Team" in result.output

    def test_video_file_submission_accepted(self, runner, tmp_path):
        cv2 = pytest.importorskip("cv2")
        tracks_dir = make_tracks_dir(tmp_path, ["c01"])
        meta_path = write_meta_csv(tmp_path / "meta.csv")
        gt_dir = tmp_path / "gt"
        result = runner.invoke(
            main, ["render", "--tracks", str(tracks_dir), "--videos", str(meta_path), "--out", str(gt_dir)]
        )
        assert result.exit_code == 0, result.output

        # the same maps submitted as one grayscale video stream
        maps = trackio.read_map_dir(gt_dir / "maps" / "c01")
        pred_dir = tmp_path / "video_sub"
        pred_dir.mkdir()
        writer = cv2.VideoWriter(
            str(pred_dir / "c01.mp4"), cv2.VideoWriter_fourcc(*"mp4v"), 10, (maps[0].width, maps[0].height), False
        )
        if not writer.isOpened():
            pytest.skip("cv2 build cannot encode mp4")
        for frame in maps:
            writer.write(frame.values.astype(np.uint8))
        writer.release()

        out = tmp_path / "video_scores.csv"
        result = runner.invoke(
            main,
            ["evaluate", "--pred", str(pred_dir), "--gt-maps", str(gt_dir / "maps"),
             "--gt-fix", str(gt_dir / "fixations"), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        row = out.read_text().strip().split("\n")[1].split(",")
        assert float(row[2]) > 0.95  # cc survives the lossy codec

    def test_config_file_overrides_pipeline(self, runner, tmp_path):
        tracks_dir = make_tracks_dir(tmp_path, ["c04"], viewers=1)
        meta_path = write_meta_csv(tmp_path / "meta.csv")
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"trim_ms": 2000.0, "shift_ms": 0.0}))
        out_dir = tmp_path / "gt_cfg"
        result = runner.invoke(
            main,
            ["--config", str(config_path), "render", "--tracks", str(tracks_dir),
             "--videos", str(meta_path), "--out", str(out_dir)],
        )
        assert result.exit_code == 0, result.output
        assert len(trackio.read_map_dir(out_dir / "maps" / "c04")) == 10  # (3000-2000)ms * 10fps

    def test_evaluate_missing_prediction_fails(self, runner, tmp_path):
        tracks_dir = make_tracks_dir(tmp_path, ["c01"])
        meta_path = write_meta_csv(tmp_path / "meta.csv")
        gt_dir = tmp_path / "gt"
        runner.invoke(
            main, ["render", "--tracks", str(tracks_dir), "--videos", str(meta_path), "--out", str(gt_dir)]
        )
        empty = tmp_path / "empty"
        empty.mkdir()
        result = runner.invoke(
            main,
            ["evaluate", "--pred", str(empty), "--gt-maps", str(gt_dir / "maps"),
             "--gt-fix", str(gt_dir / "fixations"), "--out", str(tmp_path / "s.csv")],
        )
        assert result.exit_code != 0
        assert "no prediction" in result.output


class TestCalibrateCli:
    def test_calibrate_reports_best_pair(self, runner, tmp_path):
        config = PipelineConfig()
        meta_path = write_meta_csv(tmp_path / "meta.csv")
        geometry = default_geometry()
        video = corpus_meta()["c01"]

        tracks_dir = tmp_path / "tracks"
        tracks_dir.mkdir()
        track = scripted_track("c01", geometry)
        trackio.write_track_file(tracks_dir / "t.csv", track)

        refs_dir = tmp_path / "refs"
        processed = pipeline.process_track(track, video, config, shift_ms=150.0, trim_ms=0.0)
        fix = pipeline.assign_fixations_to_frames([processed], video, video.frame_count)
        refs = pipeline.render_video_saliency(fix, video, pipeline.effective_sigma(38.4, video))
        trackio.write_map_dir(refs_dir / "c01", refs)

        result = runner.invoke(
            main,
            ["calibrate", "--tracks", str(tracks_dir), "--reference", str(refs_dir),
             "--videos", str(meta_path), "--shifts", "0,150,300", "--trims", "0"],
        )
        assert result.exit_code == 0, result.output
        assert "best shift: 150 ms" in result.output


class TestBaselineCli:
    def test_fit_and_emit(self, runner, tmp_path):
        from salbench import center_prior as cp

        gt_dir = tmp_path / "maps"
        frame = cp.render_center_gaussian(96, 54, 15.0, 9.0)
        trackio.write_map_dir(gt_dir / "c01", [frame] * 3)
        prior_path = tmp_path / "prior.json"
        result = runner.invoke(
            main,
            ["baseline", "fit", "--gt-maps", str(gt_dir), "--out", str(prior_path),
             "--canvas-w", "96", "--canvas-h", "54"],
        )
        assert result.exit_code == 0, result.output
        prior = json.loads(prior_path.read_text())
        assert prior["sigma_x"] == pytest.approx(15.0, abs=0.1)
        assert prior["sigma_y"] == pytest.approx(9.0, abs=0.1)

        meta_path = write_meta_csv(tmp_path / "meta.csv", video_ids=["c01", "c02"])
        out_dir = tmp_path / "baseline"
        result = runner.invoke(
            main, ["baseline", "emit", "--prior", str(prior_path), "--videos", str(meta_path),
                   "--out", str(out_dir)]
        )
        assert result.exit_code == 0, result.output
        frames = trackio.read_map_dir(out_dir / "c01")
        assert len(frames) == 30  # 3000 ms * 10 fps
        assert np.array_equal(frames[0].values, frames[-1].values)


class TestQcCli:
    def test_report_over_real_store(self, runner, tmp_path):
        config = make_service_config(tmp_path / "store", seed=11)
        with TestClient(create_app(config)) as client:
            # spelled-out answers exercise the snapshotted synonym table in
            # the offline re-verification
            ScriptedViewer(client, spell_out_captchas=True).run_full_session()
        refs_dir = tmp_path / "refs"
        write_refs_dir(build_validation_refs(PipelineConfig()), refs_dir)
        meta_path = write_meta_csv(tmp_path / "meta.csv")
        out = tmp_path / "report.csv"
        result = runner.invoke(
            main,
            ["qc", "--sessions", str(tmp_path / "store"), "--validation-refs", str(refs_dir),
             "--videos", str(meta_path), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 2
        row = lines[1].split(",")
        assert row[-1] == "1"  # overall_pass
        assert "1/1 sessions passed" in result.output


class TestEndToEnd:
    def _populate_store(self, tmp_path, name, seed=21):
        config = make_service_config(tmp_path / name, seed=seed)
        with TestClient(create_app(config)) as client:
            ScriptedViewer(client).run_full_session()
        return config

    def test_e2e_produces_deterministic_artifacts(self, runner, tmp_path):
        refs_dir = tmp_path / "refs"
        write_refs_dir(build_validation_refs(PipelineConfig()), refs_dir)
        meta_path = write_meta_csv(tmp_path / "meta.csv")

        manifests = []
        for run in range(2):
            self._populate_store(tmp_path, f"store{run}", seed=21)
            out_dir = tmp_path / f"out{run}"
            result = runner.invoke(
                main,
                ["--jobs", "1", "e2e", "--store", str(tmp_path / f"store{run}"),
                 "--videos", str(meta_path), "--validation-refs", str(refs_dir),
                 "--out", str(out_dir)],
            )
            assert result.exit_code == 0, result.output
            manifest = json.loads((out_dir / "manifest.json").read_text())
            assert manifest["artifacts"]
            # identity submission tops the board
            lb_lines = (out_dir / "leaderboard.csv").read_text().strip().split("\n")
            assert lb_lines[1].split(",")[1] == "reference"
            manifests.append(manifest["artifacts"])
        # same seed, same scripted viewer: identical artifact tree, including
        # the session-id-derived file names
        assert manifests[0] == manifests[1]

    def test_e2e_missing_refs_stage_tagged(self, runner, tmp_path):
        self._populate_store(tmp_path, "store_x", seed=3)
        meta_path = write_meta_csv(tmp_path / "meta.csv")
        empty_refs = tmp_path / "norefs"
        empty_refs.mkdir()
        result = runner.invoke(
            main,
            ["e2e", "--store", str(tmp_path / "store_x"), "--videos", str(meta_path),
             "--validation-refs", str(empty_refs), "--out", str(tmp_path / "out_x")],
        )
        assert result.exit_code != 0
        assert "no reference map directories" in result.output
