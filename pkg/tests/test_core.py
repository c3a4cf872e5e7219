"""Domain types and serialization round-trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salbench import trackio
from salbench.types import (
    DisplayGeometry,
    FrameFixations,
    MouseTrack,
    ParseError,
    PipelineConfig,
    SaliencyFrame,
    ValidationError,
    VideoMeta,
    VideoRect,
    aspect_fit_rect,
)

GEOM = DisplayGeometry(1920, 1080, VideoRect(0, 0, 1920, 1080))


def make_track(samples, space="screen", geometry=GEOM):
    return MouseTrack.from_samples(samples, "viewer1", "vid1", space, geometry)


class TestTrackFormat:
    def test_minimal_two_sample_file(self):
        data = b"viewer1,vid1,screen,1920,1080,0,0,1920,1080\n0,0,0\n10,5,5\n"
        track = trackio.load_track(data)
        assert len(track) == 2
        assert track.samples == [(0.0, 0.0, 0.0), (10.0, 5.0, 5.0)]
        assert track.viewer_id == "viewer1"
        assert track.geometry.screen_w == 1920

    def test_non_monotone_timestamp_names_sample(self):
        data = b"viewer1,vid1,screen,1920,1080,0,0,1920,1080\n0,0,0\n10,1,1\n10,2,2\n"
        with pytest.raises(ValidationError, match="non-monotone timestamp at sample 2"):
            trackio.load_track(data)

    def test_out_of_bounds_coordinate(self):
        data = b"viewer1,vid1,screen,1920,1080,0,0,1920,1080\n0,2000,0\n"
        with pytest.raises(ValidationError, match="out-of-bounds"):
            trackio.load_track(data)

    def test_malformed_line_reports_position(self):
        data = b"viewer1,vid1,screen,1920,1080,0,0,1920,1080\n0,0\n"
        with pytest.raises(ParseError, match="line 2"):
            trackio.load_track(data)

    def test_bad_header_field_count(self):
        with pytest.raises(ParseError, match="line 1"):
            trackio.load_track(b"viewer1,vid1,screen,1920,1080\n")

    def test_unknown_space_rejected(self):
        data = b"viewer1,vid1,page,1920,1080,0,0,1920,1080\n0,0,0\n"
        with pytest.raises(ParseError, match="space"):
            trackio.load_track(data)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.integers(min_value=1, max_value=50),
                st.floats(min_value=0, max_value=1920, allow_nan=False),
                st.floats(min_value=0, max_value=1080, allow_nan=False),
            ),
            min_size=1,
            max_size=40,
        )
    )
    def test_round_trip_identity_on_canonical_form(self, deltas):
        t = 0
        samples = []
        for dt, x, y in deltas:
            samples.append((t, x, y))
            t += dt
        track = make_track(samples)
        encoded = trackio.save_track(track)
        assert trackio.save_track(trackio.load_track(encoded)) == encoded

    def test_round_trip_preserves_values(self):
        samples = [(0, 1.5, 2.25), (7, 100.125, 3.0)]
        track = make_track(samples)
        again = trackio.load_track(trackio.save_track(track))
        assert again.samples == [(0.0, 1.5, 2.25), (7.0, 100.125, 3.0)]


class TestFixationFormat:
    def test_round_trip(self):
        frames = [
            FrameFixations.from_points(0, [(1, 2), (3, 4)]),
            FrameFixations.empty(1),
            FrameFixations.from_points(2, [(5, 6)]),
        ]
        data = trackio.save_fixations(frames)
        again = trackio.load_fixations(data, n_frames=3)
        assert [f.points for f in again] == [[(1, 2), (3, 4)], [], [(5, 6)]]
        assert trackio.save_fixations(again) == data

    def test_empty_frames_inferred(self):
        frames = trackio.load_fixations(b"2,7,8\n")
        assert len(frames) == 3
        assert frames[0].points == [] and frames[2].points == [(7, 8)]


class TestSaliencyPng:
    def test_linear_quantization(self):
        frame = SaliencyFrame(np.array([[0.0, 0.5], [0.5, 1.0]]))
        assert trackio.quantize_frame(frame).tolist() == [[0, 128], [128, 255]]

    def test_all_zero_frame(self):
        frame = SaliencyFrame.zeros(3, 2)
        assert trackio.quantize_frame(frame).tolist() == [[0, 0, 0], [0, 0, 0]]

    def test_decode_reencode_byte_identical(self):
        rng = np.random.default_rng(0)
        frame = SaliencyFrame(rng.random((16, 24)))
        data = trackio.save_saliency_frame(frame)
        assert trackio.save_saliency_frame(trackio.load_saliency_frame(data)) == data

    def test_zero_sized_frame_rejected(self):
        with pytest.raises(ValidationError):
            trackio.save_saliency_frame(np.zeros((0, 0)))

    def test_map_dir_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        frames = [SaliencyFrame(rng.random((8, 8))) for _ in range(3)]
        trackio.write_map_dir(tmp_path / "maps", frames)
        again = trackio.read_map_dir(tmp_path / "maps")
        assert len(again) == 3
        expected = trackio.quantize_frame(frames[1])
        assert np.array_equal(again[1].values, expected.astype(np.float64))


class TestVideoStreamMaps:
    def test_grayscale_video_accepted_as_map_source(self, tmp_path):
        cv2 = pytest.importorskip("cv2")
        path = tmp_path / "pred.mp4"
        writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"mp4v"), 10, (64, 36), False)
        if not writer.isOpened():
            pytest.skip("cv2 build cannot encode mp4")
        rng = np.random.default_rng(2)
        sent = [(rng.random((36, 64)) * 255).astype(np.uint8) for _ in range(4)]
        for frame in sent:
            writer.write(frame)
        writer.release()

        frames = trackio.read_map_source(path)
        assert len(frames) == 4
        assert frames[0].values.shape == (36, 64)
        # codec is lossy; contents must still correlate strongly
        from salbench.metrics import cc

        assert cc(frames[2].values, sent[2].astype(np.float64)) > 0.9

    def test_unknown_container_rejected(self, tmp_path):
        path = tmp_path / "pred.xyz"
        path.write_bytes(b"junk")
        with pytest.raises(ParseError, match="not a map directory"):
            trackio.read_map_source(path)


class TestDomainTypes:
    def test_pipeline_config_defaults(self):
        cfg = PipelineConfig()
        assert cfg.resample_hz == 100.0
        assert cfg.min_track_hz == 3.0
        assert cfg.shift_ms == 300.0
        assert cfg.trim_ms == 1000.0
        assert cfg.render_sigma_px == 38.4
        assert cfg.blur_sigma_fraction == 0.02
        assert cfg.validation_cc_threshold == 0.35
        assert cfg.min_screen == (1280, 720)

    def test_pipeline_config_validation(self):
        with pytest.raises(ValidationError):
            PipelineConfig(resample_hz=-1)
        with pytest.raises(ValidationError):
            PipelineConfig(blur_sigma_fraction=0.5)
        with pytest.raises(ValidationError):
            PipelineConfig(validation_cc_threshold=1.5)
        with pytest.raises(ValidationError):
            PipelineConfig.from_dict({"unknown_field": 1})
        # zero shift/trim express the identity pipeline
        PipelineConfig(shift_ms=0.0, trim_ms=0.0)
        with pytest.raises(ValidationError):
            PipelineConfig(shift_ms=-1.0)

    def test_config_dict_round_trip(self):
        cfg = PipelineConfig(shift_ms=200.0)
        assert PipelineConfig.from_dict(cfg.to_dict()) == cfg

    def test_geometry_invariants(self):
        with pytest.raises(ValidationError):
            DisplayGeometry(0, 1080, VideoRect(0, 0, 1, 1)).validate()
        with pytest.raises(ValidationError):
            DisplayGeometry(1920, 1080, VideoRect(1900, 0, 100, 100)).validate()
        DisplayGeometry(1920, 1080, VideoRect(0, 0, 1920, 1080)).validate()

    def test_aspect_fit_letterbox(self):
        rect = aspect_fit_rect(1280, 720, 1920, 1080)
        assert (rect.x, rect.y, rect.w, rect.h) == (0, 0, 1280, 720)
        rect = aspect_fit_rect(1920, 1080, 1080, 1920)  # portrait on landscape
        assert rect.h == 1080 and abs(rect.w - 608) <= 1
        geom = DisplayGeometry(1920, 1080, rect)
        geom.validate()
        assert geom.rect_matches_aspect(1080, 1920)

    def test_video_meta_frame_count(self):
        assert VideoMeta("v", 1920, 1080, duration_ms=19000, fps=30).frame_count == 570
        with pytest.raises(ValidationError):
            VideoMeta("v", 0, 1080, duration_ms=1000).validate()

    def test_track_validation_requires_monotone(self):
        track = make_track([(0, 0, 0), (0, 1, 1)])
        with pytest.raises(ValidationError, match="sample 1"):
            track.validate()

    def test_video_space_rejected_by_screen_ops(self):
        # coordinate-space transitions only happen via map_to_video_coords
        from salbench.pipeline import map_to_video_coords

        video = VideoMeta("v", 192, 108, duration_ms=1000)
        track = make_track([(0, 5, 5)], space="video")
        with pytest.raises(ValidationError, match="screen-space"):
            map_to_video_coords(track, GEOM, video)
