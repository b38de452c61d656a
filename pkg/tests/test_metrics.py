"""Evaluation metrics: color-keyed centroid tracking, trajectory deviation,
PSNR, and report assembly."""

import json
import math

import numpy as np
import pytest

from dragflow.metrics import (
    COLOR_TOLERANCE,
    PSNR_CAP,
    MetricsError,
    centroid_track,
    evaluate_sample,
    evaluation_report,
    psnr,
    save_overlay_png,
    trajectory_error,
    write_report,
)
from dragflow.scenes import color_rgb

RED = 1


def frames_with_block(centers, size=3, h=16, w=16, color=RED, gain=1.0):
    """Video whose only content is a size x size block of the palette color."""
    rgb = np.array(color_rgb(color)) * gain
    out = np.zeros((len(centers), 3, h, w))
    half = size // 2
    for t, c in enumerate(centers):
        if c is None:
            continue
        cx, cy = c
        out[t, :, cy - half:cy + half + 1, cx - half:cx + half + 1] = rgb[:, None, None]
    return out


class TestCentroidTrack:
    def test_block_center_recovered_exactly(self):
        centers = [(5, 5), (6, 7), (9, 9), (12, 4)]
        tracked = centroid_track(frames_with_block(centers), RED)
        assert tracked.shape == (4, 2)
        for t, (cx, cy) in enumerate(centers):
            assert tracked[t, 0] == pytest.approx(cx, abs=1e-12)
            assert tracked[t, 1] == pytest.approx(cy, abs=1e-12)

    def test_missing_frame_yields_nan_row(self):
        tracked = centroid_track(frames_with_block([(5, 5), None, (7, 7)]), RED)
        assert np.isnan(tracked[1]).all()
        assert np.isfinite(tracked[[0, 2]]).all()

    def test_color_absent_everywhere_is_an_error(self):
        with pytest.raises(MetricsError):
            centroid_track(np.zeros((3, 3, 8, 8)), RED)

    def test_off_palette_pixels_ignored(self):
        # a heavily dimmed sprite falls outside the matching tolerance
        vid = frames_with_block([(5, 5)], gain=0.5)
        vid += frames_with_block([(10, 10)])
        tracked = centroid_track(vid, RED)
        assert tracked[0, 0] == pytest.approx(10, abs=1e-12)

    def test_two_equal_blobs_average(self):
        vid = frames_with_block([(4, 8)]) + frames_with_block([(12, 8)])
        tracked = centroid_track(vid, RED)
        assert tracked[0, 0] == pytest.approx(8.0, abs=1e-12)
        assert tracked[0, 1] == pytest.approx(8.0, abs=1e-12)

    def test_shape_validation(self):
        with pytest.raises(MetricsError):
            centroid_track(np.zeros((3, 8, 8)), RED)

    def test_tolerance_constant(self):
        assert COLOR_TOLERANCE == 0.15


class TestTrajectoryError:
    def test_perfect_track_scores_zero(self):
        target = np.stack([np.arange(5.0), np.arange(5.0)], axis=1)
        score = trajectory_error(target.copy(), target)
        assert score.mean_px == 0.0 and score.max_px == 0.0

    def test_constant_offset_is_euclidean(self):
        target = np.stack([np.arange(5.0), np.zeros(5)], axis=1)
        tracked = target + np.array([3.0, 4.0])
        score = trajectory_error(tracked, target)
        assert score.mean_px == pytest.approx(5.0, abs=1e-12)
        assert score.max_px == pytest.approx(5.0, abs=1e-12)
        assert np.allclose(score.per_frame, 5.0)

    def test_two_point_target_resampled_along_line(self):
        # straight two-point target against a track that sits on the line
        target = np.array([[0.0, 0.0], [8.0, 0.0]])
        tracked = np.stack([np.linspace(0, 8, 5), np.zeros(5)], axis=1)
        score = trajectory_error(tracked, target)
        assert score.mean_px == pytest.approx(0.0, abs=1e-12)

    def test_nan_frames_skipped(self):
        target = np.stack([np.arange(4.0), np.zeros(4)], axis=1)
        tracked = target + np.array([0.0, 2.0])
        tracked[2] = np.nan
        score = trajectory_error(tracked, target)
        assert score.mean_px == pytest.approx(2.0, abs=1e-12)
        assert np.isnan(score.per_frame[2])

    def test_all_nan_is_an_error(self):
        target = np.zeros((3, 2))
        with pytest.raises(MetricsError):
            trajectory_error(np.full((3, 2), np.nan), target)


class TestPsnr:
    def test_identical_hits_cap(self):
        a = np.random.default_rng(0).random((2, 3, 4, 4))
        assert psnr(a, a.copy()) == PSNR_CAP

    def test_known_mse_literal(self):
        a = np.zeros((1, 3, 4, 4))
        b = np.full_like(a, 0.1)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-12)

    def test_worst_case_zero_db(self):
        a = np.zeros((4, 4))
        b = np.ones((4, 4))
        assert psnr(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(MetricsError):
            psnr(np.zeros((2, 2)), np.zeros((3, 3)))


class TestEvaluateSample:
    def test_tracks_against_target_path(self):
        centers = [(4, 4), (6, 5), (8, 6), (10, 7)]
        vid = frames_with_block(centers)
        target = np.array(centers, dtype=float)
        out = evaluate_sample(vid, target, RED)
        assert out["mean_px"] == pytest.approx(0.0, abs=1e-9)
        assert out["max_px"] == pytest.approx(0.0, abs=1e-9)
        assert out["psnr"] is None

    def test_reference_enables_psnr(self):
        vid = frames_with_block([(4, 4), (6, 5)])
        target = np.array([(4, 4), (6, 5)], dtype=float)
        out = evaluate_sample(vid, target, RED, reference=vid.copy())
        assert out["psnr"] == PSNR_CAP


class TestReports:
    def test_aggregate_rules(self):
        per = [
            {"mean_px": 1.0, "max_px": 2.0, "psnr": 30.0},
            {"mean_px": 3.0, "max_px": 5.0, "psnr": 20.0},
        ]
        rep = evaluation_report(per)
        agg = rep["aggregate"]
        assert agg["mean_px"] == pytest.approx(2.0)
        assert agg["max_px"] == pytest.approx(5.0)
        assert agg["psnr"] == pytest.approx(25.0)
        assert agg["samples"] == 2
        assert rep["per_sample"] == per

    def test_psnr_none_when_no_references(self):
        per = [{"mean_px": 1.0, "max_px": 2.0, "psnr": None}]
        assert evaluation_report(per)["aggregate"]["psnr"] is None

    def test_write_report_round_trips(self, tmp_path):
        rep = evaluation_report([{"mean_px": 1.0, "max_px": 2.0, "psnr": None}])
        path = tmp_path / "report.json"
        write_report(path, rep)
        assert json.loads(path.read_text()) == rep


class TestOverlay:
    def test_writes_scaled_png(self, tmp_path):
        from PIL import Image

        vid = frames_with_block([(4, 4), (8, 8)])
        tracked = centroid_track(vid, RED)
        target = np.array([(4.0, 4.0), (8.0, 8.0)])
        path = tmp_path / "overlay.png"
        save_overlay_png(path, vid[0], tracked, target, scale=8)
        with Image.open(path) as im:
            assert im.size == (16 * 8, 16 * 8)
