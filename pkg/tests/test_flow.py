"""Flow container, .flo wire format, and analytic sprite flow."""

import struct

import numpy as np
import pytest

from dragflow.flow import (
    FlowField,
    FlowFrame,
    FormatError,
    flow_magnitude,
    read_flo,
    read_flo_file,
    read_flow_dir,
    synthetic_flow,
    write_flo,
    write_flo_file,
    write_flow_dir,
)
from dragflow.scenes import LinearMotion, SceneSpec, SpriteSpec, occupancy, render_scene


def make_frame(h=3, w=4, seed=0):
    rng = np.random.default_rng(seed)
    # float32-representable values so narrowing on write is lossless
    return FlowFrame(rng.standard_normal((2, h, w)).astype(np.float32).astype(np.float64))


def test_flo_byte_layout():
    uv = np.zeros((2, 2, 3))
    uv[0, 0, 1] = 1.5  # u at row 0 col 1
    uv[1, 1, 2] = -2.25  # v at row 1 col 2
    raw = write_flo(FlowFrame(uv))
    (magic,) = struct.unpack_from("<f", raw, 0)
    assert magic == np.float32(202021.25)
    w, h = struct.unpack_from("<ii", raw, 4)
    assert (w, h) == (3, 2)
    vals = struct.unpack_from(f"<{2 * 2 * 3}f", raw, 12)
    # row-major pixels, (u, v) interleaved per pixel
    assert vals[2] == 1.5  # pixel (0,1) u slot: index (0*3+1)*2
    assert vals[(1 * 3 + 2) * 2 + 1] == -2.25
    assert len(raw) == 12 + 8 * 6


def test_flo_round_trip_exact():
    f = make_frame()
    again = read_flo(write_flo(f))
    assert np.array_equal(again.uv, f.uv)
    assert write_flo(again) == write_flo(f)


def test_flo_errors():
    with pytest.raises(FormatError, match="truncated"):
        read_flo(b"\x00" * 8)
    f = make_frame()
    raw = write_flo(f)
    with pytest.raises(FormatError, match="magic"):
        read_flo(b"\x00\x00\x00\x00" + raw[4:])
    with pytest.raises(FormatError, match="truncated"):
        read_flo(raw[:-4])
    bad_dims = raw[:4] + struct.pack("<ii", -1, 2) + raw[12:]
    with pytest.raises(FormatError, match="dimensions"):
        read_flo(bad_dims)
    with pytest.raises(FormatError, match="finite"):
        write_flo(FlowFrame(np.full((2, 2, 2), np.nan)))


def test_flo_file_round_trip(tmp_path):
    f = make_frame(5, 7, seed=1)
    p = tmp_path / "a.flo"
    write_flo_file(p, f)
    assert np.array_equal(read_flo_file(p).uv, f.uv)


def test_flow_dir_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    field = FlowField(rng.standard_normal((6, 2, 4, 5)).astype(np.float32).astype(np.float64))
    d = tmp_path / "flows"
    write_flow_dir(d, field)
    names = sorted(p.name for p in d.iterdir())
    assert names == [f"frame_{t:04d}.flo" for t in range(6)]
    again = read_flow_dir(d)
    assert np.array_equal(again.frames, field.frames)
    with pytest.raises(FormatError, match="no frame"):
        read_flow_dir(tmp_path / "nothing")


def test_flow_magnitude_oracle():
    uv = np.zeros((2, 2, 2))
    uv[:, 0, 0] = (3.0, 4.0)
    uv[:, 1, 1] = (-1.0, 0.0)
    mag = flow_magnitude(FlowFrame(uv))
    assert mag[0, 0] == 5.0
    assert mag[1, 1] == 1.0
    assert mag[0, 1] == 0.0


def test_shape_validation():
    with pytest.raises(FormatError):
        FlowFrame(np.zeros((3, 4, 4)))
    with pytest.raises(FormatError):
        FlowField(np.zeros((2, 3, 4, 4)))


def linear_scene(velocity=(2.0, 1.0), frames=4):
    return SceneSpec(
        width=24,
        height=20,
        frames=frames,
        sprites=[
            SpriteSpec(
                shape="square",
                color=1,
                size=5.0,
                start=(6.0, 6.0),
                motion=LinearMotion(velocity=velocity),
            )
        ],
    )


def test_synthetic_flow_values_on_and_off_sprite():
    scene = linear_scene()
    field = synthetic_flow(scene)
    assert field.frames.shape == (3, 2, 20, 24)
    top = occupancy(scene, 0)
    covered = top == 0
    assert np.array_equal(field.frames[0, 0][covered], np.full(covered.sum(), 2.0))
    assert np.array_equal(field.frames[0, 1][covered], np.full(covered.sum(), 1.0))
    assert (field.frames[0][:, ~covered] == 0).all()


def test_synthetic_flow_overlap_takes_topmost():
    scene = SceneSpec(
        width=20,
        height=20,
        frames=3,
        sprites=[
            SpriteSpec("square", 1, 8.0, (9.0, 9.0), LinearMotion((1.0, 0.0))),
            SpriteSpec("square", 2, 4.0, (9.0, 9.0), LinearMotion((0.0, -1.0))),
        ],
    )
    field = synthetic_flow(scene)
    # center pixel belongs to the later (smaller) sprite
    assert field.frames[0, 0, 9, 9] == 0.0
    assert field.frames[0, 1, 9, 9] == -1.0
    # a pixel only the big sprite covers
    assert field.frames[0, 0, 9, 13] == 1.0
    assert field.frames[0, 1, 9, 13] == 0.0


def test_synthetic_flow_warp_consistency_integer_velocity():
    # with integer velocity, moving frame-t sprite pixels by the flow lands
    # exactly on frame t+1 pixels of the same color
    scene = linear_scene(velocity=(2.0, 1.0), frames=5)
    vid = render_scene(scene)
    field = synthetic_flow(scene)
    h, w = scene.height, scene.width
    for t in range(4):
        top = occupancy(scene, t)
        ys, xs = np.nonzero(top == 0)
        for y, x in zip(ys, xs):
            u = int(field.frames[t, 0, y, x])
            v = int(field.frames[t, 1, y, x])
            ny, nx = y + v, x + u
            if 0 <= ny < h and 0 <= nx < w:
                assert np.array_equal(vid[t + 1, :, ny, nx], vid[t, :, y, x])


def test_synthetic_flow_static_scene_is_zero():
    scene = linear_scene(velocity=(0.0, 0.0))
    assert (synthetic_flow(scene).frames == 0).all()
