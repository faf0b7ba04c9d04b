from __future__ import annotations

import hashlib

import numpy as np
import pytest

from cave.render import (BLACK, Canvas, DrawCommand, OutOfBounds, crop_transform,
                         cubic_bezier_points, draw_glyphs, encode_png, render)


def png_hash(canvas: Canvas) -> str:
    return hashlib.sha256(encode_png(canvas)).hexdigest()


def test_empty_scene_uniform_background():
    canvas = render([], 64, 48, background=(250, 250, 250))
    assert canvas.pixels.shape == (48, 64, 3)
    assert (canvas.pixels == 250).all()


def test_square_fill_analytic_area():
    square = DrawCommand(kind="polygon",
                         geometry=((10, 10), (60, 10), (60, 60), (10, 60)),
                         fill=(255, 0, 0))
    canvas = render([square], 100, 100)
    filled = int((canvas.pixels[:, :, 0] == 255).sum()
                 - (canvas.pixels[:, :, 1] == 255).sum())
    assert filled == pytest.approx(50 * 50, rel=0.02)


def test_render_determinism():
    cmds = [
        DrawCommand(kind="circle", geometry=((32, 32), 12), fill=(0, 100, 0)),
        DrawCommand(kind="arrow", geometry=((5, 5), (60, 50)), stroke=BLACK),
        DrawCommand(kind="glyph_label", geometry=((4, 4),), text="A7",
                    stroke=BLACK, scale=2),
        DrawCommand(kind="bezier_path",
                    geometry=(((0, 40), (20, 0), (40, 80), (63, 40)),),
                    stroke=(10, 10, 200), width=3),
    ]
    h1 = png_hash(render(cmds, 64, 64))
    h2 = png_hash(render(cmds, 64, 64))
    assert h1 == h2


def test_png_bytes_stable_across_encodes():
    canvas = render([DrawCommand(kind="circle", geometry=((10, 10), 5),
                                 fill=(1, 2, 3))], 20, 20)
    assert encode_png(canvas) == encode_png(canvas)


def test_crop_identity():
    base = render([DrawCommand(kind="circle", geometry=((16, 16), 8),
                               fill=(9, 9, 9))], 32, 32)
    out = crop_transform(base, (0, 0, 32, 32), rotation_deg=0, scale=1.0)
    assert (out.pixels == base.pixels).all()


def test_rotation_180_involution():
    rng = np.random.default_rng(3)
    arr = rng.integers(0, 255, size=(20, 30, 3), dtype=np.uint8)
    canvas = Canvas(30, 20, arr)
    once = crop_transform(canvas, (0, 0, 30, 20), rotation_deg=180)
    twice = crop_transform(once, (0, 0, once.width, once.height),
                           rotation_deg=180)
    assert (twice.pixels == arr).all()


def test_rotation_90_permutation_oracle():
    rng = np.random.default_rng(4)
    arr = rng.integers(0, 255, size=(5, 7, 3), dtype=np.uint8)
    canvas = Canvas(7, 5, arr)
    out = crop_transform(canvas, (0, 0, 7, 5), rotation_deg=90)
    assert (out.width, out.height) == (5, 7)
    # explicit index arithmetic: counterclockwise quarter turn maps
    # in[r, c] -> out[W-1-c, r] for an H x W input
    h, w = 5, 7
    for r in range(h):
        for c in range(w):
            assert (out.pixels[w - 1 - c, r] == arr[r, c]).all()


def test_rotation_group_laws():
    rng = np.random.default_rng(5)
    arr = rng.integers(0, 255, size=(8, 8, 3), dtype=np.uint8)
    canvas = Canvas(8, 8, arr)
    full = (0, 0, 8, 8)
    r90 = crop_transform(canvas, full, rotation_deg=90)
    r90_twice = crop_transform(r90, full, rotation_deg=90)
    r180 = crop_transform(canvas, full, rotation_deg=180)
    assert (r90_twice.pixels == r180.pixels).all()
    quad = canvas
    for _ in range(4):
        quad = crop_transform(quad, full, rotation_deg=90)
    assert (quad.pixels == arr).all()


def test_nearest_neighbor_scaling():
    arr = np.arange(4 * 4 * 3, dtype=np.uint8).reshape(4, 4, 3)
    canvas = Canvas(4, 4, arr)
    doubled = crop_transform(canvas, (0, 0, 4, 4), scale=2.0)
    assert (doubled.width, doubled.height) == (8, 8)
    for r in range(8):
        for c in range(8):
            assert (doubled.pixels[r, c] == arr[r // 2, c // 2]).all()
    halved = crop_transform(canvas, (0, 0, 4, 4), scale=0.5)
    assert (halved.width, halved.height) == (2, 2)
    assert (halved.pixels[0, 0] == arr[0, 0]).all()


def test_crop_out_of_bounds():
    canvas = Canvas.blank(10, 10)
    with pytest.raises(OutOfBounds):
        crop_transform(canvas, (0, 0, 11, 5))
    with pytest.raises(OutOfBounds):
        crop_transform(canvas, (-1, 0, 5, 5))
    with pytest.raises(ValueError):
        crop_transform(canvas, (0, 0, 5, 5), rotation_deg=45)


def test_far_out_of_bounds_polygon_rejected():
    cmd = DrawCommand(kind="polygon",
                      geometry=((-500, -500), (-400, -500), (-450, -400)),
                      fill=BLACK)
    with pytest.raises(OutOfBounds):
        render([cmd], 64, 64)


def test_glyphs_have_footprint():
    canvas = Canvas.blank(120, 24)
    draw_glyphs(canvas, "R7", (2, 2), (0, 0, 0), scale=2)
    dark = (canvas.pixels == 0).all(axis=2).sum()
    assert dark > 40


def test_every_glyph_distinct():
    renders = {}
    for ch in "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ":
        canvas = Canvas.blank(16, 18)
        draw_glyphs(canvas, ch, (2, 2), (0, 0, 0), scale=2)
        renders[ch] = canvas.pixels.tobytes()
    assert len(set(renders.values())) == len(renders)


def test_bezier_endpoints_exact():
    pts = cubic_bezier_points((0, 0), (10, 0), (20, 30), (30, 30), samples=17)
    assert tuple(pts[0]) == (0.0, 0.0)
    assert tuple(pts[-1]) == (30.0, 30.0)


def test_polygon_rotation_preserves_centroid():
    tri = ((30, 20), (50, 20), (40, 40))
    a = render([DrawCommand(kind="polygon", geometry=tri, fill=BLACK,
                            rotation=90.0)], 80, 60)
    dark = np.argwhere((a.pixels == 0).all(axis=2))
    cy, cx = dark.mean(axis=0)
    assert cx == pytest.approx(40, abs=1.5)
    assert cy == pytest.approx(26.67, abs=1.5)
