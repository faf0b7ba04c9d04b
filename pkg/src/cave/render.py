"""Deterministic software rasterizer for generated scenes.

Everything renders into a plain RGB8 numpy buffer with no anti-aliasing, no
font dependencies (labels use an embedded 5x7 bitmap face), and no ambient
state, so identical draw command lists always produce byte-identical images.
PNG output carries no metadata chunks that vary across runs.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from PIL import Image

Color = "tuple[int, int, int]"

WHITE: tuple = (255, 255, 255)
BLACK: tuple = (0, 0, 0)


class OutOfBounds(ValueError):
    """Geometry falls outside the canvas or crop bounds."""


@dataclass
class Canvas:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8

    @classmethod
    def blank(cls, width: int, height: int, background: tuple = WHITE) -> "Canvas":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:, :] = background
        return cls(width=width, height=height, pixels=px)

    def copy(self) -> "Canvas":
        return Canvas(self.width, self.height, self.pixels.copy())


@dataclass(frozen=True)
class DrawCommand:
    """One rasterization step; geometry semantics depend on `kind`.

    kinds: polygon (points), circle (center + radius), bezier_path (list of
    4-point cubic segments), arrow (tail + tip), glyph_label (text at pos),
    speckle (point list). Rotation is degrees counterclockwise about the
    element centroid and applies to polygon geometry.
    """

    kind: str
    geometry: tuple
    fill: "tuple | None" = None
    stroke: "tuple | None" = None
    width: float = 2.0
    rotation: float = 0.0
    scale: float = 1.0
    text: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "geometry": self.geometry, "fill": self.fill,
                "stroke": self.stroke, "width": self.width,
                "rotation": self.rotation, "scale": self.scale, "text": self.text}


def rotate_points(points: Sequence, degrees: float,
                  center: "tuple[float, float] | None" = None) -> list:
    pts = [(float(x), float(y)) for x, y in points]
    if degrees % 360.0 == 0.0:
        return pts
    if center is None:
        cx = sum(p[0] for p in pts) / len(pts)
        cy = sum(p[1] for p in pts) / len(pts)
    else:
        cx, cy = center
    # screen y grows downward, so CCW rotation uses the negated angle
    a = -math.radians(degrees)
    cos_a, sin_a = math.cos(a), math.sin(a)
    return [(cx + (x - cx) * cos_a - (y - cy) * sin_a,
             cy + (x - cx) * sin_a + (y - cy) * cos_a) for x, y in pts]


def fill_polygon(canvas: Canvas, points: Sequence, color: tuple) -> None:
    pts = np.asarray(points, dtype=np.float64)
    x0 = max(0, int(math.floor(pts[:, 0].min())))
    x1 = min(canvas.width - 1, int(math.ceil(pts[:, 0].max())))
    y0 = max(0, int(math.floor(pts[:, 1].min())))
    y1 = min(canvas.height - 1, int(math.ceil(pts[:, 1].max())))
    if x1 < x0 or y1 < y0:
        return
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    px = xs + 0.5
    py = ys + 0.5
    inside = np.zeros(px.shape, dtype=bool)
    n = len(pts)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(n):
            ax, ay = pts[i]
            bx, by = pts[(i + 1) % n]
            crosses = (ay <= py) != (by <= py)
            xint = ax + (py - ay) * (bx - ax) / (by - ay)
            inside ^= crosses & (px < xint)
    canvas.pixels[y0:y1 + 1, x0:x1 + 1][inside] = color


def fill_circle(canvas: Canvas, center: Sequence, radius: float, color: tuple) -> None:
    cx, cy = float(center[0]), float(center[1])
    x0 = max(0, int(math.floor(cx - radius)))
    x1 = min(canvas.width - 1, int(math.ceil(cx + radius)))
    y0 = max(0, int(math.floor(cy - radius)))
    y1 = min(canvas.height - 1, int(math.ceil(cy + radius)))
    if x1 < x0 or y1 < y0:
        return
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    mask = (xs + 0.5 - cx) ** 2 + (ys + 0.5 - cy) ** 2 <= radius * radius
    canvas.pixels[y0:y1 + 1, x0:x1 + 1][mask] = color


def _stamp_points(canvas: Canvas, xs: np.ndarray, ys: np.ndarray,
                  color: tuple, radius: float) -> None:
    r_int = max(0, int(math.ceil(radius)))
    dy, dx = np.mgrid[-r_int:r_int + 1, -r_int:r_int + 1]
    disk = (dx * dx + dy * dy) <= max(radius, 0.5) ** 2
    offs_x = dx[disk]
    offs_y = dy[disk]
    px = (np.round(xs).astype(np.int64)[:, None] + offs_x[None, :]).ravel()
    py = (np.round(ys).astype(np.int64)[:, None] + offs_y[None, :]).ravel()
    ok = (px >= 0) & (px < canvas.width) & (py >= 0) & (py < canvas.height)
    canvas.pixels[py[ok], px[ok]] = color


def draw_polyline(canvas: Canvas, points: Sequence, color: tuple,
                  width: float = 2.0) -> None:
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return
    seg = np.diff(pts, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    total = float(lengths.sum())
    if total <= 0:
        _stamp_points(canvas, pts[:1, 0], pts[:1, 1], color, width / 2)
        return
    n = max(2, int(total / 0.6) + 1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = np.linspace(0.0, total, n)
    xs = np.interp(s, cum, pts[:, 0])
    ys = np.interp(s, cum, pts[:, 1])
    _stamp_points(canvas, xs, ys, color, width / 2)


def cubic_bezier_points(p0, p1, p2, p3, samples: int = 48) -> np.ndarray:
    t = np.linspace(0.0, 1.0, samples)[:, None]
    p0, p1, p2, p3 = (np.asarray(p, dtype=np.float64) for p in (p0, p1, p2, p3))
    return ((1 - t) ** 3 * p0 + 3 * (1 - t) ** 2 * t * p1
            + 3 * (1 - t) * t ** 2 * p2 + t ** 3 * p3)


def draw_bezier_path(canvas: Canvas, segments: Sequence, color: tuple,
                     width: float = 2.0, samples: int = 48) -> None:
    """Draw chained cubic segments, each segment a 4-point control tuple."""
    pieces = [cubic_bezier_points(*seg, samples=samples) for seg in segments]
    points = np.concatenate(pieces, axis=0)
    draw_polyline(canvas, points, color, width)


def draw_arrow(canvas: Canvas, tail: Sequence, tip: Sequence, color: tuple,
               width: float = 2.0, head_length: float = 10.0) -> None:
    tx, ty = float(tail[0]), float(tail[1])
    hx, hy = float(tip[0]), float(tip[1])
    dx, dy = hx - tx, hy - ty
    norm = math.hypot(dx, dy)
    if norm <= 0:
        return
    ux, uy = dx / norm, dy / norm
    bx, by = hx - head_length * ux, hy - head_length * uy
    draw_polyline(canvas, [(tx, ty), (bx, by)], color, width)
    half = head_length * 0.45
    left = (bx - uy * half, by + ux * half)
    right = (bx + uy * half, by - ux * half)
    fill_polygon(canvas, [(hx, hy), left, right], color)


# 5x7 bitmap face, one 5-bit row mask per line, MSB on the left.
_FONT: dict = {
    "0": (0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E),
    "1": (0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "2": (0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F),
    "3": (0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E),
    "4": (0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02),
    "5": (0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E),
    "6": (0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E),
    "7": (0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08),
    "8": (0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E),
    "9": (0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C),
    "A": (0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11),
    "B": (0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E),
    "C": (0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E),
    "D": (0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C),
    "E": (0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F),
    "F": (0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10),
    "G": (0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F),
    "H": (0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11),
    "I": (0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "J": (0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C),
    "K": (0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11),
    "L": (0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F),
    "M": (0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11),
    "N": (0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11),
    "O": (0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E),
    "P": (0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10),
    "Q": (0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D),
    "R": (0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11),
    "S": (0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E),
    "T": (0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04),
    "U": (0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E),
    "V": (0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04),
    "W": (0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A),
    "X": (0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11),
    "Y": (0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04),
    "Z": (0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F),
    "?": (0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04),
    "-": (0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00),
}

GLYPH_W, GLYPH_H = 5, 7


def glyph_extent(text: str, scale: int = 2) -> tuple:
    n = len(text)
    return (n * GLYPH_W * scale + max(0, n - 1) * scale, GLYPH_H * scale)


def draw_glyphs(canvas: Canvas, text: str, top_left: Sequence, color: tuple,
                scale: int = 2) -> None:
    x0 = int(round(float(top_left[0])))
    y0 = int(round(float(top_left[1])))
    cursor = x0
    for ch in text.upper():
        rows = _FONT.get(ch)
        if rows is None:
            cursor += (GLYPH_W + 1) * scale
            continue
        bits = np.array([[(row >> (GLYPH_W - 1 - c)) & 1 for c in range(GLYPH_W)]
                         for row in rows], dtype=bool)
        block = np.kron(bits, np.ones((scale, scale), dtype=bool))
        h, w = block.shape
        ys = slice(max(0, y0), min(canvas.height, y0 + h))
        xs = slice(max(0, cursor), min(canvas.width, cursor + w))
        sub = block[ys.start - y0:ys.stop - y0, xs.start - cursor:xs.stop - cursor]
        canvas.pixels[ys, xs][sub] = color
        cursor += (GLYPH_W + 1) * scale


def speckle(canvas: Canvas, points: Sequence, color: tuple,
            radius: float = 1.0) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        return
    _stamp_points(canvas, pts[:, 0], pts[:, 1], color, radius)


def execute(canvas: Canvas, commands: Sequence[DrawCommand]) -> Canvas:
    for cmd in commands:
        if cmd.kind == "polygon":
            pts = rotate_points(cmd.geometry, cmd.rotation)
            if cmd.fill is not None:
                fill_polygon(canvas, pts, cmd.fill)
            if cmd.stroke is not None:
                draw_polyline(canvas, pts + pts[:1], cmd.stroke, cmd.width)
        elif cmd.kind == "circle":
            (cx, cy), radius = cmd.geometry
            if cmd.fill is not None:
                fill_circle(canvas, (cx, cy), radius, cmd.fill)
            if cmd.stroke is not None:
                theta = np.linspace(0, 2 * math.pi, 64)
                ring = np.stack([cx + radius * np.cos(theta),
                                 cy + radius * np.sin(theta)], axis=1)
                draw_polyline(canvas, ring, cmd.stroke, cmd.width)
        elif cmd.kind == "bezier_path":
            draw_bezier_path(canvas, cmd.geometry, cmd.stroke or BLACK, cmd.width)
        elif cmd.kind == "arrow":
            tail, tip = cmd.geometry
            draw_arrow(canvas, tail, tip, cmd.stroke or BLACK, cmd.width)
        elif cmd.kind == "glyph_label":
            draw_glyphs(canvas, cmd.text, cmd.geometry[0], cmd.stroke or BLACK,
                        scale=int(cmd.scale))
        elif cmd.kind == "speckle":
            speckle(canvas, cmd.geometry, cmd.stroke or BLACK, cmd.width / 2)
        elif cmd.kind == "blit":
            _blit(canvas, cmd)
        else:
            raise ValueError(f"unknown draw command kind {cmd.kind!r}")
    return canvas


def _blit(canvas: Canvas, cmd: DrawCommand) -> None:
    (x0, y0), array = cmd.geometry
    arr = np.asarray(array, dtype=np.uint8)
    h, w = arr.shape[:2]
    if x0 < 0 or y0 < 0 or x0 + w > canvas.width or y0 + h > canvas.height:
        raise OutOfBounds(f"blit of {w}x{h} at ({x0}, {y0}) exceeds canvas")
    canvas.pixels[y0:y0 + h, x0:x0 + w] = arr


def render(commands: Sequence[DrawCommand], width: int, height: int,
           background: tuple = WHITE) -> Canvas:
    """Rasterize a command list onto a fresh canvas. Deterministic."""
    for cmd in commands:
        if cmd.kind in ("polygon",):
            for x, y in cmd.geometry:
                if not (-width <= x <= 2 * width and -height <= y <= 2 * height):
                    raise OutOfBounds(f"{cmd.kind} point ({x}, {y}) far outside canvas")
    return execute(Canvas.blank(width, height, background), commands)


def crop_transform(canvas: Canvas, rect: tuple, rotation_deg: int = 0,
                   scale: float = 1.0) -> Canvas:
    """Crop `rect` = (x0, y0, x1, y1), rotate by a 90-degree multiple
    (counterclockwise, lossless pixel permutation), then rescale with
    nearest-neighbor sampling."""
    x0, y0, x1, y1 = (int(v) for v in rect)
    if not (0 <= x0 < x1 <= canvas.width and 0 <= y0 < y1 <= canvas.height):
        raise OutOfBounds(f"crop rect {rect} outside canvas "
                          f"{canvas.width}x{canvas.height}")
    if rotation_deg % 90 != 0:
        raise ValueError("rotation must be a multiple of 90 degrees")
    if scale <= 0:
        raise ValueError("scale must be positive")
    sub = canvas.pixels[y0:y1, x0:x1]
    k = (rotation_deg // 90) % 4
    if k:
        sub = np.rot90(sub, k)
    if scale != 1.0:
        in_h, in_w = sub.shape[:2]
        out_h = max(1, int(round(in_h * scale)))
        out_w = max(1, int(round(in_w * scale)))
        row_idx = np.minimum((np.arange(out_h) / scale).astype(np.int64), in_h - 1)
        col_idx = np.minimum((np.arange(out_w) / scale).astype(np.int64), in_w - 1)
        sub = sub[row_idx][:, col_idx]
    sub = np.ascontiguousarray(sub)
    return Canvas(width=sub.shape[1], height=sub.shape[0], pixels=sub.copy())


def encode_png(canvas: Canvas) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(canvas.pixels, mode="RGB").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def save_png(canvas: Canvas, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(canvas))


def load_png(path: str) -> Canvas:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return Canvas(width=arr.shape[1], height=arr.shape[0], pixels=arr.copy())
