"""Remote-sensing subimage matching over user-supplied source imagery.

The displayed "original" is a large view rectangle cut from a source image;
the candidate patch either comes from inside that view (answer yes, with an
optional 90-degree rotation and rescale) or from a zero-overlap region or a
different source (answer no). Low-texture crops are rejected so candidates
keep enough visual information. Answers follow from the latent rectangles,
never from pixels.
"""

from __future__ import annotations

import os

import numpy as np

from ..render import (BLACK, Canvas, DrawCommand, crop_transform, load_png)
from .base import (BenchSample, DependencyGraph, DifficultyProfile,
                   GenerationInfeasible, LatentScene, make_rng, metadata_for)

VIEW_SIDE = 224
CAND_MIN, CAND_MAX = 56, 96
PAD = 16
WIDTH = PAD + VIEW_SIDE + PAD + int(CAND_MAX * 2.0) + PAD
HEIGHT = PAD + max(VIEW_SIDE, int(CAND_MAX * 2.0)) + PAD
MIN_SOURCE_SIDE = 320
TEXTURE_STD_THRESHOLD = 12.0

PROMPT = (
    "The left side shows a remote-sensing image inside a black box. The "
    "right side shows a candidate subimage inside a black box. The candidate "
    "may be rotated by a multiple of 90 degrees or rescaled. Please check if "
    "the candidate subimage corresponds to a region of the left image. "
    "Respond with only {yes} or {no}."
)


class SourceExhausted(GenerationInfeasible):
    """No crop passed the texture filter within the retry budget."""


_SOURCE_CACHE: "dict[str, np.ndarray]" = {}


def make_synthetic_sources(out_dir: str, count: int = 4, seed: int = 0,
                           side: int = 384) -> list:
    """Write deterministic textured source images for tests and demos.

    Real corpora use user-supplied imagery; these stand-ins mix coarse
    terrain blocks, road-like strips, and building-like rectangles so crops
    carry enough texture to pass the quality filter.
    """
    from .base import make_rng
    from ..render import Canvas, save_png

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i in range(count):
        rng = make_rng(seed * 1000 + i)
        base = rng.integers(60, 150, size=3)
        noise = rng.integers(-28, 29, size=(side, side, 3))
        img = np.clip(base[None, None, :] + noise, 0, 255).astype(np.uint8)
        for _ in range(18):  # terrain patches
            x = int(rng.integers(0, side - 40))
            y = int(rng.integers(0, side - 40))
            w = int(rng.integers(30, 110))
            h = int(rng.integers(30, 110))
            tint = rng.integers(40, 215, size=3)
            img[y:min(side, y + h), x:min(side, x + w)] = (
                0.55 * img[y:min(side, y + h), x:min(side, x + w)]
                + 0.45 * tint[None, None, :]).astype(np.uint8)
        for _ in range(6):  # road-like strips
            if rng.random() < 0.5:
                y = int(rng.integers(0, side - 6))
                img[y:y + int(rng.integers(3, 7)), :] = rng.integers(170, 220)
            else:
                x = int(rng.integers(0, side - 6))
                img[:, x:x + int(rng.integers(3, 7))] = rng.integers(170, 220)
        for _ in range(60):  # building-like blocks
            x = int(rng.integers(0, side - 18))
            y = int(rng.integers(0, side - 18))
            w = int(rng.integers(5, 18))
            h = int(rng.integers(5, 18))
            img[y:y + h, x:x + w] = rng.integers(25, 240, size=3)
        path = os.path.join(out_dir, f"source_{i:02d}.png")
        save_png(Canvas(side, side, img), path)
        paths.append(path)
    return paths


def list_sources(source_dir: str) -> list:
    names = sorted(n for n in os.listdir(source_dir)
                   if n.lower().endswith((".png", ".jpg", ".jpeg")))
    if not names:
        raise IOError(f"no raster images found in {source_dir}")
    return [os.path.join(source_dir, n) for n in names]


def _load_source(path: str) -> np.ndarray:
    arr = _SOURCE_CACHE.get(path)
    if arr is None:
        arr = load_png(path).pixels
        if min(arr.shape[0], arr.shape[1]) < MIN_SOURCE_SIDE:
            raise IOError(f"source {path} below minimum resolution "
                          f"{MIN_SOURCE_SIDE}px")
        _SOURCE_CACHE[path] = arr
    return arr


def texture_std(patch: np.ndarray) -> float:
    gray = patch.astype(np.float64).mean(axis=2)
    return float(gray.std())


def rect_iou(a: tuple, b: tuple) -> float:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    ix0, iy0 = max(ax0, bx0), max(ay0, by0)
    ix1, iy1 = min(ax1, bx1), min(ay1, by1)
    inter = max(0, ix1 - ix0) * max(0, iy1 - iy0)
    if inter == 0:
        return 0.0
    area_a = (ax1 - ax0) * (ay1 - ay0)
    area_b = (bx1 - bx0) * (by1 - by0)
    return inter / (area_a + area_b - inter)


def _textured_rect(rng: np.random.Generator, img: np.ndarray, side: int,
                   bounds: tuple) -> tuple:
    """A random side x side rect inside bounds passing the texture filter."""
    x0b, y0b, x1b, y1b = bounds
    if x1b - x0b < side or y1b - y0b < side:
        raise SourceExhausted(f"bounds {bounds} cannot fit a {side}px crop")
    for _ in range(64):
        x0 = int(rng.integers(x0b, x1b - side + 1))
        y0 = int(rng.integers(y0b, y1b - side + 1))
        if texture_std(img[y0:y0 + side, x0:x0 + side]) > TEXTURE_STD_THRESHOLD:
            return (x0, y0, x0 + side, y0 + side)
    raise SourceExhausted("no crop passed the texture filter")


def _zero_overlap_rect(rng: np.random.Generator, img: np.ndarray, side: int,
                       view: tuple) -> tuple:
    """A textured rect with zero intersection against the view rectangle.

    Samples directly from the margin strips around the view instead of
    rejection sampling, so tight margins stay reachable.
    """
    h, w = img.shape[:2]
    vx0, vy0, vx1, vy1 = view
    strips = []
    if vx0 >= side:
        strips.append((0, 0, vx0, h))           # left of the view
    if w - vx1 >= side:
        strips.append((vx1, 0, w, h))           # right
    if vy0 >= side:
        strips.append((0, 0, w, vy0))           # above
    if h - vy1 >= side:
        strips.append((0, vy1, w, h))           # below
    if not strips:
        raise SourceExhausted(
            f"no {side}px zero-overlap region around view {view}")
    for _ in range(64):
        strip = strips[int(rng.integers(0, len(strips)))]
        rect = _try_rect_in(rng, img, side, strip)
        if rect is not None:
            assert rect_iou(rect, view) == 0.0
            return rect
    raise SourceExhausted("no zero-overlap crop passed the texture filter")


def _try_rect_in(rng: np.random.Generator, img: np.ndarray, side: int,
                 bounds: tuple) -> "tuple | None":
    x0b, y0b, x1b, y1b = bounds
    if x1b - x0b < side or y1b - y0b < side:
        return None
    x0 = int(rng.integers(x0b, x1b - side + 1))
    y0 = int(rng.integers(y0b, y1b - side + 1))
    if texture_std(img[y0:y0 + side, x0:x0 + side]) > TEXTURE_STD_THRESHOLD:
        return (x0, y0, x0 + side, y0 + side)
    return None


def gen_rs_match(source_dir: str, profile: DifficultyProfile, seed: int,
                 force_label: "str | None" = None,
                 sample_id: "str | None" = None,
                 ) -> "tuple[LatentScene, BenchSample]":
    rng = make_rng(seed)
    sources = list_sources(source_dir)
    label = force_label if force_label is not None else (
        "yes" if rng.random() < 0.5 else "no")
    if label not in ("yes", "no"):
        raise ValueError(f"force_label must be yes/no, got {label!r}")

    src_idx = int(rng.integers(0, len(sources)))
    src_path = sources[src_idx]
    img = _load_source(src_path)
    h, w = img.shape[:2]

    view = _textured_rect(rng, img, VIEW_SIDE, (0, 0, w, h))
    cand_side = int(rng.integers(CAND_MIN, CAND_MAX + 1))

    scale, rotation = 1.0, 0
    if profile.scale_rotation is not None:
        scale, rotation = float(profile.scale_rotation[0]), int(profile.scale_rotation[1])

    cand_src_path = src_path
    if label == "yes":
        cand = _textured_rect(rng, img, cand_side,
                              (view[0], view[1], view[2], view[3]))
        region = "inside the displayed view"
    else:
        other = [p for p in sources if p != src_path]
        use_other = bool(other) and rng.random() < 0.5
        cand = None
        if not use_other:
            try:
                cand = _zero_overlap_rect(rng, img, cand_side, view)
                region = "outside the displayed view"
            except SourceExhausted:
                if not other:
                    raise
                use_other = True  # margins too tight: take another source
        if use_other:
            cand_src_path = other[int(rng.integers(0, len(other)))]
            cand_img = _load_source(cand_src_path)
            ch, cw = cand_img.shape[:2]
            cand = _textured_rect(rng, cand_img, cand_side, (0, 0, cw, ch))
            region = "a different source image"

    cand_img = _load_source(cand_src_path)
    view_canvas = Canvas(w, h, img).copy()
    view_patch = crop_transform(view_canvas, view)
    cand_patch = crop_transform(Canvas(cand_img.shape[1], cand_img.shape[0],
                                       cand_img).copy(),
                                cand, rotation_deg=rotation, scale=scale)

    cand_x = PAD + VIEW_SIDE + PAD
    cmds = [
        DrawCommand(kind="blit", geometry=((PAD, PAD), view_patch.pixels)),
        DrawCommand(kind="blit", geometry=((cand_x, PAD), cand_patch.pixels)),
        _border(PAD, PAD, VIEW_SIDE, VIEW_SIDE),
        _border(cand_x, PAD, cand_patch.width, cand_patch.height),
    ]

    if label == "yes":
        pos = _position_phrase(cand, view)
        perception = (f"Candidate patch matches the region near the {pos} of "
                      f"the displayed image. Candidate is rotated {rotation} "
                      f"degrees and scaled by {scale:g}.")
    else:
        perception = (f"Candidate patch comes from {region}. No region of the "
                      "displayed image contains the candidate pattern.")

    scene = LatentScene(
        scenario="rs", seed=int(seed),
        graph=DependencyGraph(nodes=(), edges=()),
        placements=(("view", float(view[0]), float(view[1])),
                    ("cand", float(cand[0]), float(cand[1]))),
        transform=(scale, rotation), label=label,
        width=WIDTH, height=HEIGHT, draw_commands=tuple(cmds),
        extra={
            "source": os.path.basename(src_path),
            "cand_source": os.path.basename(cand_src_path),
            "view_rect": list(view),
            "cand_rect": list(cand),
            "structure": {"source": os.path.basename(src_path),
                          "view": list(view), "cand": list(cand),
                          "cand_source": os.path.basename(cand_src_path)},
        })

    sid = sample_id if sample_id is not None else f"rs_{seed}"
    sample = BenchSample(
        id=sid, image=f"./images/{sid}.png", prompt=PROMPT,
        answer=label, perception=perception,
        metadata=metadata_for(
            "rs", seed, profile,
            source=os.path.basename(src_path),
            cand_source=os.path.basename(cand_src_path),
            view_rect=list(view), cand_rect=list(cand),
            texture=round(texture_std(
                cand_img[cand[1]:cand[3], cand[0]:cand[2]]), 2)))
    return scene, sample


def _border(x: int, y: int, w: int, h: int) -> DrawCommand:
    # stroked 1px outside the patch so the blitted pixels stay untouched
    return DrawCommand(kind="polygon",
                       geometry=((x - 2, y - 2), (x + w + 1, y - 2),
                                 (x + w + 1, y + h + 1), (x - 2, y + h + 1)),
                       fill=None, stroke=BLACK, width=2.0)


def _position_phrase(cand: tuple, view: tuple) -> str:
    cx = (cand[0] + cand[2]) / 2 - view[0]
    cy = (cand[1] + cand[3]) / 2 - view[1]
    horiz = ("left" if cx < VIEW_SIDE / 3
             else "right" if cx > 2 * VIEW_SIDE / 3 else "center")
    vert = ("top" if cy < VIEW_SIDE / 3
            else "bottom" if cy > 2 * VIEW_SIDE / 3 else "middle")
    return f"{vert} {horiz}"
