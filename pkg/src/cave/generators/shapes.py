"""Fixed vector definitions of the five grid shapes.

Vertices are unit-normalized (size 1.0 spans roughly the bounding diameter)
so rendered shapes carry uniform visual size by construction. Rotational
symmetry periods drive canonical rotation comparison: two rotations are the
same pose iff they agree modulo the shape's period.
"""

from __future__ import annotations

import math

SHAPE_KINDS = ("triangle", "square", "circle", "parallelogram", "pentagon")

# degrees of rotational symmetry; the circle is invariant under any rotation
SYMMETRY_PERIOD: "dict[str, float]" = {
    "triangle": 120.0,
    "square": 90.0,
    "circle": 0.0,
    "parallelogram": 180.0,
    "pentagon": 72.0,
}


def _regular(n: int, radius: float, phase_deg: float) -> list:
    pts = []
    for i in range(n):
        a = math.radians(phase_deg + 360.0 * i / n)
        pts.append((radius * math.sin(a), -radius * math.cos(a)))
    return pts


# unit outlines centered at the origin, screen coordinates (y grows downward)
UNIT_SHAPES: "dict[str, list]" = {
    # apex at the top: "points upward" at rotation 0
    "triangle": _regular(3, 0.5, 0.0),
    "square": [(-0.36, -0.36), (0.36, -0.36), (0.36, 0.36), (-0.36, 0.36)],
    "pentagon": _regular(5, 0.46, 0.0),
    "parallelogram": [(-0.42, -0.22), (0.26, -0.22), (0.42, 0.22), (-0.26, 0.22)],
}
CIRCLE_RADIUS = 0.40


def canonical_rotation(kind: str, rotation_deg: float) -> float:
    """Rotation reduced modulo the shape's symmetry period."""
    period = SYMMETRY_PERIOD[kind]
    if period <= 0.0:
        return 0.0
    return rotation_deg % period


def same_pose(kind_a: str, rot_a: float, kind_b: str, rot_b: float,
              tolerance_deg: float = 14.0) -> bool:
    """Shape-kind and canonical-rotation equality within a tolerance.

    Rotations closer than the tolerance after canonicalization count as the
    identical pose; generated angles sit on a 15-degree grid so the default
    keeps distinct poses distinguishable.
    """
    if kind_a != kind_b:
        return False
    period = SYMMETRY_PERIOD[kind_a]
    if period <= 0.0:
        return True
    diff = abs(canonical_rotation(kind_a, rot_a) - canonical_rotation(kind_b, rot_b))
    diff = min(diff, period - diff)
    return diff < tolerance_deg


def shape_points(kind: str, center: tuple, size: float,
                 rotation_deg: float = 0.0) -> list:
    """Canvas-space outline of a shape; circles are handled by the caller."""
    if kind == "circle":
        raise ValueError("circle has no polygon outline; use CIRCLE_RADIUS")
    cx, cy = center
    a = math.radians(rotation_deg)
    cos_a, sin_a = math.cos(a), math.sin(a)
    pts = []
    for ux, uy in UNIT_SHAPES[kind]:
        x, y = ux * size, uy * size
        # screen-coordinate clockwise rotation equals visual clockwise
        pts.append((cx + x * cos_a - y * sin_a, cy + x * sin_a + y * cos_a))
    return pts
