"""Deterministic dot / label rendering for visual referencing.

The query point gets a red filled circle with a white outline; labeled
choices use a fixed colorblind-safe palette with a letter on a dark plate
next to the dot. Rendering is pure pixel math through PIL, so identical
overlays always produce identical rasters.
"""

from __future__ import annotations

from dataclasses import dataclass

from PIL import Image, ImageDraw, ImageFont

QUERY_COLOR = (220, 30, 30)
OUTLINE_COLOR = (255, 255, 255)
PLATE_COLOR = (20, 20, 20)
TEXT_COLOR = (255, 255, 255)

# Okabe-Ito hues, one per choice letter
LABEL_PALETTE = {
    "A": (0, 114, 178),
    "B": (230, 159, 0),
    "C": (0, 158, 115),
    "D": (204, 121, 167),
}


class OverlayBoundsError(ValueError):
    """Overlay center falls outside the image."""


@dataclass(frozen=True)
class DotOverlay:
    """One marker: a filled dot, optionally lettered."""

    x: float
    y: float
    label: str | None = None  # None = query circle


def dot_radius(width: int) -> int:
    return max(4, round(0.008 * width))


def _plate_candidates(x: int, y: int, r: int, tw: int, th: int):
    pad = 2
    yield (x + r + 3, y - th // 2 - pad)  # right of the dot
    yield (x - r - 3 - tw - 2 * pad, y - th // 2 - pad)  # left
    yield (x - tw // 2 - pad, y + r + 3)  # below
    yield (x - tw // 2 - pad, y - r - 3 - th - 2 * pad)  # above


def render_annotations(image: Image.Image, overlays: list[DotOverlay]) -> Image.Image:
    """Return a copy of ``image`` with every overlay drawn.

    Raises OverlayBoundsError if any dot center lies outside the image.
    Overlapping label plates are nudged through a fixed candidate order
    (right, left, below, above), so output is deterministic.
    """
    out = image.copy().convert("RGB")
    if not overlays:
        return out
    draw = ImageDraw.Draw(out)
    w, h = out.size
    r = dot_radius(w)
    font = ImageFont.load_default()
    placed: list[tuple[int, int, int, int]] = []

    for ov in overlays:
        if not (0 <= ov.x < w and 0 <= ov.y < h):
            raise OverlayBoundsError(f"dot ({ov.x}, {ov.y}) outside {w}x{h} image")

    for ov in overlays:
        x, y = round(ov.x), round(ov.y)
        color = QUERY_COLOR if ov.label is None else LABEL_PALETTE.get(ov.label, QUERY_COLOR)
        draw.ellipse(
            [x - r - 1, y - r - 1, x + r + 1, y + r + 1], fill=OUTLINE_COLOR
        )
        draw.ellipse([x - r, y - r, x + r, y + r], fill=color)
        if ov.label is None:
            continue
        bbox = font.getbbox(ov.label)
        tw, th = bbox[2] - bbox[0], bbox[3] - bbox[1]
        pad = 2
        rect = None
        for px, py in _plate_candidates(x, y, r, tw, th):
            cand = (px, py, px + tw + 2 * pad, py + th + 2 * pad)
            inside = 0 <= cand[0] and 0 <= cand[1] and cand[2] < w and cand[3] < h
            clear = all(
                cand[2] < q[0] or q[2] < cand[0] or cand[3] < q[1] or q[3] < cand[1]
                for q in placed
            )
            if inside and clear:
                rect = cand
                break
        if rect is None:  # crowded corner: fall back to the first in-image spot
            for px, py in _plate_candidates(x, y, r, tw, th):
                cand = (px, py, px + tw + 2 * pad, py + th + 2 * pad)
                if 0 <= cand[0] and 0 <= cand[1] and cand[2] < w and cand[3] < h:
                    rect = cand
                    break
        if rect is None:
            rect = (min(max(x, 0), w - tw - 2 * pad), min(max(y, 0), h - th - 2 * pad),
                    min(max(x, 0), w - tw - 2 * pad) + tw + 2 * pad,
                    min(max(y, 0), h - th - 2 * pad) + th + 2 * pad)
        placed.append(rect)
        draw.rectangle(rect, fill=PLATE_COLOR)
        draw.text((rect[0] + pad - bbox[0], rect[1] + pad - bbox[1]), ov.label,
                  fill=TEXT_COLOR, font=font)
    return out
