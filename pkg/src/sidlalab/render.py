"""Deterministic SVG pictures of forests.

One line segment per tree edge, boundary drawn along the bottom, levels
increasing upward.  Each tree is colored by a hash of its root so that
adjacent trees separate visually; one root can be highlighted in red.
Seam-crossing edges are drawn from the head's local tail position, so a
cyclic window never produces segments across the full image.  Output text
depends only on the input arrays and options.
"""

from __future__ import annotations

from dataclasses import dataclass

from .hashing import hash_u64
from .lattice import Dir, Vertex

_PALETTE_SEED = 0x5E4A7
_HIGHLIGHT_COLOR = "#d81b2a"


def _fmt(v: float) -> str:
    return format(v, ".6g")


def root_color(x: int) -> str:
    """Deterministic hash palette; hue spread over the wheel, red-ish band
    avoided so the highlight stays unique."""
    hue = 25 + (hash_u64(_PALETTE_SEED, x) % 300)
    return f"hsl({hue},62%,42%)"


@dataclass(frozen=True)
class RenderOptions:
    highlight_root: Vertex | None = Vertex(0, 0)
    scale: float = 12.0
    max_level: int | None = None

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.max_level is not None and self.max_level < 0:
            raise ValueError(f"max_level must be nonnegative, got {self.max_level}")


def render_svg(forest_like, options: RenderOptions = RenderOptions()) -> str:
    """Render the forest (or covered particle state) as an SVG document."""
    win = forest_like.window
    W, M = win.W, win.M
    top = M if options.max_level is None else min(options.max_level, M)
    s = options.scale
    highlight_x = None
    if options.highlight_root is not None:
        hr = options.highlight_root
        highlight_x = (hr.x if isinstance(hr, Vertex) else int(hr)) % win.period

    def sx(x: float) -> float:
        return (x + 1.0) * s

    def sy(y: float) -> float:
        return (top - y + 1.0) * s

    width = _fmt((2 * W + 2) * s)
    height = _fmt((top + 2) * s)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"  <title>{forest_like.profile_label} seed={forest_like.seed} "
        f"window={W}x{M}</title>",
        f'  <rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]

    stroke = _fmt(0.16 * s)
    plain: list[str] = []
    red: list[str] = []
    labels = forest_like.root_x
    pdirs = forest_like.parent_dir
    for y in range(1, top + 1):
        for j in range(W):
            root = int(labels[y, j])
            if root < 0:
                continue
            hx = (y & 1) + 2 * j
            d = Dir(int(pdirs[y, j]))
            tx = hx - d.dx
            seg = (
                f'  <line x1="{_fmt(sx(tx))}" y1="{_fmt(sy(y - 1))}" '
                f'x2="{_fmt(sx(hx))}" y2="{_fmt(sy(y))}" '
            )
            if highlight_x is not None and root == highlight_x:
                red.append(
                    seg + f'stroke="{_HIGHLIGHT_COLOR}" '
                    f'stroke-width="{stroke}" stroke-linecap="round"/>'
                )
            else:
                plain.append(
                    seg + f'stroke="{root_color(root)}" '
                    f'stroke-width="{stroke}" stroke-linecap="round"/>'
                )
    lines.extend(plain)
    lines.extend(red)

    r = _fmt(0.2 * s)
    for j in range(W):
        x = 2 * j
        color = (
            _HIGHLIGHT_COLOR
            if highlight_x is not None and x == highlight_x
            else root_color(x)
        )
        lines.append(
            f'  <circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(0))}" r="{r}" '
            f'fill="{color}"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
