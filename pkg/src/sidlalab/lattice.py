"""Geometry of the rotated upper-half-plane lattice.

Vertices are integer pairs ``(x, y)`` with ``x + y`` even and ``y >= 0``.
Every vertex emits two directed edges, one step left-up ``(-1, 1)`` and one
right-up ``(1, 1)``, so each edge climbs exactly one level.  The level of an
edge is the level of its head.  Level 0 is the boundary; trees grown by the
simulations are rooted there and every non-root vertex lies strictly above
its parent, which makes "distance from the boundary" and "level" the same
number for tree vertices.

Simulations run on a finite cyclic window: x is reduced modulo ``2 * W`` so
each level holds exactly W vertices, and only levels ``0..M`` exist.  A
tree of height m spans at most m + 1 columns, so with ``W >= M + 1`` no
tree can ever wrap onto itself; ``W == M`` is also accepted (the single
wrap case would need a maximal-width tree at exactly the top level).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, NamedTuple

from .errors import ConfigError


class Dir(IntEnum):
    """Edge direction: the horizontal sign of the step to the head."""

    LEFT = 0
    RIGHT = 1

    @property
    def dx(self) -> int:
        return -1 if self is Dir.LEFT else 1

    @property
    def letter(self) -> str:
        return "L" if self is Dir.LEFT else "R"

    @classmethod
    def from_letter(cls, s: str) -> "Dir":
        if s == "L":
            return cls.LEFT
        if s == "R":
            return cls.RIGHT
        raise ValueError(f"direction must be 'L' or 'R', got {s!r}")


class Vertex(NamedTuple):
    x: int
    y: int

    def is_valid(self) -> bool:
        return self.y >= 0 and (self.x + self.y) % 2 == 0


class Edge(NamedTuple):
    """Directed edge identified by its tail and direction."""

    tail: Vertex
    dir: Dir

    @property
    def level(self) -> int:
        # levels count heads, so an edge out of level y sits at level y + 1
        return self.tail.y + 1


def head(e: Edge) -> Vertex:
    return Vertex(e.tail.x + e.dir.dx, e.tail.y + 1)


def shift(v: Vertex, k: int) -> Vertex:
    """Translate horizontally by k fundamental steps (2k in x)."""
    return Vertex(v.x + 2 * k, v.y)


def shift_edge(e: Edge, k: int) -> Edge:
    return Edge(shift(e.tail, k), e.dir)


@dataclass(frozen=True)
class Window:
    """Cyclic simulation window: W columns per level, levels 0..M."""

    W: int
    M: int

    def __post_init__(self) -> None:
        if self.W < 1:
            raise ConfigError(f"window width must be >= 1, got {self.W}")
        if self.M < 1:
            raise ConfigError(f"height cap must be >= 1, got {self.M}")
        if self.W < self.M:
            raise ConfigError(
                f"window width {self.W} too small for height cap {self.M}; "
                f"need W >= M so a single tree cannot wrap onto itself"
            )

    @property
    def period(self) -> int:
        return 2 * self.W

    def canonicalize(self, v: Vertex) -> Vertex:
        return Vertex(v.x % self.period, v.y)

    def canonicalize_edge(self, e: Edge) -> Edge:
        return Edge(self.canonicalize(e.tail), e.dir)

    def contains(self, v: Vertex) -> bool:
        return 0 <= v.y <= self.M and v.is_valid()

    def rel_x(self, v: Vertex, base: Vertex) -> int:
        """Horizontal displacement from base to v, lifted to (-W, W]."""
        dx = (v.x - base.x) % self.period
        if dx > self.W:
            dx -= self.period
        return dx

    def column_of(self, v: Vertex) -> int:
        """Column index 0..W-1 of a canonical vertex within its level."""
        return (v.x % self.period) >> 1

    def vertex_at(self, level: int, column: int) -> Vertex:
        return Vertex((level & 1) + 2 * column, level)

    def level_vertices(self, level: int) -> list[Vertex]:
        if not 0 <= level <= self.M:
            raise ValueError(f"level {level} outside window (0..{self.M})")
        return [self.vertex_at(level, j) for j in range(self.W)]

    def boundary(self) -> list[Vertex]:
        return self.level_vertices(0)


def in_cone(base: Vertex, v: Vertex, window: Window | None = None) -> bool:
    """True if v lies in the light cone opening upward from base.

    With a window, the horizontal displacement is first lifted to the
    representative nearest base.
    """
    dy = v.y - base.y
    if dy < 0:
        return False
    dx = window.rel_x(v, base) if window is not None else v.x - base.x
    return abs(dx) <= dy


def out_edges(v: Vertex) -> tuple[Edge, Edge]:
    return Edge(v, Dir.LEFT), Edge(v, Dir.RIGHT)


def in_edges(v: Vertex, window: Window | None = None) -> tuple[Edge, Edge]:
    """The two edges whose head is v, tails one level down."""
    if v.y < 1:
        raise ValueError(f"vertex {v} has no incoming edges")
    left_tail = Vertex(v.x + 1, v.y - 1)  # arrives by a LEFT step
    right_tail = Vertex(v.x - 1, v.y - 1)
    if window is not None:
        left_tail = window.canonicalize(left_tail)
        right_tail = window.canonicalize(right_tail)
    return Edge(right_tail, Dir.RIGHT), Edge(left_tail, Dir.LEFT)


def iter_edges(window: Window) -> Iterator[Edge]:
    """All canonical edges of the window, by (level, tail x, direction)."""
    for y in range(window.M):
        for v in window.level_vertices(y):
            yield Edge(v, Dir.LEFT)
            yield Edge(v, Dir.RIGHT)


def vertex_str(v: Vertex) -> str:
    return f"{v.x},{v.y}"


def parse_vertex(s: str) -> Vertex:
    try:
        xs, ys = s.split(",")
        v = Vertex(int(xs), int(ys))
    except ValueError as exc:
        raise ValueError(f"expected 'x,y', got {s!r}") from exc
    if not v.is_valid():
        raise ValueError(f"{s!r} is not a lattice vertex (need x+y even, y >= 0)")
    return v


def edge_str(e: Edge) -> str:
    return f"{e.tail.x},{e.tail.y},{e.dir.letter}"


def parse_edge(s: str) -> Edge:
    try:
        xs, ys, ds = s.split(",")
    except ValueError as exc:
        raise ValueError(f"expected 'x,y,L|R', got {s!r}") from exc
    return Edge(parse_vertex(f"{xs},{ys}"), Dir.from_letter(ds))
