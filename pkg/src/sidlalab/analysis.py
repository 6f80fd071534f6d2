"""Exact and statistical verification tools.

Two families of checks live here.  The exact family works on finite
monotone trees in integer and dyadic-rational arithmetic: the outer-shell
weight identity (the level-i outer boundary counts, weighted ``2**-i``,
always sum to exactly 1), an exhaustive enumerator of small monotone
trees, and lattice geometry for flank vertices and their triangle.  The
statistical family summarizes simulation samples: tree heights with
censoring, slice profiles, the flank distance tail bound, survival curves
with binomial confidence bands, and the generic KS and chi-square tests
used to compare the particle picture with the weight picture.

Everything here is a pure function of its inputs; nothing draws random
numbers.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

import numpy as np
from scipy.special import kolmogorov
from scipy.stats import chi2 as chi2_dist

from .fpp import tree_edges
from .lattice import Dir, Edge, Vertex, head

ENUMERATION_GUARD = 12

_Z_99_ONE_SIDED = 2.3263478740408408
_Z_95_TWO_SIDED = 1.959963984540054


class Censored:
    """Sentinel for heights only bounded below by the cap."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "CENSORED"


CENSORED = Censored()


@dataclass(frozen=True)
class MonotoneTree:
    """A finite tree rooted on the boundary, every edge climbing one level."""

    root: Vertex
    edges: frozenset[Edge]
    censored: bool = False

    def vertices(self) -> set[Vertex]:
        verts = {self.root}
        verts.update(head(e) for e in self.edges)
        return verts

    def level_counts(self) -> Counter:
        counts: Counter = Counter()
        for v in self.vertices():
            counts[v.y] += 1
        return counts

    def height(self) -> int:
        return max(v.y for v in self.vertices())


def is_monotone_tree(root: Vertex, edges: Iterable[Edge]) -> bool:
    """Check the unique-incoming-edge tree property over the edge set."""
    edges = list(edges)
    heads = [head(e) for e in edges]
    if len(set(heads)) != len(heads):
        return False
    if root in heads:
        return False
    verts = {root} | set(heads)
    return all(e.tail in verts for e in edges)


def extract_tree(forest_like, root) -> MonotoneTree:
    """Lift one root's tree out of a forest or covered particle state.

    Vertices are unwrapped into plane coordinates by following parent
    chains upward from the root, so a tree crossing the cyclic seam still
    comes out connected; the root keeps its canonical x.
    """
    x = root.x if isinstance(root, Vertex) else int(root)
    win = forest_like.window
    x0 = x % win.period
    labels = forest_like.root_x
    unwrapped: dict[Vertex, int] = {win.canonicalize(Vertex(x0, 0)): x0}
    edges = []
    for m in range(1, win.M + 1):
        for j in np.nonzero(labels[m] == x0)[0]:
            v = win.vertex_at(m, int(j))
            d = Dir(int(forest_like.parent_dir[m, j]))
            tail = win.canonicalize(Vertex(v.x - d.dx, m - 1))
            xu = unwrapped[tail] + d.dx
            unwrapped[v] = xu
            edges.append(Edge(Vertex(xu - d.dx, m - 1), d))
    censored = bool(np.any(labels[win.M] == x0))
    return MonotoneTree(Vertex(x0, 0), frozenset(edges), censored)


def tree_height(tree: MonotoneTree):
    """Max level of a tree vertex, or CENSORED if the tree touched the cap."""
    if tree.censored:
        return CENSORED
    return tree.height()


def level_profile(obj, root, m: int) -> int:
    """Size of the root's level-m slice, |T^m(root)|.

    Accepts a MonotoneTree or any forest-shaped object with root labels.
    """
    if m < 0:
        raise ValueError(f"level must be nonnegative, got {m}")
    if isinstance(obj, MonotoneTree):
        return sum(1 for v in obj.vertices() if v.y == m)
    win = obj.window
    if m > win.M:
        raise ValueError(f"level {m} above cap {win.M}")
    x = root.x if isinstance(root, Vertex) else int(root)
    return int(np.count_nonzero(obj.root_x[m] == x))


# ---------------------------------------------------------------------------
# Outer shells and the exact weight identity


@dataclass(frozen=True)
class ShellProfile:
    """Counts of outer-boundary edges per level: edges whose tail is a tree
    vertex but which are not themselves tree edges (the head may or may
    not belong to the tree)."""

    counts: Mapping[int, int]

    def weighted_sum(self) -> Fraction:
        return sum(
            (Fraction(c, 2 ** i) for i, c in self.counts.items()), Fraction(0)
        )


def shell_profile(tree: MonotoneTree) -> ShellProfile:
    counts: Counter = Counter()
    for v in tree.vertices():
        for d in (Dir.LEFT, Dir.RIGHT):
            if Edge(v, d) not in tree.edges:
                counts[v.y + 1] += 1
    return ShellProfile(dict(counts))


def shell_identity_check(tree: MonotoneTree) -> bool:
    """Exact dyadic test of the shell identity; no floating point."""
    return shell_profile(tree).weighted_sum() == Fraction(1)


def enumerate_monotone_trees(
    max_edges: int, root: Vertex = Vertex(0, 0)
) -> Iterator[MonotoneTree]:
    """Yield every monotone tree at the root with at most max_edges edges.

    Edges are added in increasing (level, tail x, direction) order; a
    parent edge always sorts before the edges it enables, so every tree is
    produced from exactly one addition sequence and each prefix along the
    way is itself a valid tree.
    """
    if max_edges > ENUMERATION_GUARD:
        raise ValueError(
            f"max_edges {max_edges} exceeds the enumeration guard "
            f"{ENUMERATION_GUARD}"
        )
    if max_edges < 0:
        raise ValueError(f"max_edges must be nonnegative, got {max_edges}")

    def key(e: Edge) -> tuple[int, int, int]:
        return (e.tail.y, e.tail.x, int(e.dir))

    def grow(edges: list[Edge], verts: set[Vertex], last_key):
        yield MonotoneTree(root, frozenset(edges))
        if len(edges) == max_edges:
            return
        cands = sorted(
            (
                Edge(v, d)
                for v in verts
                for d in (Dir.LEFT, Dir.RIGHT)
                if head(Edge(v, d)) not in verts
            ),
            key=key,
        )
        for e in cands:
            if last_key is not None and key(e) <= last_key:
                continue
            a = head(e)
            edges.append(e)
            verts.add(a)
            yield from grow(edges, verts, key(e))
            edges.pop()
            verts.remove(a)

    yield from grow([], {root}, None)


# ---------------------------------------------------------------------------
# Slimness, flanks and the triangle


@dataclass(frozen=True)
class SlimParams:
    """Width threshold for slim levels; delta and beta_hat record the
    convention D = 1/(beta * delta) without being enforced."""

    D: float
    delta: float = 0.5
    beta_hat: float = 0.0

    def __post_init__(self) -> None:
        if not self.D > 0:
            raise ValueError(f"slim threshold D must be positive, got {self.D}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0,1), got {self.delta}")


def slim_levels(tree: MonotoneTree, params: SlimParams) -> list[int]:
    """Levels n up to the height where the slice size is strictly between
    0 and D."""
    counts = tree.level_counts()
    h = tree.height()
    return [n for n in range(1, h + 1) if 0 < counts.get(n, 0) < params.D]


def _triangle_lattice_points(a: Vertex, b: Vertex, c: Vertex) -> frozenset[Vertex]:
    """Lattice vertices (x+y even) inside the closed triangle abc, by exact
    integer cross products."""

    def cross(o: Vertex, p: Vertex, q: Vertex) -> int:
        return (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x)

    orient = cross(a, b, c)
    if orient == 0:
        raise ValueError(f"degenerate triangle {a}, {b}, {c}")
    if orient < 0:
        b, c = c, b
    points = []
    xs = (a.x, b.x, c.x)
    ys = (a.y, b.y, c.y)
    for y in range(min(ys), max(ys) + 1):
        for x in range(min(xs), max(xs) + 1):
            if (x + y) % 2 != 0:
                continue
            p = Vertex(x, y)
            if (
                cross(a, b, p) >= 0
                and cross(b, c, p) >= 0
                and cross(c, a, p) >= 0
            ):
                points.append(p)
    return frozenset(points)


@dataclass(frozen=True)
class FlankInfo:
    """The two vertices flanking a level slice, their distances, and the
    triangle spanned per the verbatim hull definition.

    Coordinates are unwrapped relative to the root (the left flank can
    have negative x); the triangle may fail to contain non-contiguous
    slices above the base level, which is reported, not repaired.
    """

    n: int
    l_n: Vertex
    r_n: Vertex
    left_dist: float
    right_dist: float
    M_n: float
    slice_size: int
    triangle: frozenset[Vertex]


def flanks(forest_like, root, n: int) -> FlankInfo:
    """Locate the flanking vertices of the root's level-n slice.

    Distances are read off the forest values (passage time, or occupancy
    time for a replayed state).  The window must be wide enough for the
    slice plus flanks to fit without wrapping.
    """
    win = forest_like.window
    x0 = root.x if isinstance(root, Vertex) else int(root)
    if not 1 <= n <= win.M:
        raise ValueError(f"level {n} outside 1..{win.M}")
    cols = np.nonzero(forest_like.root_x[n] == x0)[0]
    if len(cols) == 0:
        raise ValueError(f"tree of root {x0} has an empty level-{n} slice")
    xs = (n & 1) + 2 * cols
    dxs = (xs - x0) % win.period
    dxs = np.where(dxs > win.W, dxs - win.period, dxs)
    dx_min, dx_max = int(dxs.min()), int(dxs.max())
    if (dx_max + 2) - (dx_min - 2) >= win.period:
        raise ValueError(
            f"flanks of the level-{n} slice wrap around the window (W={win.W})"
        )
    l_n = Vertex(x0 + dx_min - 2, n)
    r_n = Vertex(x0 + dx_max + 2, n)
    values = forest_like.node_values
    left_dist = float(values[n, win.column_of(win.canonicalize(l_n))])
    right_dist = float(values[n, win.column_of(win.canonicalize(r_n))])
    k = int(len(cols))
    apex = Vertex(l_n.x + (k + 1), l_n.y + (k + 1))
    triangle = _triangle_lattice_points(l_n, r_n, apex)
    return FlankInfo(
        n=n,
        l_n=l_n,
        r_n=r_n,
        left_dist=left_dist,
        right_dist=right_dist,
        M_n=max(left_dist, right_dist),
        slice_size=k,
        triangle=triangle,
    )


def flank_left_distances(forest_like, n: int) -> np.ndarray:
    """Left-flank distances of every root with a nonempty level-n slice.

    Pools the per-tree samples used by the tail bound; ordering follows
    ascending root x, so the output is deterministic."""
    win = forest_like.window
    if not 1 <= n <= win.M:
        raise ValueError(f"level {n} outside 1..{win.M}")
    row = forest_like.root_x[n]
    values = forest_like.node_values
    out = []
    for x0 in np.unique(row):
        if x0 < 0:
            continue
        cols = np.nonzero(row == x0)[0]
        xs = (n & 1) + 2 * cols
        dxs = (xs - int(x0)) % win.period
        dxs = np.where(dxs > win.W, dxs - win.period, dxs)
        lx = int(x0) + int(dxs.min()) - 2
        col = win.column_of(win.canonicalize(Vertex(lx, n)))
        out.append(float(values[n, col]))
    return np.asarray(out, dtype=np.float64)


def cone_check(forest_like, root) -> bool:
    """Every vertex of the root's tree lies in the upward cone of the root
    and no slice exceeds the cone width m+1."""
    win = forest_like.window
    x0 = root.x if isinstance(root, Vertex) else int(root)
    for m in range(1, win.M + 1):
        cols = np.nonzero(forest_like.root_x[m] == x0)[0]
        if len(cols) == 0:
            continue
        if len(cols) > m + 1:
            return False
        xs = (m & 1) + 2 * cols
        dxs = (xs - x0) % win.period
        dxs = np.where(dxs > win.W, dxs - win.period, dxs)
        if np.any(np.abs(dxs) > m):
            return False
    return True


def first_empty_level(forest_like, root) -> int | None:
    """Smallest level 1..M where the root's slice is empty, None if the
    tree occupies every level up to the cap."""
    win = forest_like.window
    x0 = root.x if isinstance(root, Vertex) else int(root)
    for m in range(1, win.M + 1):
        if not np.any(forest_like.root_x[m] == x0):
            return m
    return None


# ---------------------------------------------------------------------------
# Binomial confidence helpers


def wilson_interval(successes: int, n: int, z: float) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("need at least one sample")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    # rounding can push an endpoint one ulp past the point estimate
    return max(0.0, min(center - half, p)), min(1.0, max(center + half, p))


def wilson_upper_99(successes: int, n: int) -> float:
    return wilson_interval(successes, n, _Z_99_ONE_SIDED)[1]


@dataclass(frozen=True)
class FlankBoundReport:
    """Tail-frequency check of flank distances against the 1/kappa bound."""

    n: int
    kappa: float
    n_samples: int
    threshold: float
    n_exceed: int
    frequency: float
    upper99: float
    bound: float
    passed: bool

    def line(self) -> str:
        return (
            f"flank n={self.n} kappa={format(self.kappa, 'g')} "
            f"freq={self.frequency:.4f} upper99={self.upper99:.4f} "
            f"bound={self.bound:.4f} "
            f"{'pass' if self.passed else 'FAIL'}"
        )


def flank_bound_test(samples, n: int, kappa: float) -> FlankBoundReport:
    """Empirical frequency of flank distances exceeding kappa * 2**(n+1),
    with a 99% upper confidence bound; passes iff that bound stays within
    1/kappa plus slack."""
    if not kappa > 1.0:
        raise ValueError(f"kappa must exceed 1, got {kappa}")
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size < 100:
        raise ValueError(f"need >= 100 samples, got {arr.size}")
    threshold = kappa * math.ldexp(1.0, n + 1)
    n_exceed = int(np.count_nonzero(arr > threshold))
    freq = n_exceed / arr.size
    upper = wilson_upper_99(n_exceed, arr.size)
    bound = 1.0 / kappa
    return FlankBoundReport(
        n=n,
        kappa=float(kappa),
        n_samples=int(arr.size),
        threshold=float(threshold),
        n_exceed=n_exceed,
        frequency=float(freq),
        upper99=float(upper),
        bound=bound,
        passed=bool(upper <= bound + 0.05),
    )


# ---------------------------------------------------------------------------
# Coverage, heights, survival


def coverage_partition_check(forest_like, window: Window) -> bool:
    """Every level 1..M is fully claimed and each claim is a legal root,
    so the slice sizes of the trees partition each level into W vertices."""
    labels = forest_like.root_x
    if labels.shape != (window.M + 1, window.W):
        return False
    for m in range(1, window.M + 1):
        row = labels[m]
        if not np.all((row >= 0) & (row < window.period) & (row % 2 == 0)):
            return False
        total = 0
        for x in np.unique(row):
            total += int(np.count_nonzero(row == x))
        if total != window.W:
            return False
    return True


def root_heights(forest_like) -> tuple[np.ndarray, np.ndarray]:
    """Per-root tree heights and censoring flags, vectorized per level.

    Returns (heights, censored), both indexed by boundary column; censored
    roots own a vertex at the cap, so their height equals M as a lower
    bound."""
    win = forest_like.window
    W, M = win.W, win.M
    heights = np.zeros(W, dtype=np.int64)
    for m in range(1, M + 1):
        cols = np.unique(forest_like.root_x[m] >> 1)
        heights[cols] = m
    censored = np.zeros(W, dtype=bool)
    censored[np.unique(forest_like.root_x[M] >> 1)] = True
    return heights, censored


def truncated_mean_height(forest_like) -> float:
    """Mean over roots of min(height, M); censored trees count as M."""
    heights, _ = root_heights(forest_like)
    return float(heights.mean())


@dataclass(frozen=True)
class SurvivalPoint:
    level: int
    n_samples: int
    probability: float
    ci_low: float
    ci_high: float


def tail_height_estimate(heights, levels) -> dict[int, SurvivalPoint]:
    """Empirical survival P(height >= n) with 95% binomial bands.

    Censored heights must come in already mapped to the cap value, which
    keeps them counted as at-least-cap for every level up to the cap."""
    arr = np.asarray(heights, dtype=np.int64)
    if arr.size == 0:
        raise ValueError("no height samples")
    out: dict[int, SurvivalPoint] = {}
    for n in levels:
        k = int(np.count_nonzero(arr >= n))
        lo, hi = wilson_interval(k, arr.size, _Z_95_TWO_SIDED)
        out[n] = SurvivalPoint(
            level=int(n),
            n_samples=int(arr.size),
            probability=k / arr.size,
            ci_low=lo,
            ci_high=hi,
        )
    return out


# ---------------------------------------------------------------------------
# Generic tests


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n_samples: int


def ks_test_exp1(sample) -> KsResult:
    """One-sample KS against the unit-rate exponential CDF with the
    standard asymptotic p-value."""
    arr = np.sort(np.asarray(sample, dtype=np.float64))
    n = arr.size
    if n < 10:
        raise ValueError(f"need >= 10 samples, got {n}")
    if arr[0] <= 0.0:
        raise ValueError("sample contains nonpositive values")
    cdf = -np.expm1(-arr)
    i = np.arange(1, n + 1, dtype=np.float64)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1.0) / n)
    d = max(float(d_plus), float(d_minus))
    p = float(kolmogorov(math.sqrt(n) * d))
    return KsResult(statistic=d, p_value=p, n_samples=int(n))


@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    p_value: float
    dof: int
    n_bins: int


def _align_histograms(hist_a, hist_b) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(hist_a, Mapping) and isinstance(hist_b, Mapping):
        keys = sorted(set(hist_a) | set(hist_b))
        a = np.array([hist_a.get(k, 0) for k in keys], dtype=np.float64)
        b = np.array([hist_b.get(k, 0) for k in keys], dtype=np.float64)
        return a, b
    a = np.asarray(hist_a, dtype=np.float64)
    b = np.asarray(hist_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(
            f"bin mismatch: shapes {a.shape} vs {b.shape}; "
            f"pass aligned sequences or label->count mappings"
        )
    return a, b


def chi_square_compare(hist_a, hist_b) -> Chi2Result:
    """Two-sample chi-square on a 2 x k contingency table.

    Adjacent-style pooling: while some expected count drops below 5, the
    smallest-expectation bin is merged into a neighbor.  Identical
    histograms give statistic 0 and p = 1.
    """
    a, b = _align_histograms(hist_a, hist_b)
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    if a.size == 0 or a.sum() == 0 or b.sum() == 0:
        raise ValueError("chi-square needs two nonempty histograms")
    total = a.sum() + b.sum()

    def expected(av: np.ndarray, bv: np.ndarray) -> np.ndarray:
        col = av + bv
        return np.minimum(av.sum() * col / total, bv.sum() * col / total)

    a = list(a)
    b = list(b)
    while len(a) > 1:
        exp = expected(np.asarray(a), np.asarray(b))
        if exp.min() >= 5.0:
            break
        i = int(np.argmin(exp))
        va, vb = a.pop(i), b.pop(i)
        # after the pop, the right neighbor (if any) sits at index i
        t = i if i < len(a) else i - 1
        a[t] += va
        b[t] += vb
    av = np.asarray(a)
    bv = np.asarray(b)
    if expected(av, bv).min() < 5.0:
        raise ValueError(
            "expected counts below 5 even after pooling; samples too small"
        )
    if len(av) == 1:
        return Chi2Result(statistic=0.0, p_value=1.0, dof=0, n_bins=1)
    col = av + bv
    ea = av.sum() * col / total
    eb = bv.sum() * col / total
    stat = float(np.sum((av - ea) ** 2 / ea) + np.sum((bv - eb) ** 2 / eb))
    dof = len(av) - 1
    p = float(chi2_dist.sf(stat, dof))
    return Chi2Result(statistic=stat, p_value=p, dof=dof, n_bins=len(av))


def histogram(values) -> dict[int, int]:
    """Counter of integer-valued samples as a plain dict."""
    return dict(Counter(int(v) for v in values))
