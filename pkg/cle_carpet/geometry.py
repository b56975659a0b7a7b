"""
Planar geometry helpers for CarpetLab
Loops, winding numbers, polygon rasterization and segment intersection
"""

from dataclasses import dataclass

import numpy as np
from matplotlib.path import Path


@dataclass(frozen=True, eq=False)
class Loop:
    """
    A closed polyline in the plane

    The last vertex connects back to the first; vertices are stored without
    repeating the first point.
    """

    vertices: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("Loop vertices must be an (k, 2) array")
        object.__setattr__(self, 'vertices', pts)

    closed = True

    @classmethod
    def from_points(cls, points):
        """
        Build a Loop, dropping a repeated closing vertex and consecutive duplicates

        Raises:
            ValueError: If fewer than 3 distinct vertices remain
        """
        pts = np.asarray(points, dtype=float)
        if len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
            pts = pts[:-1]
        if len(pts) > 1:
            keep = np.ones(len(pts), dtype=bool)
            keep[1:] = np.any(np.diff(pts, axis=0) != 0.0, axis=1)
            pts = pts[keep]
            while len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
                pts = pts[:-1]
        if len(pts) < 3:
            raise ValueError("A loop needs at least 3 distinct vertices")
        return cls(pts)

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        return isinstance(other, Loop) and np.array_equal(self.vertices, other.vertices)

    __hash__ = None

    @property
    def closed_vertices(self):
        """Vertices with the first point appended at the end"""
        return np.vstack([self.vertices, self.vertices[:1]])

    @property
    def segments(self):
        """(k, 2, 2) array of the loop's segments"""
        pts = self.closed_vertices
        return np.stack([pts[:-1], pts[1:]], axis=1)

    @property
    def bbox(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @property
    def path(self):
        return Path(self.closed_vertices, closed=True)

    def translated(self, offset):
        return Loop(self.vertices + np.asarray(offset, dtype=float))

    def perimeter(self):
        return float(np.sum(np.linalg.norm(np.diff(self.closed_vertices, axis=0), axis=1)))

    def winding_number(self, point):
        return winding_number(self.vertices, point)

    def contains(self, points):
        """Boolean mask of points strictly inside the loop (nonzero winding)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.path.contains_points(pts)


def winding_number(vertices, point):
    """
    Winding number of a closed polyline about a point

    Args:
        vertices (array): (k, 2) polyline vertices, implicitly closed
        point (tuple): Query point not on the polyline

    Returns:
        int: Signed number of turns
    """
    pts = np.asarray(vertices, dtype=float) - np.asarray(point, dtype=float)
    angles = np.arctan2(pts[:, 1], pts[:, 0])
    turns = np.diff(np.append(angles, angles[0]))
    turns = (turns + np.pi) % (2.0 * np.pi) - np.pi
    return int(np.round(turns.sum() / (2.0 * np.pi)))


@dataclass(frozen=True)
class Grid:
    """Square raster: n x n cells of side h with lower-left corner (x0, y0)"""

    x0: float
    y0: float
    h: float
    n: int

    @classmethod
    def covering(cls, bbox, n, pad_cells=1):
        """Square grid of n cells covering bbox with pad_cells of margin on each side"""
        xmin, ymin, xmax, ymax = bbox
        side = max(xmax - xmin, ymax - ymin)
        if side <= 0:
            side = 1.0
        h = side / (n - 2 * pad_cells)
        cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
        return cls(cx - 0.5 * n * h, cy - 0.5 * n * h, h, n)

    @property
    def bbox(self):
        return self.x0, self.y0, self.x0 + self.n * self.h, self.y0 + self.n * self.h

    def centers(self, rows=None, cols=None):
        """Cell-center coordinates (x, y) for the given index arrays"""
        cols = np.arange(self.n) if cols is None else np.asarray(cols)
        rows = np.arange(self.n) if rows is None else np.asarray(rows)
        return self.x0 + (cols + 0.5) * self.h, self.y0 + (rows + 0.5) * self.h

    def cell_of(self, point):
        """(row, col) of the cell containing point, clipped to the grid"""
        x, y = point
        col = int(np.clip(np.floor((x - self.x0) / self.h), 0, self.n - 1))
        row = int(np.clip(np.floor((y - self.y0) / self.h), 0, self.n - 1))
        return row, col

    def index_window(self, bbox, margin=1):
        """Row/col slices of cells whose centers may fall inside bbox"""
        xmin, ymin, xmax, ymax = bbox
        c0 = max(int(np.floor((xmin - self.x0) / self.h)) - margin, 0)
        c1 = min(int(np.ceil((xmax - self.x0) / self.h)) + margin, self.n)
        r0 = max(int(np.floor((ymin - self.y0) / self.h)) - margin, 0)
        r1 = min(int(np.ceil((ymax - self.y0) / self.h)) + margin, self.n)
        return slice(r0, max(r0, r1)), slice(c0, max(c0, c1))


def rasterize_interior(loop, grid):
    """
    Cells whose centers lie inside a loop (nonzero winding rule)

    Args:
        loop (Loop): Closed polyline
        grid (Grid): Target raster

    Returns:
        tuple: (row slice, col slice, boolean window) covering the loop's bbox
    """
    rs, cs = grid.index_window(loop.bbox)
    xs, ys = grid.centers(np.arange(rs.start, rs.stop), np.arange(cs.start, cs.stop))
    if len(xs) == 0 or len(ys) == 0:
        return rs, cs, np.zeros((rs.stop - rs.start, cs.stop - cs.start), dtype=bool)
    gx, gy = np.meshgrid(xs, ys)
    inside = loop.path.contains_points(np.column_stack([gx.ravel(), gy.ravel()]))
    return rs, cs, inside.reshape(gy.shape)


def rasterize_trace(loop, grid):
    """Cells visited by the polyline itself, sampled at half-cell spacing"""
    segs = loop.segments
    lengths = np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1)
    counts = np.maximum(np.ceil(lengths / (0.5 * grid.h)).astype(int), 1)
    ts = np.concatenate([np.arange(c) / c for c in counts])
    owners = np.repeat(np.arange(len(segs)), counts)
    pts = segs[owners, 0] + ts[:, None] * (segs[owners, 1] - segs[owners, 0])
    cols = np.floor((pts[:, 0] - grid.x0) / grid.h).astype(int)
    rows = np.floor((pts[:, 1] - grid.y0) / grid.h).astype(int)
    ok = (rows >= 0) & (rows < grid.n) & (cols >= 0) & (cols < grid.n)
    return rows[ok], cols[ok]


def segments_intersect(a0, a1, b0, b1):
    """
    Vectorized closed-segment intersection test

    Args:
        a0, a1, b0, b1 (array): (m, 2) endpoint arrays

    Returns:
        numpy.ndarray: Boolean (m,) array
    """
    def orient(p, q, r):
        return np.sign((q[:, 0] - p[:, 0]) * (r[:, 1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (r[:, 0] - p[:, 0]))

    def on_segment(p, q, r):
        return (
            (np.minimum(p[:, 0], r[:, 0]) <= q[:, 0]) & (q[:, 0] <= np.maximum(p[:, 0], r[:, 0]))
            & (np.minimum(p[:, 1], r[:, 1]) <= q[:, 1]) & (q[:, 1] <= np.maximum(p[:, 1], r[:, 1]))
        )

    o1 = orient(a0, a1, b0)
    o2 = orient(a0, a1, b1)
    o3 = orient(b0, b1, a0)
    o4 = orient(b0, b1, a1)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)
    touching = (
        ((o1 == 0) & on_segment(a0, b0, a1))
        | ((o2 == 0) & on_segment(a0, b1, a1))
        | ((o3 == 0) & on_segment(b0, a0, b1))
        | ((o4 == 0) & on_segment(b0, a1, b1))
    )
    return proper | touching


def loops_intersect(first, second):
    """Brute-force test whether two loop polylines share a point"""
    sa = first.segments
    sb = second.segments
    ia, ib = np.meshgrid(np.arange(len(sa)), np.arange(len(sb)), indexing='ij')
    ia, ib = ia.ravel(), ib.ravel()
    return bool(np.any(segments_intersect(sa[ia, 0], sa[ia, 1], sb[ib, 0], sb[ib, 1])))


def resample_polyline(points, spacing, closed=False):
    """
    Sample a polyline densely so consecutive samples are at most `spacing` apart

    Args:
        points (array): (k, 2) vertices
        spacing (float): Maximum gap between samples
        closed (bool): Whether to include the closing segment

    Returns:
        numpy.ndarray: (m, 2) samples including every vertex
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if closed:
        pts = np.vstack([pts, pts[:1]])
    if len(pts) == 1:
        return pts.copy()
    starts, ends = pts[:-1], pts[1:]
    lengths = np.linalg.norm(ends - starts, axis=1)
    counts = np.maximum(np.ceil(lengths / spacing).astype(int), 1)
    ts = np.concatenate([np.arange(c) / c for c in counts])
    owners = np.repeat(np.arange(len(starts)), counts)
    samples = starts[owners] + ts[:, None] * (ends[owners] - starts[owners])
    return np.vstack([samples, pts[-1:]])


def arclength_points(loop, count):
    """`count` points spread uniformly by arc length along a closed loop"""
    pts = loop.closed_vertices
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.arange(count) * cum[-1] / count
    x = np.interp(targets, cum, pts[:, 0])
    y = np.interp(targets, cum, pts[:, 1])
    return np.column_stack([x, y])
