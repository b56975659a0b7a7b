"""
Carpet rasterization and the approximate chemical distance for CarpetLab

d_eps(z, w) is computed as the minimal number of eps-boxes a carpet path must
visit, times eps^2. A box is split into its 4-connected carpet pieces so a path
can never cross a loop interior that merely touches a box.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial import cKDTree
from sklearn.neighbors import KDTree

from .exceptions import AcceptanceError, ConfigError, DisconnectedError, SnapError
from .geometry import Grid, arclength_points, rasterize_interior, resample_polyline
from .soup import FOUR_CONNECTED, trace_outer_contour

EXTERIOR = 0
HOLE = 128
CARPET = 255

# Len_eps of a connected set lies within [C_LOW, C_HIGH] * eps^2 * (box count)
C_LOW = 1.0 / 18.0
C_HIGH = 9.0 * math.pi


@dataclass(eq=False)
class CarpetMask:
    """Immutable n x n classification raster; row index is y, column index is x"""

    n: int
    h: float
    x0: float
    y0: float
    cells: np.ndarray
    boundary_cells: np.ndarray = field(default=None)

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.uint8)
        self.cells.setflags(write=False)
        if self.boundary_cells is None:
            self.boundary_cells = find_boundary_cells(self.cells)

    @classmethod
    def from_cells(cls, cells, h, x0=0.0, y0=0.0):
        cells = np.asarray(cells, dtype=np.uint8)
        return cls(n=cells.shape[0], h=float(h), x0=float(x0), y0=float(y0), cells=cells)

    @property
    def grid(self):
        return Grid(self.x0, self.y0, self.h, self.n)

    @property
    def bbox(self):
        return self.grid.bbox

    @property
    def carpet(self):
        return self.cells == CARPET

    @property
    def interior(self):
        return self.cells != EXTERIOR

    @property
    def carpet_fraction(self):
        interior = int(self.interior.sum())
        return float(self.carpet.sum()) / interior if interior else 0.0

    @cached_property
    def carpet_index(self):
        return np.argwhere(self.carpet)

    @cached_property
    def carpet_tree(self):
        return KDTree(self.cell_centers(self.carpet_index))

    def cell_centers(self, index):
        index = np.atleast_2d(index)
        return np.column_stack([
            self.x0 + (index[:, 1] + 0.5) * self.h,
            self.y0 + (index[:, 0] + 0.5) * self.h,
        ])

    def nearest_carpet(self, point):
        """Center of the carpet cell nearest to point"""
        if len(self.carpet_index) == 0:
            raise SnapError("Mask has no carpet cells")
        _, idx = self.carpet_tree.query(np.atleast_2d(np.asarray(point, dtype=float)), k=1)
        return tuple(self.cell_centers(self.carpet_index[idx[0, 0]])[0])

    def snap(self, point, eps):
        """
        Nearest carpet cell to a point

        Raises:
            SnapError: If no carpet cell center lies within eps
        """
        if len(self.carpet_index) == 0:
            raise SnapError("Mask has no carpet cells")
        dist, idx = self.carpet_tree.query(np.atleast_2d(np.asarray(point, dtype=float)), k=1)
        if dist[0, 0] > eps:
            raise SnapError(f"No carpet cell within eps={eps} of {tuple(point)}")
        row, col = self.carpet_index[idx[0, 0]]
        return int(row), int(col)


def find_boundary_cells(cells):
    """Carpet cells 4-adjacent to exterior cells or to the raster edge"""
    carpet = cells == CARPET
    outside = np.pad(cells == EXTERIOR, 1, constant_values=True)
    touching = ndimage.binary_dilation(outside, structure=FOUR_CONNECTED)[1:-1, 1:-1]
    return np.argwhere(carpet & touching)


def rasterize_carpet(ensemble, n):
    """
    Classify raster cells as carpet, hole or exterior

    Args:
        ensemble (LoopEnsemble): Ensemble with a domain loop
        n (int): Grid side in cells (at least 256)

    Returns:
        CarpetMask: Classification over the domain loop's bounding square
    """
    if n < 256:
        raise ConfigError(f"Carpet grid must be at least 256 cells, got {n}")
    domain = ensemble.require_domain()
    grid = Grid.covering(domain.bbox, n, pad_cells=0)
    rs, cs, interior_window = rasterize_interior(domain, grid)
    interior = np.zeros((n, n), dtype=bool)
    interior[rs, cs] = interior_window
    hole = np.zeros((n, n), dtype=bool)
    for loop in ensemble.cle_loops:
        lr, lc, inside = rasterize_interior(loop, grid)
        hole[lr, lc] |= inside
    hole &= interior
    cells = np.full((n, n), EXTERIOR, dtype=np.uint8)
    cells[interior] = CARPET
    cells[hole] = HOLE
    return CarpetMask(n=n, h=grid.h, x0=grid.x0, y0=grid.y0, cells=cells)


# =====================================================
# Box graph
# =====================================================

@dataclass
class PathCost:
    eps: float
    boxes: int
    area_estimate: float
    exact_area: float | None = None
    pieces: list = field(default_factory=list, repr=False)


def box_indices(n, h, eps):
    """Index of the eps-box holding each raster line; box j covers [j eps, (j + 1) eps) from the mask origin"""
    return np.floor((np.arange(n) + 0.5) * h / eps).astype(np.int64)


class BoxGraph:
    """
    Graph of 4-connected carpet pieces inside eps-boxes

    Boxes have side exactly eps and a cell belongs to the box holding its center.
    Nodes are pieces; two pieces in 4-adjacent boxes are joined when some carpet
    cell of one is 4-adjacent to a carpet cell of the other across the box border.
    """

    def __init__(self, mask, eps):
        if eps < 4.0 * mask.h - 1e-12:
            raise ConfigError(f"eps={eps} is below 4h={4.0 * mask.h:.6g}")
        self.mask = mask
        self.eps = float(eps)
        n = mask.n
        self.box_index = box_indices(n, mask.h, self.eps)
        self.nb = int(self.box_index[-1]) + 1

        # one empty line between boxes keeps labels inside a box
        pos = np.arange(n) + self.box_index
        expanded = np.zeros((pos[-1] + 1, pos[-1] + 1), dtype=bool)
        expanded[np.ix_(pos, pos)] = mask.carpet
        labels, count = ndimage.label(expanded, structure=FOUR_CONNECTED)
        self.piece = labels[np.ix_(pos, pos)].astype(np.int64) - 1
        self.count = int(count)

        rows, cols = np.nonzero(self.piece >= 0)
        ids = self.piece[rows, cols]
        self.piece_box = np.zeros(self.count, dtype=np.int64)
        self.piece_box[ids] = self.box_index[rows] * self.nb + self.box_index[cols]
        sizes = np.bincount(ids, minlength=self.count).astype(float)
        self.piece_centroid = np.column_stack([
            mask.x0 + (np.bincount(ids, weights=cols, minlength=self.count) / sizes + 0.5) * mask.h,
            mask.y0 + (np.bincount(ids, weights=rows, minlength=self.count) / sizes + 0.5) * mask.h,
        ]) if self.count else np.zeros((0, 2))

        first, second = [], []
        border = np.flatnonzero(np.diff(self.box_index))
        for a, b in ((self.piece[:, border], self.piece[:, border + 1]),
                     (self.piece[border, :], self.piece[border + 1, :])):
            ok = (a >= 0) & (b >= 0)
            first.append(a[ok])
            second.append(b[ok])
        first = np.concatenate(first)
        second = np.concatenate(second)
        data = np.ones(len(first))
        adjacency = coo_matrix((data, (first, second)), shape=(self.count, self.count)).tocsr()
        adjacency.data[:] = 1.0
        self.adjacency = adjacency

    def piece_of(self, cell):
        return int(self.piece[cell])

    def hops_from(self, sources, predecessors=False):
        """Unweighted BFS hop counts from source pieces (inf where unreachable)"""
        return shortest_path(
            self.adjacency, method='D', directed=False, unweighted=True,
            indices=np.atleast_1d(sources), return_predecessors=predecessors,
        )

    def box_field(self, hops):
        """Minimum over pieces of each box of hops + 1; -1 for unreachable or empty boxes"""
        out = np.full(self.nb * self.nb, np.inf)
        np.minimum.at(out, self.piece_box, hops + 1.0)
        out = np.where(np.isfinite(out), out, -1).astype(np.int64)
        return out.reshape(self.nb, self.nb)


def box_graph(mask, eps):
    return BoxGraph(mask, eps)


def _path_pieces(predecessors, target):
    path = [int(target)]
    while predecessors[path[-1]] >= 0:
        path.append(int(predecessors[path[-1]]))
    return path[::-1]


def chem_dist(mask, eps, z, w, refine=False, graph=None):
    """
    Approximate chemical distance d_eps(z, w) as box count times eps^2

    Args:
        mask (CarpetMask): Carpet raster
        eps (float): Box side (at least 4h)
        z, w (tuple): Query points, snapped to carpet cells within eps
        refine (bool): Also compute Len_eps of the realized path
        graph (BoxGraph): Optional prebuilt graph for (mask, eps)

    Returns:
        PathCost: Box count, area estimate and optional exact area

    Raises:
        SnapError: If a point has no carpet cell within eps
        DisconnectedError: If no carpet path joins z and w
    """
    graph = graph if graph is not None else BoxGraph(mask, eps)
    pz = graph.piece_of(mask.snap(z, eps))
    pw = graph.piece_of(mask.snap(w, eps))
    if pz == pw:
        pieces = [pz]
    else:
        hops, pred = graph.hops_from(pz, predecessors=True)
        hops, pred = hops[0], pred[0]
        if not np.isfinite(hops[pw]):
            raise DisconnectedError(f"No carpet path joins {tuple(z)} and {tuple(w)}")
        pieces = _path_pieces(pred, pw)
    boxes = len(pieces)
    cost = PathCost(eps=graph.eps, boxes=boxes, area_estimate=boxes * graph.eps ** 2, pieces=pieces)
    if refine:
        cost.exact_area = refine_path_area(graph, pieces)
    return cost


def refine_path_area(graph, pieces):
    """
    Len_eps of the polyline through the centroids of a realized piece path

    The covering bounds are checked on every call:
    pi eps^2 l <= Len_eps <= 9 pi eps^2 l for the greedy disjoint-disk count l, and
    C_LOW * area_estimate <= Len_eps <= C_HIGH * area_estimate.
    """
    eps = graph.eps
    resolution = min(graph.mask.h, eps / 8.0)
    points = graph.piece_centroid[pieces]
    exact = len_eps_exact(points, eps, resolution)
    dense = resample_polyline(points, resolution)
    ell = vitali_count(dense, eps)
    slack = 1.0 + 4.0 * resolution / eps
    if not math.pi * eps ** 2 * ell <= exact * slack or not exact <= 9.0 * math.pi * eps ** 2 * ell * slack:
        raise AcceptanceError(f"Covering sandwich violated: l={ell}, Len={exact:.6g}, eps={eps}")
    estimate = len(pieces) * eps ** 2
    if not C_LOW * estimate <= exact * slack or not exact <= C_HIGH * estimate * slack:
        raise AcceptanceError(f"Box comparability violated: boxes={len(pieces)}, Len={exact:.6g}")
    return exact


def distance_field(mask, eps, source, graph=None):
    """
    Single-source box distances to every eps-box

    Args:
        mask (CarpetMask): Carpet raster
        eps (float): Box side
        source (tuple): Source point (snapped like chem_dist)
        graph (BoxGraph): Optional prebuilt graph

    Returns:
        DistanceField: Per-box counts (source box = 1, -1 unreachable) and per-cell values
    """
    graph = graph if graph is not None else BoxGraph(mask, eps)
    source_piece = graph.piece_of(mask.snap(source, eps))
    hops = graph.hops_from(source_piece)[0]
    cell_values = np.full((mask.n, mask.n), -1, dtype=np.int64)
    carpet = graph.piece >= 0
    piece_values = np.where(np.isfinite(hops), hops + 1.0, -1.0).astype(np.int64)
    cell_values[carpet] = piece_values[graph.piece[carpet]]
    return DistanceField(eps=graph.eps, box_index=graph.box_index, boxes=graph.box_field(hops), cells=cell_values)


@dataclass
class DistanceField:
    eps: float
    box_index: np.ndarray
    boxes: np.ndarray
    cells: np.ndarray

    def at(self, mask, point):
        """Box distance at the box containing point"""
        row, col = mask.grid.cell_of(point)
        return int(self.boxes[self.box_index[row], self.box_index[col]])


# =====================================================
# Exact neighborhood area
# =====================================================

def len_eps_exact(path, eps, resolution, chunk=250_000):
    """
    Area of the eps-neighborhood of a polyline by fine-grid occupancy counting

    Lattice cells are anchored at multiples of `resolution`, so the count is
    monotone in eps for a fixed path and resolution.

    Args:
        path (array): (k, 2) vertices (a single point is allowed)
        eps (float): Neighborhood radius
        resolution (float): Lattice spacing, at most eps / 8

    Returns:
        float: Area estimate
    """
    if resolution > eps / 8.0 + 1e-15:
        raise ConfigError(f"resolution {resolution} exceeds eps/8 = {eps / 8.0}")
    samples = resample_polyline(path, resolution)
    tree = cKDTree(samples)
    lo = np.floor((samples.min(axis=0) - eps) / resolution).astype(np.int64)
    hi = np.ceil((samples.max(axis=0) + eps) / resolution).astype(np.int64)
    xs = (np.arange(lo[0], hi[0]) + 0.5) * resolution
    ys = (np.arange(lo[1], hi[1]) + 0.5) * resolution
    rows_per_chunk = max(1, chunk // max(len(xs), 1))
    covered = 0
    for start in range(0, len(ys), rows_per_chunk):
        gx, gy = np.meshgrid(xs, ys[start:start + rows_per_chunk])
        dist, _ = tree.query(np.column_stack([gx.ravel(), gy.ravel()]), k=1, distance_upper_bound=eps * (1 + 1e-12))
        covered += int(np.count_nonzero(dist <= eps))
    return covered * resolution ** 2


def vitali_count(points, eps):
    """Size of a greedy maximal subset of points with pairwise distances > 2 eps"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    tree = cKDTree(points)
    covered = np.zeros(len(points), dtype=bool)
    count = 0
    for i in range(len(points)):
        if covered[i]:
            continue
        count += 1
        covered[tree.query_ball_point(points[i], 2.0 * eps)] = True
    return count


# =====================================================
# Boundary diameter
# =====================================================

def boundary_net(mask, net_count):
    """
    Boundary cells spread uniformly along the traced outer contour of the domain

    Returns:
        numpy.ndarray: (m, 2) distinct (row, col) boundary cells, m <= net_count
    """
    if net_count < 16:
        raise ConfigError(f"net_count must be at least 16, got {net_count}")
    if len(mask.boundary_cells) == 0:
        raise DisconnectedError("Mask has no boundary cells")
    full = slice(0, mask.n)
    contour = trace_outer_contour(mask.interior, mask.grid, full, full)
    targets = arclength_points(contour, net_count)
    tree = KDTree(mask.cell_centers(mask.boundary_cells))
    _, idx = tree.query(targets, k=1)
    chosen = []
    for i in idx[:, 0]:
        if i not in chosen:
            chosen.append(int(i))
    return mask.boundary_cells[chosen]


def net_diameter(graph, cells, details=False):
    """
    Max over pairs of net cells of the box distance (in boxes)

    Pairs in different carpet components are skipped; if no two distinct pieces of
    the net are connected the net is unreachable.
    """
    pieces = np.unique([graph.piece_of(tuple(c)) for c in cells])
    if len(pieces) == 1:
        best, disconnected = 1, 0
    else:
        hops = graph.hops_from(pieces)[:, pieces]
        off = ~np.eye(len(pieces), dtype=bool)
        finite = np.isfinite(hops) & off
        disconnected = int(np.count_nonzero(~np.isfinite(hops) & off) // 2)
        if not finite.any():
            raise DisconnectedError("Boundary net is unreachable from itself")
        best = int(hops[finite].max()) + 1
    if details:
        return best, disconnected
    return best


def boundary_diameter(mask, eps, net_count, graph=None, details=False):
    """
    Boundary d_eps-diameter: max over boundary-net pairs of chem_dist area

    Args:
        mask (CarpetMask): Carpet raster
        eps (float): Box side
        net_count (int): Net size (at least 16)
        graph (BoxGraph): Optional prebuilt graph
        details (bool): Also return the number of disconnected net pairs

    Returns:
        float: Area (boxes * eps^2), or (area, disconnected_pairs)
    """
    graph = graph if graph is not None else BoxGraph(mask, eps)
    cells = boundary_net(mask, net_count)
    boxes, disconnected = net_diameter(graph, cells, details=True)
    area = boxes * graph.eps ** 2
    if details:
        return area, disconnected
    return area


def metric_axiom_violations(graph, triples, rng):
    """
    Count symmetry and triangle-inequality violations of the hop metric

    d(a, a) is the zero level; triples are drawn from one connected component.

    Returns:
        dict: checked triple count and violation counts
    """
    if graph.count == 0:
        return {'triples': 0, 'symmetry': 0, 'triangle': 0}
    labels = ndimage.label(graph.mask.carpet, structure=FOUR_CONNECTED)[0]
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    main = labels == int(np.argmax(sizes))
    nodes = np.unique(graph.piece[main])
    picks = rng.choice(nodes, size=(triples, 3), replace=True)
    unique = np.unique(picks)
    hops = graph.hops_from(unique)
    where = {int(p): i for i, p in enumerate(unique)}
    symmetry = triangle = 0
    for a, b, c in picks:
        dab = hops[where[int(a)], b]
        dba = hops[where[int(b)], a]
        dbc = hops[where[int(b)], c]
        dac = hops[where[int(a)], c]
        if dab != dba:
            symmetry += 1
        if dac > dab + dbc:
            triangle += 1
    return {'triples': int(triples), 'symmetry': symmetry, 'triangle': triangle}
