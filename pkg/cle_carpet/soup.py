"""
Loop soup sampling for CarpetLab
Samples a simple CLE in a disk from the Brownian loop soup: Poissonian Brownian
loops are clustered by intersection and the outer boundaries of outermost
clusters are traced as CLE loops.
"""

from collections import defaultdict
from dataclasses import dataclass, field, replace

import contourpy
import numpy as np
from scipy import ndimage

from .config import SoupConfig
from .exceptions import ConfigError, NoDomainLoopError
from .geometry import Grid, Loop, loops_intersect, rasterize_interior, rasterize_trace, segments_intersect
from .manifest import RunManifest
from .rng import STREAM_SOUP, child_seed, make_rng

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
EIGHT_CONNECTED = ndimage.generate_binary_structure(2, 2)


@dataclass
class LoopEnsemble:
    """CLE loops of one sample plus the loop surrounding the origin"""

    cle_loops: list
    domain_loop: Loop | None
    config: SoupConfig = field(default_factory=SoupConfig)
    manifest: RunManifest | None = None
    grid: Grid | None = None
    domain_cluster: int | None = None
    attempts: int = 1
    soup_loops: list = field(default_factory=list, repr=False)

    def require_domain(self):
        if self.domain_loop is None:
            raise NoDomainLoopError("No outermost boundary surrounds the origin")
        return self.domain_loop


# =====================================================
# Brownian loops and the soup
# =====================================================

def sample_brownian_loop(root, duration, steps, rng):
    """
    Sample a planar Brownian bridge of the given duration from root back to root

    Args:
        root (tuple): Root point (x, y)
        duration (float): Loop time length t > 0
        steps (int): Number of equal time increments (at least 8)
        rng (numpy.random.Generator): Random stream

    Returns:
        Loop: Closed polyline with `steps` vertices, first vertex at root
    """
    if steps < 8:
        raise ConfigError(f"Brownian bridge needs at least 8 steps, got {steps}")
    if not duration > 0:
        raise ConfigError("Loop duration must be positive")
    bridge = _bridges(rng.standard_normal((1, steps, 2)), np.array([duration]))[0]
    return Loop(np.asarray(root, dtype=float) + bridge)


def _bridges(normals, durations):
    """Turn (m, steps, 2) standard normals into m Brownian bridges pinned at 0"""
    m, steps, _ = normals.shape
    scale = np.sqrt(durations / steps)[:, None, None]
    walk = np.cumsum(normals * scale, axis=1)
    walk = np.concatenate([np.zeros((m, 1, 2)), walk], axis=1)
    frac = (np.arange(steps + 1) / steps)[None, :, None]
    bridge = walk - frac * walk[:, -1:, :]
    return bridge[:, :steps, :]


def soup_mass(config):
    """
    Expected number of soup loops rooted in the disk with duration >= min_duration

    intensity * area * integral_{t0}^inf dt / (2 pi t^2) = intensity * R^2 / (2 t0)
    """
    return config.effective_intensity * config.domain_radius ** 2 / (2.0 * config.min_duration)


def sample_loop_soup(config, rng=None):
    """
    Sample the Brownian loop soup in the disk of radius domain_radius

    Args:
        config (SoupConfig): Soup parameters
        rng (numpy.random.Generator): Optional stream; defaults to the config seed

    Returns:
        list: Loop objects (possibly empty)
    """
    config.validate()
    if rng is None:
        rng = make_rng(config.seed, STREAM_SOUP)
    count = int(rng.poisson(soup_mass(config)))
    if count == 0:
        return []
    radius = config.domain_radius
    # truncated t^-2 density on [t0, inf): t = t0 / U
    durations = config.min_duration / (1.0 - rng.random(count))
    r = radius * np.sqrt(rng.random(count))
    theta = 2.0 * np.pi * rng.random(count)
    roots = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    normals = rng.standard_normal((count, config.bridge_steps, 2))
    bridges = _bridges(normals, durations)
    loops = []
    for root, bridge in zip(roots, bridges):
        vertices = root + bridge
        dist = np.hypot(vertices[:, 0], vertices[:, 1])
        if config.restrict_to_domain and np.any(dist >= radius):
            continue
        if np.all(dist >= radius):
            continue
        loops.append(Loop(vertices))
    return loops


# =====================================================
# Clustering
# =====================================================

class UnionFind:
    """Disjoint-set forest with path compression and union by size"""

    def __init__(self, size):
        self.parent = list(range(size))
        self.size = [1] * size

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def groups(self):
        """Blocks as a list of sets ordered by smallest member"""
        blocks = defaultdict(set)
        for i in range(len(self.parent)):
            blocks[self.find(i)].add(i)
        return sorted(blocks.values(), key=min)


def cluster_loops(loops, cell_size=None, chunk=500_000):
    """
    Partition loops into clusters of chained pairwise intersections

    Candidate segment pairs come from a spatial hash of segment bounding boxes;
    exact segment tests decide the unions.

    Args:
        loops (list): Loop objects
        cell_size (float): Hash cell side; defaults to twice the 75th percentile segment length
        chunk (int): Segment pairs tested per vectorized batch

    Returns:
        list: Clusters as sets of loop indices
    """
    uf = UnionFind(len(loops))
    if len(loops) < 2:
        return uf.groups()
    segs = np.concatenate([loop.segments for loop in loops])
    owner = np.repeat(np.arange(len(loops)), [len(loop) for loop in loops])
    lo = np.minimum(segs[:, 0], segs[:, 1])
    hi = np.maximum(segs[:, 0], segs[:, 1])
    if cell_size is None:
        lengths = np.linalg.norm(hi - lo, axis=1)
        cell_size = max(2.0 * float(np.percentile(lengths, 75)), 1e-9)
    c_lo = np.floor(lo / cell_size).astype(np.int64)
    c_hi = np.floor(hi / cell_size).astype(np.int64)

    buckets = defaultdict(list)
    for s in range(len(segs)):
        for cx in range(c_lo[s, 0], c_hi[s, 0] + 1):
            for cy in range(c_lo[s, 1], c_hi[s, 1] + 1):
                buckets[(cx, cy)].append(s)

    first, second = [], []
    for members in buckets.values():
        if len(members) < 2:
            continue
        members = np.asarray(members)
        owners = owner[members]
        if owners.min() == owners.max():
            continue
        ia, ib = np.triu_indices(len(members), k=1)
        cross = owners[ia] != owners[ib]
        first.append(members[ia[cross]])
        second.append(members[ib[cross]])
    if not first:
        return uf.groups()
    pairs = np.unique(np.column_stack([np.concatenate(first), np.concatenate(second)]), axis=0)

    for start in range(0, len(pairs), chunk):
        a, b = pairs[start:start + chunk, 0], pairs[start:start + chunk, 1]
        hit = segments_intersect(segs[a, 0], segs[a, 1], segs[b, 0], segs[b, 1])
        for i, j in zip(owner[a[hit]], owner[b[hit]]):
            uf.union(int(i), int(j))
    return uf.groups()


def cluster_loops_bruteforce(loops):
    """All-pairs intersection clustering, O(n^2) loop pairs"""
    uf = UnionFind(len(loops))
    boxes = [loop.bbox for loop in loops]
    for i in range(len(loops)):
        for j in range(i + 1, len(loops)):
            a, b = boxes[i], boxes[j]
            if a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1]:
                continue
            if loops_intersect(loops[i], loops[j]):
                uf.union(i, j)
    return uf.groups()


# =====================================================
# Outermost boundaries
# =====================================================

def _cluster_fill(cluster, loops, grid):
    """Filled raster of one cluster: loop interiors and traces with holes filled"""
    xmin = min(loops[i].bbox[0] for i in cluster)
    ymin = min(loops[i].bbox[1] for i in cluster)
    xmax = max(loops[i].bbox[2] for i in cluster)
    ymax = max(loops[i].bbox[3] for i in cluster)
    rs, cs = grid.index_window((xmin, ymin, xmax, ymax), margin=2)
    mask = np.zeros((rs.stop - rs.start, cs.stop - cs.start), dtype=bool)
    for i in cluster:
        lr, lc, inside = rasterize_interior(loops[i], grid)
        mask[lr.start - rs.start:lr.stop - rs.start, lc.start - cs.start:lc.stop - cs.start] |= inside
        rows, cols = rasterize_trace(loops[i], grid)
        mask[rows - rs.start, cols - cs.start] = True
    return rs, cs, ndimage.binary_fill_holes(mask, structure=FOUR_CONNECTED)


def _largest_component(mask):
    labels, count = ndimage.label(mask, structure=FOUR_CONNECTED)
    if count <= 1:
        return mask
    sizes = ndimage.sum_labels(mask, labels, index=np.arange(1, count + 1))
    return labels == (int(np.argmax(sizes)) + 1)


def trace_outer_contour(mask, grid, rs, cs):
    """
    Marching-squares outer contour of a filled raster region

    Args:
        mask (numpy.ndarray): Boolean window of the region
        grid (Grid): Raster the window belongs to
        rs, cs (slice): Window position in the grid

    Returns:
        Loop: Longest closed contour at level 1/2
    """
    padded = np.pad(mask.astype(float), 1)
    cols = np.arange(cs.start - 1, cs.stop + 1)
    rows = np.arange(rs.start - 1, rs.stop + 1)
    xs = grid.x0 + (cols + 0.5) * grid.h
    ys = grid.y0 + (rows + 0.5) * grid.h
    generator = contourpy.contour_generator(xs, ys, padded, line_type=contourpy.LineType.Separate)
    lines = generator.lines(0.5)
    line = max(lines, key=len)
    return Loop.from_points(line)


def outermost_boundaries(clusters, loops, raster_n, bbox=None, origin=(0.0, 0.0)):
    """
    Trace the outer boundaries of outermost clusters

    Clusters are processed by decreasing filled area; one whose filled raster lies
    mostly inside an already kept region is nested and discarded. Raster cells of a
    kept region within one cell of an earlier region are removed, so kept regions
    never touch.

    Args:
        clusters (list): Sets of loop indices
        loops (list): Loop objects
        raster_n (int): Raster side in cells (at least 256)
        bbox (tuple): Region to rasterize; defaults to the bbox of all loops
        origin (tuple): Point the domain loop must surround

    Returns:
        LoopEnsemble: cle_loops are all kept boundaries; domain_loop the one around origin
    """
    if raster_n < 256:
        raise ConfigError(f"raster_n must be at least 256, got {raster_n}")
    if not clusters:
        return LoopEnsemble(cle_loops=[], domain_loop=None)
    if bbox is None:
        boxes = np.array([loop.bbox for loop in loops])
        bbox = (boxes[:, 0].min(), boxes[:, 1].min(), boxes[:, 2].max(), boxes[:, 3].max())
    grid = Grid.covering(bbox, raster_n, pad_cells=3)

    fills = [_cluster_fill(cluster, loops, grid) for cluster in clusters]
    order = sorted(range(len(clusters)), key=lambda k: (-int(fills[k][2].sum()), min(clusters[k])))

    owner = np.full((grid.n, grid.n), -1, dtype=np.int64)
    kept = []
    for k in order:
        rs, cs, mask = fills[k]
        area = int(mask.sum())
        if area == 0:
            continue
        owned = owner[rs, cs] >= 0
        if (mask & owned).sum() * 2 >= area:
            continue
        blocked = ndimage.binary_dilation(owned, structure=EIGHT_CONNECTED)
        region = _largest_component(mask & ~blocked)
        region = ndimage.binary_fill_holes(region, structure=FOUR_CONNECTED) & ~blocked
        region = _largest_component(region)
        if not region.any():
            continue
        # its outer contour would enclose a kept region
        if (ndimage.binary_fill_holes(region, structure=FOUR_CONNECTED) & blocked).any():
            continue
        window = owner[rs, cs]
        window[region] = k
        kept.append((k, rs, cs, region))

    cle_loops, domain_loop, domain_cluster = [], None, None
    o_row, o_col = grid.cell_of(origin)
    for k, rs, cs, region in kept:
        try:
            loop = trace_outer_contour(region, grid, rs, cs)
        except ValueError:
            continue
        cle_loops.append(loop)
        if domain_loop is None and owner[o_row, o_col] == k and abs(loop.winding_number(origin)) == 1:
            domain_loop, domain_cluster = loop, k
    return LoopEnsemble(cle_loops=cle_loops, domain_loop=domain_loop, grid=grid, domain_cluster=domain_cluster)


def rasterized_overlaps(loop_list, grid):
    """Number of cells claimed by more than one loop interior"""
    counts = np.zeros((grid.n, grid.n), dtype=np.int32)
    for loop in loop_list:
        rs, cs, inside = rasterize_interior(loop, grid)
        counts[rs, cs] += inside
    return int(np.sum(counts > 1))


# =====================================================
# Full pipeline
# =====================================================

def sample_ensemble(config, verbose=False, manifest=None):
    """
    Sample a LoopEnsemble: soup, clusters, the loop around 0, then the inner CLE

    Inner CLE loops are re-clustered from soup loops lying inside the domain loop
    that do not belong to the domain loop's own cluster.

    Args:
        config (SoupConfig): Soup parameters
        verbose (bool): Print a warning line per resample
        manifest (RunManifest): Run manifest attached to the ensemble

    Returns:
        LoopEnsemble: Ensemble with domain_loop set

    Raises:
        NoDomainLoopError: When max_attempts samples all lack a loop around 0
    """
    config.validate()
    for attempt in range(config.max_attempts):
        seed = config.seed if attempt == 0 else child_seed(config.seed, STREAM_SOUP, attempt)
        attempt_config = replace(config, seed=seed)
        loops = sample_loop_soup(attempt_config)
        clusters = cluster_loops(loops)
        top = outermost_boundaries(clusters, loops, config.raster_n)
        if top.domain_loop is None:
            if verbose:
                print(f"⚠️ No loop surrounds 0 (attempt {attempt + 1}); resampling")
            continue

        domain_loop = top.domain_loop
        own = clusters[top.domain_cluster]
        inner = [
            loop for i, loop in enumerate(loops)
            if i not in own and bool(np.all(domain_loop.contains(loop.vertices)))
        ]
        inner_clusters = cluster_loops(inner)
        inner_top = outermost_boundaries(inner_clusters, inner, config.raster_n, bbox=domain_loop.bbox)
        return LoopEnsemble(
            cle_loops=inner_top.cle_loops,
            domain_loop=domain_loop,
            config=attempt_config,
            manifest=manifest,
            grid=inner_top.grid if inner_top.grid is not None else Grid.covering(domain_loop.bbox, config.raster_n, 3),
            attempts=attempt + 1,
            soup_loops=loops,
        )
    raise NoDomainLoopError(f"No loop surrounded the origin in {config.max_attempts} samples")


