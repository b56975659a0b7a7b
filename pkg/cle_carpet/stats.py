"""
Monte Carlo statistics for CarpetLab
Quantile normalizers, comparability, Hölder fits and the (K, d_n) comparison tools
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as scipy_stats
from scipy.spatial.distance import cdist
from sklearn.neighbors import KDTree

from .carpet import BoxGraph, boundary_diameter, rasterize_carpet
from .exceptions import AcceptanceError, ConfigError, DegenerateSampleError, DisconnectedError, NoDomainLoopError
from .rng import STREAM_BOOTSTRAP, STREAM_REPLICA, child_seed, make_rng, parallel_map
from .soup import sample_ensemble

REPLICA_ATTEMPTS = 10


def empirical_quantile(values, p):
    """Lower-midpoint order statistic: sorted(values)[ceil(p * R) - 1]"""
    ordered = np.sort(np.asarray(values, dtype=float))
    if len(ordered) == 0:
        raise DegenerateSampleError("Quantile of an empty sample")
    index = max(int(math.ceil(p * len(ordered) - 1e-12)) - 1, 0)
    return float(ordered[index])


def bootstrap_halfwidth(values, p, resamples, rng):
    """Half the width of the central 95% bootstrap interval of the p-quantile"""
    values = np.asarray(values, dtype=float)
    picks = rng.integers(0, len(values), size=(resamples, len(values)))
    estimates = [empirical_quantile(values[row], p) for row in picks]
    return 0.5 * (empirical_quantile(estimates, 0.975) - empirical_quantile(estimates, 0.025))


# =====================================================
# Quantile estimation
# =====================================================

@dataclass
class QuantileTable:
    kappa: float
    eps_list: list
    p_list: list
    q_hat: np.ndarray
    replica_count: int
    confidence_halfwidths: np.ndarray
    diameters: np.ndarray = field(default=None, repr=False)
    manifest_hash: str = ''

    @property
    def m_hat(self):
        """Median row (p = 1/2) over eps"""
        for i, p in enumerate(self.p_list):
            if math.isclose(p, 0.5):
                return self.q_hat[i]
        return np.array([empirical_quantile(col, 0.5) for col in self.diameters.T])

    def column(self, eps):
        for j, e in enumerate(self.eps_list):
            if math.isclose(e, eps, rel_tol=1e-9):
                return j
        return None

    def monotone_in_p(self):
        return bool(np.all(np.diff(self.q_hat, axis=0) >= 0))

    def monotone_in_eps(self, slack_boxes=1):
        """
        q_hat nondecreasing in eps, each step allowed to drop by `slack_boxes`
        boxes of the larger eps (the box-count discretization step)
        """
        eps = np.asarray(self.eps_list, dtype=float)
        slack = slack_boxes * eps[1:] ** 2
        return bool(np.all(np.diff(self.q_hat, axis=1) >= -slack[None, :]))

    def rows(self):
        out = []
        for i, p in enumerate(self.p_list):
            for j, eps in enumerate(self.eps_list):
                out.append({
                    'kappa': self.kappa,
                    'p': p,
                    'eps': eps,
                    'q_hat': float(self.q_hat[i, j]),
                    'halfwidth': float(self.confidence_halfwidths[i, j]),
                    'replicas': self.replica_count,
                    'manifest_hash': self.manifest_hash,
                })
        return out


def replica_diameters(base_config, kappa, eps_list, index):
    """
    Boundary diameters of one replica for every eps

    Failed replicas (no domain loop, disconnected boundary net) are redrawn from
    fresh child seeds, at most REPLICA_ATTEMPTS times.
    """
    soup = replace(base_config.soup, kappa=kappa, max_attempts=1)
    for attempt in range(REPLICA_ATTEMPTS):
        seed = child_seed(base_config.run.seed, STREAM_REPLICA, index, attempt)
        try:
            ensemble = sample_ensemble(replace(soup, seed=seed))
            mask = rasterize_carpet(ensemble, base_config.carpet.grid)
            return [boundary_diameter(mask, eps, base_config.carpet.net_count) for eps in eps_list]
        except (NoDomainLoopError, DisconnectedError):
            continue
    raise NoDomainLoopError(f"Replica {index} failed {REPLICA_ATTEMPTS} times")


def estimate_quantiles(kappa, eps_list, p_list, replicas, base_config, diameter_fn=None, threads=1):
    """
    Empirical quantiles of the boundary diameter over independent replicas

    Args:
        kappa (float): CLE parameter
        eps_list (list): Increasing box sizes
        p_list (list): Probabilities in (0, 1)
        replicas (int): Replica count (at least 50)
        base_config (RunConfig): Soup, carpet and seed settings
        diameter_fn (callable): Optional replacement of the per-replica computation,
            called with the replica index and returning one diameter per eps
        threads (int): Worker count

    Returns:
        QuantileTable: Quantiles and bootstrap halfwidths
    """
    if replicas < 50:
        raise ConfigError(f"Quantile estimation needs at least 50 replicas, got {replicas}")
    h = base_config.cell_size
    for eps in eps_list:
        if eps < 4.0 * h - 1e-12:
            raise ConfigError(f"eps={eps} is below 4h={4.0 * h:.6g}")
    if diameter_fn is None:
        def diameter_fn(index):
            return replica_diameters(base_config, kappa, eps_list, index)

    diameters = np.array(parallel_map(diameter_fn, range(replicas), threads), dtype=float)
    diameters = diameters.reshape(replicas, len(eps_list))

    rng = make_rng(base_config.run.seed, STREAM_BOOTSTRAP)
    resamples = base_config.stats.bootstrap_resamples
    q_hat = np.zeros((len(p_list), len(eps_list)))
    halfwidths = np.zeros_like(q_hat)
    for i, p in enumerate(p_list):
        for j in range(len(eps_list)):
            q_hat[i, j] = empirical_quantile(diameters[:, j], p)
            halfwidths[i, j] = bootstrap_halfwidth(diameters[:, j], p, resamples, rng)
    return QuantileTable(
        kappa=float(kappa),
        eps_list=list(eps_list),
        p_list=list(p_list),
        q_hat=q_hat,
        replica_count=replicas,
        confidence_halfwidths=halfwidths,
        diameters=diameters,
    )


def comparability_report(table, m0, band_m1=8.0):
    """
    Ratios R(p, eps) = q(p, m0 eps) / q(p, eps) and their spread across eps

    PASS when every spread is at most band_m1^2 and no quantile is zero.
    Individual ratios outside [1/band_m1, band_m1] are listed as outliers but do
    not fail the report.

    Returns:
        dict: ratios per p, spreads, degenerate entries and the verdict
    """
    pairs = []
    for j, eps in enumerate(table.eps_list):
        k = table.column(m0 * eps)
        if k is not None:
            pairs.append((j, k))
    if not pairs:
        raise ConfigError(f"Table has no eps and {m0} * eps column pair")

    degenerate = [
        {'p': p, 'eps': eps}
        for i, p in enumerate(table.p_list)
        for j, eps in enumerate(table.eps_list)
        if not table.q_hat[i, j] > 0
    ]
    rows, spreads, outliers = [], {}, []
    for i, p in enumerate(table.p_list):
        ratios = []
        for j, k in pairs:
            low, high = table.q_hat[i, j], table.q_hat[i, k]
            ratio = float(high / low) if low > 0 and high > 0 else float('nan')
            ratios.append(ratio)
            rows.append({'p': p, 'eps': table.eps_list[j], 'ratio': ratio})
            if np.isfinite(ratio) and not 1.0 / band_m1 <= ratio <= band_m1:
                outliers.append({'p': p, 'eps': table.eps_list[j], 'ratio': ratio})
        finite = [r for r in ratios if np.isfinite(r)]
        spreads[p] = max(finite) / min(finite) if finite else float('nan')
    passed = not degenerate and all(np.isfinite(s) and s <= band_m1 ** 2 for s in spreads.values())
    return {
        'm0': m0,
        'band': band_m1 ** 2,
        'ratios': rows,
        'spread': spreads,
        'outliers': outliers,
        'degenerate': degenerate,
        'status': 'PASS' if passed else 'FAIL',
        'manifest_hash': table.manifest_hash,
    }


def median_scaling_slope(table):
    """Descriptive log-log slope of the median against eps (no target asserted)"""
    m_hat = np.asarray(table.m_hat, dtype=float)
    eps = np.asarray(table.eps_list, dtype=float)
    ok = m_hat > 0
    if ok.sum() < 2:
        raise DegenerateSampleError("Need two positive medians for a scaling slope")
    fit = scipy_stats.linregress(np.log(eps[ok]), np.log(m_hat[ok]))
    return {'slope': float(fit.slope), 'intercept': float(fit.intercept), 'stderr': float(fit.stderr)}


# =====================================================
# Metric samples and (K, d_n) comparison
# =====================================================

@dataclass
class MetricSample:
    """Finite K in R^4 of (z, w) pairs with normalized distances f"""

    points: np.ndarray
    values: np.ndarray
    eps: float = 0.0
    disconnected: int = 0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 4)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(self.points) != len(self.values):
            raise ValueError("points and values must have the same length")
        if np.any(self.values < 0):
            raise ValueError("Metric sample values must be nonnegative")

    def __len__(self):
        return len(self.values)

    @property
    def separations(self):
        return np.hypot(self.points[:, 0] - self.points[:, 2], self.points[:, 1] - self.points[:, 3])

    def swapped(self):
        return MetricSample(self.points[:, [2, 3, 0, 1]], self.values, self.eps, self.disconnected)


def normalized_metric_sample(mask, eps, m_hat, pair_count, rng, graph=None):
    """
    Uniform random carpet-cell pairs with values d_eps / m_hat

    Disconnected pairs are counted and left out of K.
    """
    if not m_hat > 0:
        raise ConfigError("m_hat must be positive")
    graph = graph if graph is not None else BoxGraph(mask, eps)
    cells = mask.carpet_index
    picks = rng.integers(0, len(cells), size=(pair_count, 2))
    z_cells, w_cells = cells[picks[:, 0]], cells[picks[:, 1]]
    z_pieces = graph.piece[z_cells[:, 0], z_cells[:, 1]]
    w_pieces = graph.piece[w_cells[:, 0], w_cells[:, 1]]
    sources, rows = np.unique(z_pieces, return_inverse=True)
    hops = graph.hops_from(sources)[rows, w_pieces]
    boxes = hops + 1.0
    connected = np.isfinite(boxes)
    points = np.hstack([mask.cell_centers(z_cells), mask.cell_centers(w_cells)])[connected]
    values = boxes[connected] * graph.eps ** 2 / m_hat
    return MetricSample(points, values, eps=graph.eps, disconnected=int((~connected).sum()))


def _check_nonempty(*sets):
    for s in sets:
        if len(s) == 0:
            raise DegenerateSampleError("Hausdorff distance of an empty set")


def hausdorff_distance(first, second, chunk=4096):
    """Exact Hausdorff distance between finite point sets (rows are points)"""
    first = np.atleast_2d(np.asarray(first, dtype=float))
    second = np.atleast_2d(np.asarray(second, dtype=float))
    _check_nonempty(first, second)
    to_second = np.full(len(first), np.inf)
    to_first = np.full(len(second), np.inf)
    for start in range(0, len(first), chunk):
        d = cdist(first[start:start + chunk], second)
        to_second[start:start + chunk] = d.min(axis=1)
        np.minimum(to_first, d.min(axis=0), out=to_first)
    return float(max(to_second.max(), to_first.max()))


def hausdorff_distance_kdtree(first, second):
    """Hausdorff distance using nearest-neighbour queries on k-d trees"""
    first = np.atleast_2d(np.asarray(first, dtype=float))
    second = np.atleast_2d(np.asarray(second, dtype=float))
    _check_nonempty(first, second)
    forward, _ = KDTree(second).query(first, k=1)
    backward, _ = KDTree(first).query(second, k=1)
    return float(max(forward.max(), backward.max()))


def dn_components(a, b):
    """(d_0n, d_H) between two metric samples"""
    d_h = hausdorff_distance(a.points, b.points)
    d = cdist(a.points, b.points)
    close = d <= d_h * (1.0 + 1e-12) + 1e-15
    if not close.any():
        raise AcceptanceError("No point pair within the Hausdorff distance")
    gaps = np.abs(a.values[:, None] - b.values[None, :])
    return float(gaps[close].max()), d_h


def dn_distance(a, b):
    """d_n(a, b) = d_0n(a, b) + d_H(K_a, K_b)"""
    d0, d_h = dn_components(a, b)
    return d0 + d_h


@dataclass
class HolderFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    pairs: int
    bins: list

    @property
    def excludes_zero(self):
        return self.ci_low > 0 or self.ci_high < 0


def _pooled(samples):
    if isinstance(samples, MetricSample):
        samples = [samples]
    seps = np.concatenate([s.separations for s in samples]) if samples else np.zeros(0)
    vals = np.concatenate([s.values for s in samples]) if samples else np.zeros(0)
    return seps, vals


def holder_fit(samples, min_pairs=200, min_scales=3):
    """
    Regress log f on log |z - w|

    Args:
        samples (list): MetricSample objects
        min_pairs (int): Minimum usable pairs
        min_scales (int): Minimum number of distinct dyadic separation scales

    Returns:
        HolderFit: Slope with 95% confidence interval and per-scale bins

    Raises:
        DegenerateSampleError: Too few pairs, too few scales, or equal separations
    """
    seps, vals = _pooled(samples)
    ok = (seps > 0) & (vals > 0) & np.isfinite(vals)
    seps, vals = seps[ok], vals[ok]
    if len(seps) < min_pairs:
        raise DegenerateSampleError(f"Hölder fit needs {min_pairs} pairs, got {len(seps)}")
    if np.all(seps == seps[0]):
        raise DegenerateSampleError("All separations are equal")
    scales = np.floor(np.log2(seps)).astype(int)
    levels = np.unique(scales)
    if len(levels) < min_scales:
        raise DegenerateSampleError(f"Separations span {len(levels)} dyadic scales, need {min_scales}")

    x, y = np.log(seps), np.log(vals)
    fit = scipy_stats.linregress(x, y)
    margin = scipy_stats.t.ppf(0.975, len(x) - 2) * fit.stderr
    bins = [
        {'scale': float(2.0 ** level), 'count': int(np.sum(scales == level)), 'mean_log_value': float(y[scales == level].mean())}
        for level in levels
    ]
    return HolderFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        ci_low=float(fit.slope - margin),
        ci_high=float(fit.slope + margin),
        pairs=len(x),
        bins=bins,
    )


def posdef_floor(samples, r):
    """Minimum normalized distance over pairs with separation at least r"""
    seps, vals = _pooled(samples)
    far = seps >= r
    if not far.any():
        raise DegenerateSampleError(f"No pair with separation >= {r}")
    return float(vals[far].min())


def geodesic_midpoint_defect(mask, eps, m_hat, pairs, graph=None):
    """
    Relative midpoint defect of the box metric for each connected pair

    defect = min_u max(|d(z,u) - d/2|, |d(u,w) - d/2|) / d over pieces u, with
    hop distances (d(a, a) = 0). Pairs in one piece are excluded and counted.

    Returns:
        dict: defect values and their summary
    """
    graph = graph if graph is not None else BoxGraph(mask, eps)
    defects, distances = [], []
    excluded = disconnected = 0
    for z, w in pairs:
        pz = graph.piece_of(mask.snap(z, eps))
        pw = graph.piece_of(mask.snap(w, eps))
        if pz == pw:
            excluded += 1
            continue
        hops = graph.hops_from([pz, pw])
        d = hops[0, pw]
        if not np.isfinite(d):
            disconnected += 1
            continue
        reach = np.isfinite(hops[0]) & np.isfinite(hops[1])
        gap = np.maximum(np.abs(hops[0, reach] - d / 2.0), np.abs(hops[1, reach] - d / 2.0))
        defects.append(float(gap.min() / d))
        distances.append(float((d + 1.0) * graph.eps ** 2 / m_hat))
    values = np.asarray(defects)
    return {
        'count': len(defects),
        'excluded_same_piece': excluded,
        'disconnected': disconnected,
        'median': float(np.median(values)) if len(values) else float('nan'),
        'mean': float(values.mean()) if len(values) else float('nan'),
        'max': float(values.max()) if len(values) else float('nan'),
        'median_distance': float(np.median(distances)) if distances else float('nan'),
        'defects': defects,
    }
