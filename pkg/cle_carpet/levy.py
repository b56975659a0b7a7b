"""
Stable Lévy processes for CarpetLab

Boundary lengths of the carpet exploration evolve as 4/kappa-stable Lévy
processes with up/down jump intensities a_plus, a_minus (a_plus + a_minus = 1).
Increments use the Chambers-Mallows-Stuck transform in the S1 parameterization
with zero location, so the simulated process is strictly stable:

    X_dt ~ S1(alpha, beta, sigma * dt^(1/alpha), 0),
    sigma^alpha = -Gamma(-alpha) cos(pi alpha / 2)
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as scipy_stats
from scipy.special import gamma

from .exceptions import AcceptanceError, ConfigError
from .rng import STREAM_LEVY, make_rng, parallel_map

PATH_CHUNK = 4096
TIME_BLOCK = 512


@dataclass(frozen=True)
class StableParams:
    kappa: float
    alpha: float
    u: float
    skew_beta: float
    positivity: float
    a_plus: float
    a_minus: float

    @property
    def scale(self):
        """S1 scale per unit time implied by the Lévy measure"""
        return (-gamma(-self.alpha) * math.cos(math.pi * self.alpha / 2.0)) ** (1.0 / self.alpha)

    def to_dict(self):
        return {
            'kappa': self.kappa,
            'alpha': self.alpha,
            'u': self.u,
            'skew_beta': self.skew_beta,
            'positivity': self.positivity,
            'a_plus': self.a_plus,
            'a_minus': self.a_minus,
            'scale': self.scale,
        }


def positivity_from_beta(alpha, beta):
    """P[X_1 > 0] = 1/2 + arctan(beta tan(pi alpha / 2)) / (pi alpha)"""
    return 0.5 + math.atan(beta * math.tan(math.pi * alpha / 2.0)) / (math.pi * alpha)


def params_from_kappa(kappa):
    """
    Stable parameters of the boundary-length process for kappa in (8/3, 4)

    Raises:
        ConfigError: If kappa is out of range
        AcceptanceError: If the skewness formulas disagree
    """
    if not 8.0 / 3.0 < kappa < 4.0:
        raise ConfigError(f"kappa must lie in (8/3, 4), got {kappa}")
    alpha = 4.0 / kappa
    u = -math.cos(4.0 * math.pi / kappa)
    beta = -(1.0 / math.tan(2.0 * math.pi / kappa)) ** 2
    positivity = 1.0 - kappa / 8.0
    if abs((1.0 + beta) / (1.0 - beta) - u) > 1e-12:
        raise AcceptanceError(f"Skewness identity fails at kappa={kappa}")
    if abs(positivity_from_beta(alpha, beta) - positivity) > 1e-9:
        raise AcceptanceError(f"Positivity formulas disagree at kappa={kappa}")
    return StableParams(
        kappa=float(kappa),
        alpha=alpha,
        u=u,
        skew_beta=beta,
        positivity=positivity,
        a_plus=u / (1.0 + u),
        a_minus=1.0 / (1.0 + u),
    )


def symmetric_params(alpha):
    """Beta = 0 parameters with the same alpha (balanced jumps)"""
    return StableParams(
        kappa=4.0 / alpha, alpha=alpha, u=1.0, skew_beta=0.0,
        positivity=0.5, a_plus=0.5, a_minus=0.5,
    )


# =====================================================
# Increments and paths
# =====================================================

def sample_increments(params, dt, size, rng):
    """
    Chambers-Mallows-Stuck draws of X_dt

    Args:
        params (StableParams): Process parameters
        dt (float): Time step (> 0)
        size (int or tuple): Output shape
        rng (numpy.random.Generator): Random stream

    Returns:
        numpy.ndarray: Increments with scale sigma * dt^(1/alpha)
    """
    if not dt > 0:
        raise ConfigError("dt must be positive")
    alpha, beta = params.alpha, params.skew_beta
    tan_term = beta * math.tan(math.pi * alpha / 2.0)
    shift = math.atan(tan_term) / alpha
    stretch = (1.0 + tan_term ** 2) ** (1.0 / (2.0 * alpha))
    v = rng.uniform(-math.pi / 2.0, math.pi / 2.0, size)
    w = rng.exponential(1.0, size)
    core = np.sin(alpha * (v + shift)) / np.cos(v) ** (1.0 / alpha)
    tail = (np.cos(v - alpha * (v + shift)) / w) ** ((1.0 - alpha) / alpha)
    return params.scale * dt ** (1.0 / alpha) * stretch * core * tail


def sample_increment(params, dt, rng):
    """One draw of X_dt"""
    return float(sample_increments(params, dt, 1, rng)[0])


def sample_truncated_increments(params, dt, size, cutoff, rng):
    """Increments conditioned on |x| < cutoff (rejection)"""
    out = sample_increments(params, dt, size, rng)
    bad = np.abs(out) >= cutoff
    while bad.any():
        out[bad] = sample_increments(params, dt, int(bad.sum()), rng)
        bad = np.abs(out) >= cutoff
    return out


def sample_jumps(params, horizon, cutoff, rng):
    """
    Jumps of size >= cutoff on [0, horizon] from the compound Poisson part

    Returns:
        tuple: (times, sizes) sorted by time; sizes are signed
    """
    if not cutoff > 0:
        raise ConfigError("Jump cutoff must be positive")
    alpha = params.alpha
    times, sizes = [], []
    for weight, sign in ((params.a_plus, 1.0), (params.a_minus, -1.0)):
        count = rng.poisson(horizon * weight / alpha * cutoff ** (-alpha))
        times.append(rng.uniform(0.0, horizon, count))
        sizes.append(sign * cutoff * (1.0 - rng.random(count)) ** (-1.0 / alpha))
    times = np.concatenate(times)
    sizes = np.concatenate(sizes)
    order = np.argsort(times, kind='stable')
    return times[order], sizes[order]


@dataclass
class StablePath:
    """Sampled path on a time grid with its recorded large jumps"""

    times: np.ndarray
    values: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    cutoff: float
    dt: float = 0.0
    _jump_steps: np.ndarray = field(default=None, repr=False)

    @property
    def running_infimum(self):
        return np.minimum.accumulate(self.values)

    @property
    def running_supremum(self):
        return np.maximum.accumulate(self.values)

    def jump_part(self):
        """Cumulative recorded jumps on the time grid"""
        steps = np.zeros(len(self.times))
        if len(self.jump_sizes):
            np.add.at(steps, self._jump_steps, self.jump_sizes)
        return np.cumsum(steps)

    def remainder(self):
        """Path with the recorded jumps removed"""
        return self.values - self.jump_part()

    def upward_jumps(self, until=1.0):
        return self.jump_sizes[(self.jump_sizes > 0) & (self.jump_times <= until)]


def sample_path_with_jumps(params, horizon, dt, cutoff, rng):
    """
    Path on [0, horizon]: explicit jumps >= cutoff plus truncated small increments

    The truncated increments carry the compensation of the removed large jumps;
    the path minus its recorded jumps has no step of size >= cutoff.

    Args:
        params (StableParams): Process parameters
        horizon (float): Time horizon T
        dt (float): Grid step, at most cutoff^alpha / 10
        cutoff (float): Jump recording threshold
        rng (numpy.random.Generator): Random stream

    Returns:
        StablePath: Sampled path
    """
    if not cutoff > 0:
        raise ConfigError("Jump cutoff must be positive")
    if dt > cutoff ** params.alpha / 10.0 * (1.0 + 1e-12):
        raise ConfigError(f"dt={dt} exceeds cutoff^alpha / 10 = {cutoff ** params.alpha / 10.0:.3g}")
    steps = int(math.ceil(horizon / dt - 1e-9))
    times = np.arange(steps + 1) * dt
    jump_times, jump_sizes = sample_jumps(params, horizon, cutoff, rng)
    small = sample_truncated_increments(params, dt, steps, cutoff, rng)
    jump_steps = np.minimum(np.ceil(jump_times / dt).astype(np.int64), steps)
    jump_steps = np.maximum(jump_steps, 1)
    increments = np.concatenate([[0.0], small])
    np.add.at(increments, jump_steps, jump_sizes)
    path = StablePath(
        times=times,
        values=np.cumsum(increments),
        jump_times=jump_times,
        jump_sizes=jump_sizes,
        cutoff=cutoff,
        dt=dt,
        _jump_steps=jump_steps,
    )
    residual = np.abs(np.diff(path.remainder()))
    if len(residual) and residual.max() >= cutoff * (1.0 + 1e-9):
        raise AcceptanceError("Remainder has a step at or above the jump cutoff")
    return path


def jumps_only_path(params, horizon, cutoff, rng):
    """Compound Poisson path of the jumps >= cutoff, recorded at the jump times"""
    jump_times, jump_sizes = sample_jumps(params, horizon, cutoff, rng)
    times = np.concatenate([[0.0], jump_times])
    return StablePath(
        times=times,
        values=np.concatenate([[0.0], np.cumsum(jump_sizes)]),
        jump_times=jump_times,
        jump_sizes=jump_sizes,
        cutoff=cutoff,
        _jump_steps=np.arange(1, len(jump_times) + 1),
    )


def largest_jumps_sum(path, n):
    """Sum of the n largest upward jumps of the path on [0, 1]"""
    if n < 1:
        raise ConfigError(f"n must be at least 1, got {n}")
    ups = np.sort(path.upward_jumps(1.0))[::-1]
    return float(ups[:n].sum())


# =====================================================
# Running-infimum touch times
# =====================================================

def _chunk_rngs(rng, count):
    seeds = rng.integers(0, 2 ** 63, size=count)
    return [make_rng(int(s)) for s in seeds]


def _chunks(total, chunk=PATH_CHUNK):
    return [min(chunk, total - start) for start in range(0, total, chunk)]


def _touch_kernel(params, count, horizon, dt, etas, rng):
    """
    Simulate `count` paths until X - I <= eta at some grid time >= 1 (for every eta)

    Returns:
        dict: tau (len(etas) x count, inf if censored) and inf_one (I at time 1)
    """
    n_steps = int(round(horizon / dt))
    start = int(round(1.0 / dt))
    x = np.zeros(count)
    low = np.zeros(count)
    tau = np.full((len(etas), count), np.inf)
    inf_one = np.full(count, np.nan)
    active = np.arange(count)
    step = 0
    while step < n_steps and len(active):
        m = min(TIME_BLOCK, n_steps - step)
        inc = sample_increments(params, dt, (len(active), m), rng)
        path = x[active, None] + np.cumsum(inc, axis=1)
        floor = np.minimum(low[active, None], np.minimum.accumulate(path, axis=1))
        index = step + 1 + np.arange(m)
        j = start - step - 1
        if 0 <= j < m:
            inf_one[active] = floor[:, j]
        gap = path - floor
        eligible = (index >= start)[None, :]
        for e, eta in enumerate(etas):
            hit = (gap <= eta) & eligible
            any_hit = hit.any(axis=1)
            first = np.argmax(hit, axis=1)
            fresh = any_hit & np.isinf(tau[e, active])
            tau[e, active[fresh]] = index[first[fresh]] * dt
        x[active] = path[:, -1]
        low[active] = floor[:, -1]
        step += m
        active = active[np.isinf(tau[:, active]).any(axis=0)]
    return {'tau': tau, 'inf_one': inf_one}


def simulate_touch_times(params, paths, horizon, dt, etas, rng, threads=1):
    """Run the touch-time kernel over fixed-size path chunks and concatenate in order"""
    sizes = _chunks(paths)
    rngs = _chunk_rngs(rng, len(sizes))

    def task(i):
        return _touch_kernel(params, sizes[i], horizon, dt, etas, rngs[i])

    parts = parallel_map(task, range(len(sizes)), threads)
    return {key: np.concatenate([p[key] for p in parts], axis=-1) for key in parts[0]}


def _pair_moment_kernel(params, count, dt, eta, checkpoints, rng):
    """
    Simulate `count` independent pairs (X1, X2) stopped at tau = tau1 ^ tau2

    tau is the first grid time t >= 1 at which either path has X - I <= eta.
    All recorded values belong to X1.

    Returns:
        dict: tau (inf if not reached by the last checkpoint), inf_at_tau, and
        x_at / inf_at at each checkpoint time (nan for pairs stopped earlier)
    """
    n_steps = int(round(checkpoints[-1] / dt))
    start = int(round(1.0 / dt))
    checkpoint_steps = [int(round(m / dt)) for m in checkpoints]
    x = np.zeros((2, count))
    low = np.zeros((2, count))
    tau = np.full(count, np.inf)
    inf_at_tau = np.full(count, np.nan)
    x_at = np.full((len(checkpoints), count), np.nan)
    inf_at = np.full((len(checkpoints), count), np.nan)
    active = np.arange(count)
    step = 0
    while step < n_steps and len(active):
        m = min(TIME_BLOCK, n_steps - step)
        inc = sample_increments(params, dt, (2, len(active), m), rng)
        path = x[:, active, None] + np.cumsum(inc, axis=2)
        floor = np.minimum(low[:, active, None], np.minimum.accumulate(path, axis=2))
        index = step + 1 + np.arange(m)
        for c, target in enumerate(checkpoint_steps):
            j = target - step - 1
            if 0 <= j < m:
                x_at[c, active] = path[0, :, j]
                inf_at[c, active] = floor[0, :, j]
        hit = ((path - floor) <= eta).any(axis=0) & (index >= start)[None, :]
        any_hit = hit.any(axis=1)
        first = np.argmax(hit, axis=1)
        tau[active[any_hit]] = index[first[any_hit]] * dt
        inf_at_tau[active[any_hit]] = floor[0, any_hit, first[any_hit]]
        x[:, active] = path[:, :, -1]
        low[:, active] = floor[:, :, -1]
        step += m
        active = active[~any_hit]
    return {'tau': tau, 'inf_at_tau': inf_at_tau, 'x_at': x_at, 'inf_at': inf_at}


def simulate_pair_moments(params, pairs, dt, eta, checkpoints, rng, threads=1):
    """Run the pair kernel over fixed-size chunks and concatenate in order"""
    sizes = _chunks(pairs, PATH_CHUNK // 2)
    rngs = _chunk_rngs(rng, len(sizes))

    def task(i):
        return _pair_moment_kernel(params, sizes[i], dt, eta, list(checkpoints), rngs[i])

    parts = parallel_map(task, range(len(sizes)), threads)
    return {key: np.concatenate([p[key] for p in parts], axis=-1) for key in parts[0]}


def _survival_fit(samples, xs):
    """Fit log P[sample >= x] against log x; returns slope, CI and the curve"""
    survival = np.array([np.mean(samples >= x) for x in xs])
    ok = survival > 0
    if ok.sum() < 3:
        return {'slope': float('nan'), 'ci_low': float('nan'), 'ci_high': float('nan'), 'survival': survival.tolist()}
    fit = scipy_stats.linregress(np.log(xs[ok]), np.log(survival[ok]))
    margin = scipy_stats.t.ppf(0.975, ok.sum() - 2) * fit.stderr if ok.sum() > 2 else float('nan')
    return {
        'slope': float(fit.slope),
        'ci_low': float(fit.slope - margin),
        'ci_high': float(fit.slope + margin),
        'survival': survival.tolist(),
    }


def tau_statistics(params, paths, horizon, rng, dt=0.05, eta_scale=1.0, points=12, threads=1, strict=True):
    """
    Tail exponents of touch times for single paths and independent pairs

    tau is the first grid time t >= 1 with X_t - I_t <= eta, eta = eta_scale *
    sigma * dt^(1/alpha). Pairs take the minimum over consecutive single paths.
    Fits use x in [10, horizon / 10] so censored samples (tau > horizon) never
    enter the fitted range. Slopes are recomputed at eta / 2.

    Returns:
        dict: single, pair, both conditioned (I1 at time 1 >= -1) and half-eta fits
        plus the independence check
    """
    if strict and (horizon < 1e3 or paths < 1e4):
        raise ConfigError("tau statistics need horizon >= 1000 and at least 10^4 paths")
    eta = eta_scale * params.scale * dt ** (1.0 / params.alpha)
    sim = simulate_touch_times(params, paths, horizon, dt, [eta, eta / 2.0], rng, threads=threads)
    single = sim['tau'][0]
    half = sim['tau'][1]
    pair = np.minimum(single[0:-1:2], single[1::2])
    xs = np.geomspace(10.0, max(horizon / 10.0, 10.0), points)

    conditioned = np.where(sim['inf_one'] >= -1.0, single, 0.0)
    pair_conditioned = np.where(sim['inf_one'][0:-1:2] >= -1.0, pair, 0.0)
    independence = []
    for x in xs:
        p1 = float(np.mean(single >= x))
        p2 = float(np.mean(pair >= x))
        se1 = math.sqrt(p1 * (1 - p1) / len(single))
        se2 = math.sqrt(p2 * (1 - p2) / len(pair))
        band = 3.0 * math.sqrt(se2 ** 2 + (2.0 * p1 * se1) ** 2)
        independence.append({'x': float(x), 'pair': p2, 'product': p1 * p1, 'ok': abs(p2 - p1 * p1) <= band})
    return {
        'eta': eta,
        'fit_range': [float(xs[0]), float(xs[-1])],
        'censored': int(np.isinf(single).sum()),
        'single': _survival_fit(single, xs),
        'pair': _survival_fit(pair, xs),
        'conditioned': _survival_fit(conditioned, xs),
        'pair_conditioned': _survival_fit(pair_conditioned, xs),
        'single_half_eta': _survival_fit(half, xs),
        'pair_half_eta': _survival_fit(np.minimum(half[0:-1:2], half[1::2]), xs),
        'independence': independence,
        'single_target': -params.kappa / 8.0,
        'pair_target': -params.kappa / 4.0,
    }


def infimum_moments(params, m_list, paths, rng, dt=0.05, eta_scale=1.0, threads=1):
    """
    -E[I1 at tau ^ M] and E[(X1_M - I1_M) 1{tau >= M}] for each M

    Paths are simulated in independent pairs (X1, X2) and tau = tau1 ^ tau2 is
    the first time t >= 1 at which either path touches its running infimum.

    Returns:
        dict: per-M means and standard errors, the log-M slope of the first and
        the last/first decade ratio of the second
    """
    m_list = [float(m) for m in m_list]
    if len(m_list) < 3 or sorted(m_list) != m_list or m_list[-1] / m_list[0] < 100.0:
        raise ConfigError("M_list must be increasing with at least 3 values spanning 2 decades")
    if paths < 4:
        raise ConfigError(f"infimum moments need at least 4 paths, got {paths}")
    eta = eta_scale * params.scale * dt ** (1.0 / params.alpha)
    sim = simulate_pair_moments(params, paths // 2, dt, eta, m_list, rng, threads=threads)
    tau = sim['tau']
    rows = []
    for c, m in enumerate(m_list):
        bottom = -np.where(tau <= m, sim['inf_at_tau'], sim['inf_at'][c])
        top = np.where(tau >= m, sim['x_at'][c] - sim['inf_at'][c], 0.0)
        rows.append({
            'M': m,
            'neg_inf_mean': float(bottom.mean()),
            'neg_inf_se': float(bottom.std(ddof=1) / math.sqrt(len(bottom))),
            'top_mean': float(top.mean()),
            'top_se': float(top.std(ddof=1) / math.sqrt(len(top))),
        })
    fit = scipy_stats.linregress(np.log(m_list), [r['neg_inf_mean'] for r in rows])
    ratio = rows[-1]['top_mean'] / rows[0]['top_mean'] if rows[0]['top_mean'] > 0 else float('inf')
    return {
        'rows': rows,
        'log_slope': float(fit.slope),
        'log_slope_stderr': float(fit.stderr),
        'top_ratio': float(ratio),
        'bottom_ok': fit.slope > 0,
        'top_ok': ratio <= 3.0,
    }


# =====================================================
# Distributional checks
# =====================================================

def positivity_estimate(params, draws, rng):
    """Empirical P[X_1 > 0] with its standard error and the 3-sigma verdict"""
    x = sample_increments(params, 1.0, draws, rng)
    p_hat = float(np.mean(x > 0))
    se = math.sqrt(params.positivity * (1.0 - params.positivity) / draws)
    return {'estimate': p_hat, 'target': params.positivity, 'se': se, 'ok': abs(p_hat - params.positivity) <= 3.0 * se}


def scaling_ks(params, c, draws, rng, level=0.01):
    """
    Two-sample KS test of X_c = c^(1/alpha) X_1, with X_c as a sum of c unit increments

    Returns:
        dict: KS statistic, p-value and the verdict at `level`
    """
    c = int(c)
    summed = sample_increments(params, 1.0, (draws, c), rng).sum(axis=1)
    scaled = c ** (1.0 / params.alpha) * sample_increments(params, 1.0, draws, rng)
    result = scipy_stats.ks_2samp(summed, scaled)
    return {'c': c, 'statistic': float(result.statistic), 'pvalue': float(result.pvalue), 'ok': result.pvalue > level}


def jump_count_statistics(params, s, paths, rng):
    """
    Counts of upward jumps >= s on [0, 1] against the Poisson law

    Returns:
        dict: mean, variance, dispersion and the 3-sigma verdict on the mean
    """
    counts = np.array([int(np.sum(sample_jumps(params, 1.0, s, rng)[1] > 0)) for _ in range(paths)])
    expected = params.a_plus / params.alpha * s ** (-params.alpha)
    mean = float(counts.mean())
    var = float(counts.var(ddof=1)) if paths > 1 else 0.0
    se = math.sqrt(expected / paths)
    return {
        's': s,
        'expected': expected,
        'mean': mean,
        'variance': var,
        'dispersion': var / mean if mean > 0 else float('nan'),
        'ok': abs(mean - expected) <= 3.0 * se,
    }


def jump_sum_statistics(params, n_list, paths, cutoff, rng):
    """
    Mean of the n largest upward jumps on [0, 1] and the log-log slope in n

    The cutoff must leave far more than max(n_list) recorded upward jumps.
    """
    sums = np.zeros((paths, len(n_list)))
    for i in range(paths):
        path = jumps_only_path(params, 1.0, cutoff, rng)
        sums[i] = [largest_jumps_sum(path, n) for n in n_list]
    means = sums.mean(axis=0)
    fit = scipy_stats.linregress(np.log(n_list), np.log(means))
    bound = 1.0 - 1.0 / params.alpha
    return {
        'n': list(n_list),
        'mean': means.tolist(),
        'slope': float(fit.slope),
        'bound': bound,
        'ok': fit.slope <= bound + 0.05,
    }


def supremum_scaling(params, m_list, paths, rng, dt=0.05, threads=1):
    """
    E[S_M] / (M^(1/alpha) E[S_1]) for each M (ratios near 1 up to grid bias)
    """
    m_list = [float(m) for m in m_list]
    horizon = max(m_list)
    steps = [int(round(m / dt)) for m in m_list]
    one = int(round(1.0 / dt))
    sizes = _chunks(paths)
    rngs = _chunk_rngs(rng, len(sizes))

    def task(i):
        count = sizes[i]
        x = np.zeros(count)
        high = np.zeros(count)
        out = np.zeros((len(m_list) + 1, count))
        done = 0
        total = int(round(horizon / dt))
        targets = [one] + steps
        while done < total:
            m = min(TIME_BLOCK, total - done)
            path = x[:, None] + np.cumsum(sample_increments(params, dt, (count, m), rngs[i]), axis=1)
            ceiling = np.maximum(high[:, None], np.maximum.accumulate(path, axis=1))
            for k, target in enumerate(targets):
                j = target - done - 1
                if 0 <= j < m:
                    out[k] = ceiling[:, j]
            x, high = path[:, -1], ceiling[:, -1]
            done += m
        return out

    sup = np.concatenate(parallel_map(task, range(len(sizes)), threads), axis=1)
    base = sup[0].mean()
    return {
        'M': m_list,
        'mean_sup': sup[1:].mean(axis=1).tolist(),
        'ratio': [float(sup[k + 1].mean() / (m ** (1.0 / params.alpha) * base)) for k, m in enumerate(m_list)],
    }


def levy_battery(settings, seed, threads=1, verbose=False):
    """
    All stable-process checks for each kappa in settings.kappa_list

    Sections whose sample-size requirements are not met are skipped and marked.

    Args:
        settings (LevySettings): Sizes and kappas
        seed (int): Master seed
        threads (int): Worker count
        verbose (bool): Print a status line per kappa

    Returns:
        tuple: (flat CSV rows, detail dictionary)
    """
    rows, details = [], {}
    for index, kappa in enumerate(settings.kappa_list):
        params = params_from_kappa(kappa)
        def stream(part, index=index):
            return make_rng(seed, STREAM_LEVY, index, part)

        if verbose:
            print(f"🎲 Lévy battery at kappa={kappa} (alpha={params.alpha:.4f})")
        positivity = positivity_estimate(params, int(settings.increments), stream(0))
        ks = [scaling_ks(params, c, max(int(settings.paths), 100), stream(1 + k)) for k, c in enumerate((2, 10))]
        jump_cutoff = min(settings.cutoff, 0.5 * max(settings.n_list) ** (-1.0 / params.alpha))
        jumps = jump_sum_statistics(params, settings.n_list, int(settings.jump_paths), jump_cutoff, stream(3))
        counts = jump_count_statistics(params, 0.1, int(settings.jump_paths), stream(4))
        detail = {
            'params': params.to_dict(),
            'positivity': positivity,
            'scaling_ks': ks,
            'jump_sums': jumps,
            'jump_counts': counts,
        }
        row = {
            'kappa': kappa,
            'alpha': params.alpha,
            'skew_beta': params.skew_beta,
            'positivity_target': params.positivity,
            'positivity_estimate': positivity['estimate'],
            'positivity_se': positivity['se'],
            'positivity_ok': positivity['ok'],
            'ks_c2_pvalue': ks[0]['pvalue'],
            'ks_c10_pvalue': ks[1]['pvalue'],
            'jump_sum_slope': jumps['slope'],
            'jump_sum_ok': jumps['ok'],
            'jump_count_dispersion': counts['dispersion'],
            'jump_count_ok': counts['ok'],
        }
        if settings.horizon >= 1e3 and settings.paths >= 1e4:
            tau = tau_statistics(params, int(settings.paths), settings.horizon, stream(5),
                                 dt=settings.dt, eta_scale=settings.eta_scale, threads=threads)
            detail['tau'] = tau
            row.update({
                'tau_single_slope': tau['single']['slope'],
                'tau_pair_slope': tau['pair']['slope'],
                'tau_conditioned_slope': tau['conditioned']['slope'],
                'tau_pair_conditioned_slope': tau['pair_conditioned']['slope'],
                'tau_single_slope_half_eta': tau['single_half_eta']['slope'],
                'tau_pair_slope_half_eta': tau['pair_half_eta']['slope'],
            })
        else:
            detail['tau'] = 'skipped: needs horizon >= 1000 and paths >= 10^4'
            if verbose:
                print(f"⚠️ Touch-time tails skipped at kappa={kappa} (horizon/paths too small)")
        within = [m for m in settings.m_list if m <= settings.horizon]
        try:
            moments = infimum_moments(params, within, int(settings.moment_paths), stream(6),
                                      dt=settings.dt, eta_scale=settings.eta_scale, threads=threads)
            detail['moments'] = moments
            row.update({
                'neg_inf_log_slope': moments['log_slope'],
                'top_decade_ratio': moments['top_ratio'],
            })
        except ConfigError as e:
            detail['moments'] = f'skipped: {e}'
        if within:
            detail['supremum'] = supremum_scaling(params, within, min(int(settings.jump_paths), 2000),
                                                  stream(7), dt=settings.dt, threads=threads)
        rows.append(row)
        details[str(kappa)] = detail
        if verbose:
            status = '✅' if positivity['ok'] else '⚠️'
            print(f"{status} kappa={kappa}: P[X>0]={positivity['estimate']:.4f} (target {params.positivity:.4f})")
    return rows, details
