"""
Acceptance suites for CarpetLab
Each suite returns PASS, FAIL or SKIP with the numbers it was judged on
"""

import filecmp
import os
import tempfile
import time

import numpy as np

from .carpet import BoxGraph, len_eps_exact, metric_axiom_violations
from .config import Config, SoupConfig, load_config
from .exceptions import CarpetLabError
from .levy import (
    infimum_moments,
    jump_sum_statistics,
    params_from_kappa,
    positivity_estimate,
    tau_statistics,
)
from .manifest import RunManifest
from .rng import STREAM_SELFTEST, child_seed, make_rng
from .soup import cluster_loops, cluster_loops_bruteforce, sample_loop_soup
from .stats import comparability_report, estimate_quantiles, geodesic_midpoint_defect, normalized_metric_sample, posdef_floor

GOLDEN_OVERRIDES = {
    'soup': {'kappa': 3.0, 'min_duration': 1e-4, 'raster_n': 256},
    'carpet': {'grid': 256, 'eps_list': [0.0625]},
    'run': {'seed': 20240601},
}

DETERMINISM_SUBCOMMANDS = ('sample', 'carpet', 'dist', 'render', 'levy')


def golden_config():
    """Fixed configuration of the frozen render"""
    return load_config(None, GOLDEN_OVERRIDES).validate('render')


def _result(suite, passed, **detail):
    return {'suite': suite, 'status': 'PASS' if passed else 'FAIL', 'detail': detail}


def _skip(suite, reason):
    return {'suite': suite, 'status': 'SKIP', 'detail': {'reason': reason}}


# =====================================================
# Stable-process suites
# =====================================================

def suite_positivity(config):
    rows, ok = [], True
    for i, kappa in enumerate(config.levy.kappa_list):
        params = params_from_kappa(kappa)
        est = positivity_estimate(params, int(config.levy.increments), make_rng(config.run.seed, STREAM_SELFTEST, 1, i))
        tolerance = max(0.002, 3.0 * est['se'])
        passed = abs(est['estimate'] - est['target']) <= tolerance
        ok &= passed
        rows.append({'kappa': kappa, 'estimate': est['estimate'], 'target': est['target'], 'tolerance': tolerance})
    return _result('levy_positivity', ok, rows=rows)


def suite_tau_tails(config):
    levy = config.levy
    if levy.horizon < 1e3 or levy.paths < 1e4:
        return _skip('levy_tau_tails', 'needs horizon >= 1000 and paths >= 10^4')
    params = params_from_kappa(3.0)
    tau = tau_statistics(params, int(levy.paths), levy.horizon, make_rng(config.run.seed, STREAM_SELFTEST, 2),
                         dt=levy.dt, eta_scale=levy.eta_scale, threads=config.run.threads)
    single, pair = tau['single']['slope'], tau['pair']['slope']
    passed = abs(single + 0.375) <= 0.06 and abs(pair + 0.75) <= 0.10
    return _result('levy_tau_tails', passed, single_slope=single, pair_slope=pair,
                   single_half_eta=tau['single_half_eta']['slope'], pair_half_eta=tau['pair_half_eta']['slope'],
                   conditioned_slope=tau['conditioned']['slope'],
                   pair_conditioned_slope=tau['pair_conditioned']['slope'])


def suite_jump_sums(config):
    params = params_from_kappa(3.0)
    cutoff = min(config.levy.cutoff, 0.5 * max(config.levy.n_list) ** (-1.0 / params.alpha))
    report = jump_sum_statistics(params, config.levy.n_list, int(config.levy.jump_paths), cutoff,
                                 make_rng(config.run.seed, STREAM_SELFTEST, 3))
    return _result('levy_jump_sums', report['slope'] <= 0.30, slope=report['slope'], bound=report['bound'])


def suite_infimum_moments(config):
    params = params_from_kappa(3.0)
    report = infimum_moments(params, config.levy.m_list, int(config.levy.moment_paths),
                             make_rng(config.run.seed, STREAM_SELFTEST, 4), dt=config.levy.dt,
                             eta_scale=config.levy.eta_scale, threads=config.run.threads)
    return _result('levy_infimum_moments', report['bottom_ok'] and report['top_ok'],
                   log_slope=report['log_slope'], top_ratio=report['top_ratio'])


# =====================================================
# Geometry and metric suites
# =====================================================

def random_connected_path(rng, steps=100, scale=0.05):
    """Planar random-walk polyline (a connected compact set)"""
    return np.cumsum(rng.standard_normal((steps, 2)) * scale, axis=0)


def suite_covering(config, eps=0.1):
    rng = make_rng(config.run.seed, STREAM_SELFTEST, 5)
    violations, worst = 0, np.inf
    for _ in range(config.selftest.covering_paths):
        path = random_connected_path(rng)
        full = len_eps_exact(path, eps, eps / 8.0)
        for delta in (0.25, 0.125):
            small = len_eps_exact(path, delta * eps, delta * eps / 8.0)
            ratio = small / (delta * full)
            worst = min(worst, ratio)
            if ratio < 1.0 / 18.0:
                violations += 1
    return _result('covering_lemma', violations == 0, violations=violations, worst_ratio=float(worst))


def _masks(config, count, offset, grid=None):
    from .cli import replica_mask

    for i in range(count):
        yield replica_mask(config, offset + i, grid)[1]


def suite_metric_axioms(config):
    eps = config.carpet.eps_list[0]
    totals = {'symmetry': 0, 'triangle': 0, 'triples': 0}
    for i, mask in enumerate(_masks(config, config.selftest.masks, 20_000)):
        counts = metric_axiom_violations(BoxGraph(mask, eps), config.selftest.triples,
                                         make_rng(config.run.seed, STREAM_SELFTEST, 6, i))
        for key in totals:
            totals[key] += counts[key]
    return _result('graph_metric_axioms', totals['symmetry'] == 0 and totals['triangle'] == 0, **totals)


def suite_clustering(config):
    mismatches = 0
    sizes = []
    for i in range(config.selftest.soups):
        soup = SoupConfig(kappa=3.0, min_duration=2e-3, bridge_steps=32,
                          seed=child_seed(config.run.seed, STREAM_SELFTEST, 7, i))
        loops = sample_loop_soup(soup)[:500]
        sizes.append(len(loops))
        if sorted(map(sorted, cluster_loops(loops))) != sorted(map(sorted, cluster_loops_bruteforce(loops))):
            mismatches += 1
    return _result('clustering_oracle', mismatches == 0, mismatches=mismatches, max_loops=max(sizes, default=0))


def _comparability_config(config):
    h = config.cell_size
    eps_list = [4.0 * h, 8.0 * h, 16.0 * h]
    return load_config(None, [config.to_dict(), {
        'soup': {'kappa': 3.0, 'min_duration': min(config.soup.min_duration, h * h)},
        'carpet': {'eps_list': eps_list},
    }]).validate()


def suite_comparability(config, table):
    report = comparability_report(table, 2.0, config.stats.band_m1)
    passed = report['status'] == 'PASS' and table.monotone_in_p()
    return _result('quantile_comparability', passed, spread=report['spread'],
                   monotone_in_p=table.monotone_in_p(), monotone_in_eps=table.monotone_in_eps(),
                   degenerate=report['degenerate'])


def suite_posdef(config, table):
    eps_list = table.eps_list
    coarse, fine = eps_list[1], eps_list[0]
    m_hat = dict(zip(eps_list, table.m_hat))
    floors = {coarse: [], fine: []}
    for i, mask in enumerate(_masks(config, config.selftest.ensembles, 30_000)):
        r = config.stats.posdef_fraction * mask.n * mask.h
        for eps in (coarse, fine):
            sample = normalized_metric_sample(mask, eps, m_hat[eps], config.stats.pair_count,
                                              make_rng(config.run.seed, STREAM_SELFTEST, 9, i))
            floors[eps].append(posdef_floor(sample, r))
    mean_coarse, mean_fine = float(np.mean(floors[coarse])), float(np.mean(floors[fine]))
    passed = mean_coarse > 0 and mean_fine >= 0.5 * mean_coarse
    return _result('posdef_floor_trend', passed, mean_floor_eps=mean_coarse, mean_floor_half_eps=mean_fine)


def suite_geodesic(config, eps, pairs_per_mask=16):
    medians = {}
    for factor in (1, 2):
        grid = config.carpet.grid * factor
        defects = []
        for i, mask in enumerate(_masks(config, config.selftest.ensembles, 40_000, grid)):
            rng = make_rng(config.run.seed, STREAM_SELFTEST, 10, i)
            cells = mask.carpet_index
            picks = rng.integers(0, len(cells), size=(pairs_per_mask, 2))
            pairs = list(zip(mask.cell_centers(cells[picks[:, 0]]), mask.cell_centers(cells[picks[:, 1]])))
            defects += geodesic_midpoint_defect(mask, eps, 1.0, pairs)['defects']
        medians[factor] = float(np.median(defects)) if defects else float('nan')
    passed = medians[2] <= medians[1] + 0.02
    return _result('geodesic_midpoint', passed, median_defect_n=medians[1], median_defect_2n=medians[2])


# =====================================================
# Reproducibility suites
# =====================================================

def _same_outputs(first, second):
    names = sorted(os.listdir(first))
    if names != sorted(os.listdir(second)):
        return False
    return all(filecmp.cmp(os.path.join(first, name), os.path.join(second, name), shallow=False) for name in names)


def suite_determinism(config):
    from .cli import run

    small = {
        'stats': {'pair_count': 8},
        'levy': {'kappa_list': [3.0], 'increments': 20_000, 'paths': 2_000, 'horizon': 100.0,
                 'jump_paths': 200, 'moment_paths': 500, 'm_list': [1.0, 10.0, 100.0]},
    }
    base = golden_config().to_dict()
    failures = []
    # pinned so manifest.json compares byte for byte
    saved_epoch = Config.SOURCE_DATE_EPOCH
    Config.SOURCE_DATE_EPOCH = saved_epoch or '0'
    try:
        with tempfile.TemporaryDirectory() as tmp:
            for name in DETERMINISM_SUBCOMMANDS:
                dirs = []
                for run_index, threads in enumerate((1, 1, 8)):
                    out = os.path.join(tmp, f'{name}_{run_index}')
                    run(name, None, [base, small, {'run': {'out': out, 'threads': threads}}], verbose=False)
                    dirs.append(out)
                if not (_same_outputs(dirs[0], dirs[1]) and _same_outputs(dirs[0], dirs[2])):
                    failures.append(name)
    finally:
        Config.SOURCE_DATE_EPOCH = saved_epoch
    return _result('determinism', not failures, subcommands=list(DETERMINISM_SUBCOMMANDS), failures=failures)


def render_golden(path):
    """Render the fixed golden configuration to path"""
    from .cli import render_run

    config = golden_config()
    manifest = RunManifest.build(config, 'render')
    render_run(config, manifest.hash, path)
    return path


def suite_golden_render(path=None):
    path = path or Config.GOLDEN_RENDER_PATH
    if not os.path.exists(path):
        return _skip('golden_render', f'no frozen render at {path}; create it with python freeze_golden.py')
    with tempfile.TemporaryDirectory() as tmp:
        fresh = render_golden(os.path.join(tmp, 'render.png'))
        identical = filecmp.cmp(fresh, path, shallow=False)
    return _result('golden_render', identical, golden=path)


# =====================================================
# Runner
# =====================================================

def run_selftest(config, verbose=True):
    """
    Run every acceptance suite in order

    Args:
        config (RunConfig): Validated configuration providing the suite sizes
        verbose (bool): Print one status line per suite

    Returns:
        list: Suite results
    """
    comparability_config = _comparability_config(config)
    state = {}

    def table():
        if 'table' not in state:
            state['table'] = estimate_quantiles(
                3.0, comparability_config.carpet.eps_list, config.stats.p_list,
                config.stats.replicas, comparability_config, threads=config.run.threads,
            )
        return state['table']

    suites = [
        ('levy_positivity', lambda: suite_positivity(config)),
        ('levy_tau_tails', lambda: suite_tau_tails(config)),
        ('levy_jump_sums', lambda: suite_jump_sums(config)),
        ('levy_infimum_moments', lambda: suite_infimum_moments(config)),
        ('covering_lemma', lambda: suite_covering(config)),
        ('graph_metric_axioms', lambda: suite_metric_axioms(config)),
        ('clustering_oracle', lambda: suite_clustering(config)),
        ('quantile_comparability', lambda: suite_comparability(comparability_config, table())),
        ('posdef_floor_trend', lambda: suite_posdef(comparability_config, table())),
        ('geodesic_midpoint', lambda: suite_geodesic(comparability_config, comparability_config.carpet.eps_list[0])),
        ('determinism', lambda: suite_determinism(config)),
        ('golden_render', lambda: suite_golden_render()),
    ]
    results = []
    for name, suite in suites:
        started = time.perf_counter()
        try:
            result = suite()
        except CarpetLabError as e:
            result = {'suite': name, 'status': 'FAIL', 'detail': e.to_dict()}
        result['seconds'] = round(time.perf_counter() - started, 3)
        results.append(result)
        if verbose:
            marker = {'PASS': '✅', 'FAIL': '❌', 'SKIP': '⚠️'}[result['status']]
            print(f"{marker} {name}: {result['status']} ({result['seconds']}s)")
    if verbose:
        passed = sum(r['status'] == 'PASS' for r in results)
        print(f"📊 {passed}/{len(results)} suites passed")
    return results
