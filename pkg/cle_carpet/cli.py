"""
Command-line entry point for CarpetLab
Parses flags, validates the run configuration and dispatches to the pipelines
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, replace

from .carpet import BoxGraph, boundary_diameter, chem_dist, distance_field, rasterize_carpet
from .config import Config, load_config, parse_overrides
from .exceptions import CarpetLabError, ConfigError, DisconnectedError, NoDomainLoopError, SnapError
from .formats import write_grid_csv, write_json, write_loops_binary, write_loops_text, write_mask, write_render, write_table
from .levy import levy_battery
from .manifest import NOTE_BOX_METRIC, NOTE_FINITE_VOLUME, NOTE_PRIME_ENDS, NOTE_RESTRICTION, RunManifest
from .rng import STREAM_PAIRS, STREAM_REPLICA, STREAM_SOUP, child_seed, make_rng
from .soup import sample_ensemble
from .stats import (
    REPLICA_ATTEMPTS,
    comparability_report,
    dn_components,
    estimate_quantiles,
    geodesic_midpoint_defect,
    holder_fit,
    median_scaling_slope,
    normalized_metric_sample,
    posdef_floor,
)

SUBCOMMANDS = ('sample', 'carpet', 'dist', 'median', 'report', 'levy', 'render', 'selftest')

NOTES = {
    'sample': [NOTE_RESTRICTION],
    'carpet': [NOTE_RESTRICTION],
    'dist': [NOTE_RESTRICTION, NOTE_BOX_METRIC],
    'median': [NOTE_RESTRICTION, NOTE_BOX_METRIC, NOTE_PRIME_ENDS, NOTE_FINITE_VOLUME],
    'report': [NOTE_RESTRICTION, NOTE_BOX_METRIC, NOTE_PRIME_ENDS, NOTE_FINITE_VOLUME],
    'levy': [],
    'render': [NOTE_RESTRICTION, NOTE_BOX_METRIC],
    'selftest': [NOTE_RESTRICTION, NOTE_BOX_METRIC],
}

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_ACCEPTANCE = 3

# Pairs whose realized path also gets the exact neighborhood area
REFINED_PAIRS = 4


@dataclass
class RunResult:
    subcommand: str
    exit_code: int
    out_dir: str
    manifest: RunManifest
    artifacts: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            'subcommand': self.subcommand,
            'exit_code': self.exit_code,
            'out_dir': self.out_dir,
            'manifest': self.manifest.to_dict(),
            'artifacts': [os.path.relpath(p, self.out_dir) for p in self.artifacts],
            'summary': self.summary,
        }


def resolve_out_dir(config, subcommand):
    if config.run.out:
        return os.path.abspath(config.run.out)
    return os.path.join(Config.OUTPUT_DIR, subcommand)


def soup_config(config, index=0):
    """Soup settings of ensemble `index`, seeded from the master seed"""
    return replace(config.soup, seed=child_seed(config.run.seed, STREAM_SOUP, index))


def replica_mask(config, index, grid=None):
    """Ensemble and mask of replica `index`, redrawn when the sample is unusable"""
    soup = replace(config.soup, max_attempts=1)
    for attempt in range(REPLICA_ATTEMPTS):
        seed = child_seed(config.run.seed, STREAM_REPLICA, index, attempt)
        try:
            ensemble = sample_ensemble(replace(soup, seed=seed))
            return ensemble, rasterize_carpet(ensemble, grid or config.carpet.grid)
        except NoDomainLoopError:
            continue
    raise NoDomainLoopError(f"Replica {index} failed {REPLICA_ATTEMPTS} times")


# =====================================================
# Subcommand handlers
# =====================================================

def _sample(config, manifest, out_dir, verbose):
    ensemble = sample_ensemble(soup_config(config), verbose=verbose, manifest=manifest)
    soup = ensemble.config
    args = (soup.kappa, soup.effective_intensity, soup.seed, ensemble.domain_loop, ensemble.cle_loops)
    artifacts = [
        write_loops_text(os.path.join(out_dir, 'ensemble.txt'), *args, manifest_hash=manifest.hash),
        write_loops_binary(os.path.join(out_dir, 'ensemble.bin'), *args, manifest_hash=manifest.hash),
    ]
    if config.run.raw:
        raw = (soup.kappa, soup.effective_intensity, soup.seed, None, ensemble.soup_loops)
        artifacts.append(write_loops_text(os.path.join(out_dir, 'soup.txt'), *raw, manifest_hash=manifest.hash))
        artifacts.append(write_loops_binary(os.path.join(out_dir, 'soup.bin'), *raw, manifest_hash=manifest.hash))
    summary = {'cle_loops': len(ensemble.cle_loops), 'soup_loops': len(ensemble.soup_loops), 'attempts': ensemble.attempts}
    return artifacts, summary, EXIT_OK


def _carpet(config, manifest, out_dir, verbose):
    ensemble = sample_ensemble(soup_config(config), verbose=verbose)
    mask = rasterize_carpet(ensemble, config.carpet.grid)
    artifacts = list(write_mask(os.path.join(out_dir, 'mask.pgm'), mask, manifest.hash))
    summary = {'carpet_fraction': mask.carpet_fraction, 'boundary_cells': int(len(mask.boundary_cells)), 'h': mask.h}
    return artifacts, summary, EXIT_OK


def _dist(config, manifest, out_dir, verbose):
    ensemble = sample_ensemble(soup_config(config), verbose=verbose)
    mask = rasterize_carpet(ensemble, config.carpet.grid)
    source = mask.nearest_carpet((0.0, 0.0))
    rng = make_rng(config.run.seed, STREAM_PAIRS)
    cells = mask.carpet_index
    picks = rng.integers(0, len(cells), size=(config.stats.pair_count, 2))
    z_points = mask.cell_centers(cells[picks[:, 0]])
    w_points = mask.cell_centers(cells[picks[:, 1]])

    artifacts, rows, diameters = [], [], {}
    for j, eps in enumerate(config.carpet.eps_list):
        graph = BoxGraph(mask, eps)
        field_ = distance_field(mask, eps, source, graph=graph)
        artifacts.append(write_grid_csv(os.path.join(out_dir, f'field_{j}.csv'), field_.boxes, manifest.hash))
        try:
            diameters[eps] = boundary_diameter(mask, eps, config.carpet.net_count, graph=graph)
        except DisconnectedError:
            diameters[eps] = None
        for i, (z, w) in enumerate(zip(z_points, w_points)):
            row = {'eps': eps, 'pair': i, 'zx': z[0], 'zy': z[1], 'wx': w[0], 'wy': w[1]}
            try:
                cost = chem_dist(mask, eps, z, w, refine=i < REFINED_PAIRS, graph=graph)
                row.update({'status': 'ok', 'boxes': cost.boxes, 'area_estimate': cost.area_estimate,
                            'exact_area': '' if cost.exact_area is None else cost.exact_area})
            except (DisconnectedError, SnapError) as e:
                row.update({'status': e.code})
            rows.append(row)
    artifacts.append(write_table(os.path.join(out_dir, 'dist'), rows, config.run.format, manifest.hash))
    summary = {'source': list(source), 'boundary_diameter': {str(k): v for k, v in diameters.items()}}
    return artifacts, summary, EXIT_OK


def _quantiles(config, manifest, verbose):
    if verbose:
        print(f"🎲 Estimating quantiles over {config.stats.replicas} replicas")
    table = estimate_quantiles(
        config.soup.kappa, config.carpet.eps_list, config.stats.p_list,
        config.stats.replicas, config, threads=config.run.threads,
    )
    table.manifest_hash = manifest.hash
    return table


def _median(config, manifest, out_dir, verbose):
    table = _quantiles(config, manifest, verbose)
    try:
        scaling = median_scaling_slope(table)
    except CarpetLabError as e:
        scaling = {'error': e.message}
    extra = {
        'median_scaling': scaling,
        'monotone_in_p': table.monotone_in_p(),
        'monotone_in_eps': table.monotone_in_eps(),
    }
    artifacts = [write_table(os.path.join(out_dir, 'quantiles'), table.rows(), config.run.format, manifest.hash, extra)]
    summary = {'m_hat': [float(v) for v in table.m_hat], 'median_scaling': scaling, 'monotone_in_eps': extra['monotone_in_eps']}
    return artifacts, summary, EXIT_OK


def _metric_checks(config, table, index):
    """Hölder, positive-definiteness, geodesic and d_n statistics on one replica"""
    _, mask = replica_mask(config, 10_000 + index)
    eps_list = config.carpet.eps_list
    coarse = eps_list[1] if len(eps_list) > 1 else eps_list[0]
    fine = eps_list[0]
    m_hat = dict(zip(eps_list, table.m_hat))
    samples = {}
    for eps in (coarse, fine):
        rng = make_rng(config.run.seed, STREAM_PAIRS, index)
        samples[eps] = normalized_metric_sample(mask, eps, m_hat[eps], config.stats.pair_count, rng)
    r = config.stats.posdef_fraction * mask.n * mask.h
    out = {'ensemble': index, 'coarse_eps': coarse, 'fine_eps': fine, 'r': r}
    for label, eps in (('coarse', coarse), ('fine', fine)):
        try:
            out[f'posdef_{label}'] = posdef_floor(samples[eps], r)
        except CarpetLabError as e:
            out[f'posdef_{label}'] = None
            out[f'posdef_{label}_error'] = e.message
    d0, d_h = dn_components(samples[coarse], samples[fine])
    out.update({'dn_d0': d0, 'dn_hausdorff': d_h, 'dn': d0 + d_h})
    pairs = [(p[:2], p[2:]) for p in samples[fine].points[:32]]
    defect = geodesic_midpoint_defect(mask, fine, m_hat[fine], pairs)
    defect.pop('defects')
    out['geodesic'] = defect
    return out, samples[fine]


def _report(config, manifest, out_dir, verbose):
    table = _quantiles(config, manifest, verbose)
    comparability = comparability_report(table, config.stats.m0, config.stats.band_m1)
    checks, fine_samples = [], []
    for index in range(config.stats.report_ensembles):
        result, sample = _metric_checks(config, table, index)
        checks.append(result)
        fine_samples.append(sample)
    try:
        fit = holder_fit(fine_samples)
        holder = {'slope': fit.slope, 'ci_low': fit.ci_low, 'ci_high': fit.ci_high,
                  'pairs': fit.pairs, 'bins': fit.bins, 'excludes_zero': fit.excludes_zero}
    except CarpetLabError as e:
        holder = {'error': e.message}

    rows = [{'section': 'comparability', **r} for r in comparability['ratios']]
    rows += [{'section': 'spread', 'p': p, 'value': s} for p, s in comparability['spread'].items()]
    for c in checks:
        rows.append({'section': 'posdef', 'ensemble': c['ensemble'], 'eps': c['coarse_eps'], 'value': c['posdef_coarse']})
        rows.append({'section': 'posdef', 'ensemble': c['ensemble'], 'eps': c['fine_eps'], 'value': c['posdef_fine']})
        rows.append({'section': 'dn', 'ensemble': c['ensemble'], 'value': c['dn']})
        rows.append({'section': 'geodesic', 'ensemble': c['ensemble'], 'eps': c['fine_eps'], 'value': c['geodesic']['median']})
    if 'slope' in holder:
        rows.append({'section': 'holder', 'value': holder['slope'], 'ci_low': holder['ci_low'], 'ci_high': holder['ci_high']})

    body = {'comparability': comparability, 'metric_checks': checks, 'holder': holder}
    artifacts = [write_table(os.path.join(out_dir, 'report'), rows, config.run.format, manifest.hash, body)]
    if config.run.format == 'csv':
        artifacts.append(write_json(os.path.join(out_dir, 'report.json'), body, manifest.hash))
    return artifacts, {'comparability': comparability['status'], 'holder': holder.get('slope')}, EXIT_OK


def _levy(config, manifest, out_dir, verbose):
    rows, details = levy_battery(config.levy, config.run.seed, threads=config.run.threads, verbose=verbose)
    artifacts = [write_table(os.path.join(out_dir, 'levy'), rows, config.run.format, manifest.hash, {'details': details})]
    if config.run.format == 'csv':
        artifacts.append(write_json(os.path.join(out_dir, 'levy_details.json'), {'details': details}, manifest.hash))
    summary = {str(r['kappa']): r['positivity_estimate'] for r in rows}
    return artifacts, summary, EXIT_OK


def render_run(config, manifest_hash, path, verbose=False):
    """Sample, rasterize and render the distance field from the carpet point nearest 0"""
    ensemble = sample_ensemble(soup_config(config), verbose=verbose)
    mask = rasterize_carpet(ensemble, config.carpet.grid)
    eps = config.carpet.eps_list[0]
    field_ = distance_field(mask, eps, mask.nearest_carpet((0.0, 0.0)))
    write_render(path, mask, field_, manifest_hash)
    return mask, field_


def _render(config, manifest, out_dir, verbose):
    path = os.path.join(out_dir, 'render.png')
    _, field_ = render_run(config, manifest.hash, path, verbose)
    reachable = field_.boxes[field_.boxes > 0]
    return [path], {'max_boxes': int(reachable.max()) if reachable.size else 0}, EXIT_OK


def _selftest(config, manifest, out_dir, verbose):
    from .selftest import run_selftest

    results = run_selftest(config, verbose=verbose)
    failed = [r['suite'] for r in results if r['status'] == 'FAIL']
    path = write_json(os.path.join(out_dir, 'selftest.json'), {'suites': results, 'failed': failed}, manifest.hash)
    return [path], {'failed': failed, 'suites': len(results)}, EXIT_ACCEPTANCE if failed else EXIT_OK


HANDLERS = {
    'sample': _sample,
    'carpet': _carpet,
    'dist': _dist,
    'median': _median,
    'report': _report,
    'levy': _levy,
    'render': _render,
    'selftest': _selftest,
}


def run(subcommand, config_path=None, overrides=None, verbose=True):
    """
    Run one subcommand

    Args:
        subcommand (str): One of SUBCOMMANDS
        config_path (str): TOML configuration; None uses built-in defaults
        overrides (dict or list): Override blobs deep-merged over the file
        verbose (bool): Print status lines

    Returns:
        RunResult: Exit code, manifest and written artifacts

    Raises:
        ConfigError: Invalid configuration
        CarpetLabError: Pipeline failure
    """
    if subcommand not in HANDLERS:
        raise ConfigError(f"Unknown subcommand: {subcommand}")
    config = load_config(config_path, overrides).validate(subcommand)
    out_dir = resolve_out_dir(config, subcommand)
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest.build(config, subcommand, NOTES[subcommand])
    if verbose:
        print(f"🎲 {subcommand}: seed={config.run.seed} manifest={manifest.hash}")

    artifacts, summary, exit_code = HANDLERS[subcommand](config, manifest, out_dir, verbose)
    artifacts.append(manifest.save(out_dir))
    with open(os.path.join(out_dir, 'config.toml'), 'w', encoding='utf-8', newline='\n') as f:
        f.write(f'# manifest {manifest.hash}\n')
        f.write(config.dumps(include_execution=False))
    artifacts.append(os.path.join(out_dir, 'config.toml'))

    if verbose:
        marker = '✅' if exit_code == EXIT_OK else '❌'
        print(f"{marker} {subcommand} finished with exit code {exit_code}")
        print(f"💾 {len(artifacts)} artifacts saved to {out_dir}")
    return RunResult(subcommand, exit_code, out_dir, manifest, artifacts, summary)


# =====================================================
# Argument parsing
# =====================================================

def _eps_list(text):
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"eps must be comma-separated numbers: {text}") from e


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='TOML run configuration')
    common.add_argument('--set', action='append', default=[], metavar='JSON',
                        help='JSON override blob, e.g. \'{"soup": {"kappa": 3.5}}\'')
    common.add_argument('--kappa', type=float)
    common.add_argument('--eps', type=_eps_list, help='comma-separated box sizes')
    common.add_argument('--grid', type=int)
    common.add_argument('--replicas', type=int)
    common.add_argument('--seed', type=int)
    common.add_argument('--out')
    common.add_argument('--threads', type=int)
    common.add_argument('--format', choices=('csv', 'json'))
    common.add_argument('--paths', type=int, help='Lévy paths per estimate')
    common.add_argument('--horizon', type=float, help='Lévy simulation horizon')
    common.add_argument('--raw', action='store_true', help='also dump the raw soup (sample)')
    common.add_argument('--quiet', action='store_true')

    parser = argparse.ArgumentParser(prog='carpetlab', description='CLE carpet chemical-distance toolkit')
    sub = parser.add_subparsers(dest='subcommand', required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def flag_overrides(args):
    """Dedicated flags as one override blob (applied after --set blobs)"""
    blob = {}

    def put(section, key, value):
        if value is not None:
            blob.setdefault(section, {})[key] = value

    put('soup', 'kappa', args.kappa)
    if args.kappa is not None:
        put('levy', 'kappa_list', [args.kappa])
    put('carpet', 'eps_list', args.eps)
    put('carpet', 'grid', args.grid)
    put('stats', 'replicas', args.replicas)
    put('run', 'seed', args.seed)
    put('run', 'out', args.out)
    put('run', 'threads', args.threads)
    put('run', 'format', args.format)
    put('levy', 'paths', args.paths)
    put('levy', 'horizon', args.horizon)
    if args.raw:
        put('run', 'raw', True)
    return blob


def main(argv=None):
    """Parse arguments, run, and map errors to exit codes"""
    parser = build_parser()
    args = parser.parse_args(argv)
    config_path = args.config
    if config_path is None and os.path.exists(Config.DEFAULT_CONFIG_PATH):
        config_path = Config.DEFAULT_CONFIG_PATH
    try:
        overrides = [parse_overrides(blob) for blob in args.set] + [flag_overrides(args)]
        result = run(args.subcommand, config_path, overrides, verbose=not args.quiet)
    except ConfigError as e:
        print(json.dumps(e.to_dict(), sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG
    except CarpetLabError as e:
        print(json.dumps(e.to_dict(), sort_keys=True), file=sys.stderr)
        return EXIT_ERROR
    if result.exit_code == EXIT_ACCEPTANCE:
        failed = result.summary.get('failed', [])
        print(json.dumps({'status': 'error', 'code': 'ACCEPTANCE_FAILED', 'message': f"failed suites: {failed}"},
                         sort_keys=True), file=sys.stderr)
    return result.exit_code


if __name__ == '__main__':
    sys.exit(main())
