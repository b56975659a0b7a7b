"""
Test Script for configuration, manifests and the command line
Run from the project root: python test_cli.py
"""

import json
import os
import sys
import tempfile
from dataclasses import replace
from unittest.mock import patch

import numpy as np

from cle_carpet.cli import EXIT_CONFIG, EXIT_OK, main, run
from cle_carpet.config import Config, RunConfig, load_config, loads_config, parse_overrides
from cle_carpet.exceptions import ConfigError
from cle_carpet.geometry import Loop
from cle_carpet.manifest import NOTE_INTENSITY_OVERRIDE, RunManifest, config_hash
from cle_carpet.selftest import render_golden, suite_golden_render
from cle_carpet.soup import LoopEnsemble

LEVY_SIZES = json.dumps({'levy': {'increments': 20000, 'jump_paths': 200, 'moment_paths': 200}})
SMALL_CARPET = {'carpet': {'grid': 256, 'eps_list': [0.0625, 0.125]}, 'stats': {'pair_count': 20}}


def print_header(text):
    """Print formatted header"""
    print("\n" + "=" * 70)
    print(f"🧪 {text}")
    print("=" * 70)


def circle(cx, cy, r, k=256):
    t = np.linspace(0.0, 2.0 * np.pi, k, endpoint=False)
    return Loop(np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)]))


def synthetic_ensemble(*args, **kwargs):
    """Domain disk of radius 0.9 with two holes, standing in for a sampled ensemble"""
    return LoopEnsemble(
        cle_loops=[circle(0.4, 0.0, 0.15), circle(-0.3, 0.3, 0.1)],
        domain_loop=circle(0.0, 0.0, 0.9),
    )


def read_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


def inside(root, path):
    root = os.path.abspath(root)
    return os.path.commonpath([root, os.path.abspath(path)]) == root


# =====================================================
# Configuration
# =====================================================

def test_default_config_validates():
    config = load_config(Config.DEFAULT_CONFIG_PATH)
    for subcommand in ('sample', 'carpet', 'dist', 'median', 'report', 'levy', 'render', 'selftest'):
        config.validate(subcommand)
    assert config.soup.intensity is None
    assert config.soup.effective_intensity == 0.5


def test_config_round_trip():
    config = load_config(Config.DEFAULT_CONFIG_PATH, {'soup': {'intensity': 0.3}, 'run': {'seed': 7}})
    back = loads_config(config.dumps())
    assert back == config
    assert back.soup.intensity == 0.3 and back.run.seed == 7


def test_override_errors():
    for blob in ('{not json', '[1, 2]'):
        try:
            parse_overrides(blob)
            raise AssertionError(f"{blob!r} must be rejected")
        except ConfigError:
            pass
    for overrides in ({'bogus': {}}, {'soup': {'nope': 1}}, {'soup': {'bridge_steps': 2.5}}, {'soup': 3}):
        try:
            load_config(None, overrides)
            raise AssertionError(f"{overrides!r} must be rejected")
        except ConfigError:
            pass


def test_validation_errors():
    cases = [
        ({'carpet': {'eps_list': [0.001]}}, None),
        ({'soup': {'min_duration': 0.01}}, None),
        ({'carpet': {'grid': 128}}, None),
        ({'carpet': {'eps_list': [0.25, 0.125]}}, None),
        ({'stats': {'replicas': 10}}, 'median'),
        ({'run': {'format': 'xml'}}, None),
    ]
    for overrides, subcommand in cases:
        try:
            load_config(None, overrides).validate(subcommand)
            raise AssertionError(f"{overrides!r} must fail validation")
        except ConfigError:
            pass


def test_config_hash_ignores_execution_keys():
    base = RunConfig()
    moved = replace(base, run=replace(base.run, threads=4, out='/tmp/elsewhere'))
    reseeded = replace(base, run=replace(base.run, seed=1))
    assert config_hash(base) == config_hash(moved)
    assert config_hash(base) != config_hash(reseeded)


def test_manifest_hash_ignores_timestamp():
    config = load_config(None, {'soup': {'intensity': 0.2}})
    first = RunManifest.build(config, 'carpet')
    second = replace(first, timestamp='2000-01-01T00:00:00+00:00')
    assert first.hash == second.hash
    assert len(first.hash) == 16
    assert NOTE_INTENSITY_OVERRIDE in first.approximation_notes
    with tempfile.TemporaryDirectory() as tmp:
        loaded = RunManifest.load(first.save(tmp))
    assert loaded.hash == first.hash


# =====================================================
# Command line
# =====================================================

def test_bad_kappa_exit_code():
    with tempfile.TemporaryDirectory() as tmp:
        assert main(['levy', '--kappa', '5', '--quiet', '--out', tmp]) == EXIT_CONFIG
        assert main(['carpet', '--set', '{broken', '--quiet', '--out', tmp]) == EXIT_CONFIG


def test_levy_run_writes_table():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, 'levy')
        code = main(['levy', '--kappa', '3', '--paths', '1000', '--horizon', '100',
                     '--set', LEVY_SIZES, '--quiet', '--out', out])
        assert code == EXIT_OK
        with open(os.path.join(out, 'levy.csv'), 'r', encoding='utf-8') as f:
            header = f.readline().strip().split(',')
        with open(os.path.join(out, 'manifest.json'), 'r', encoding='utf-8') as f:
            manifest = json.load(f)
    assert 'positivity_estimate' in header
    assert 'tau_single_slope' not in header
    assert manifest['subcommand'] == 'levy'
    assert manifest['rng_algorithm']


def test_levy_outputs_are_reproducible():
    def levy(out, threads):
        overrides = [json.loads(LEVY_SIZES), {'levy': {'kappa_list': [3.0], 'paths': 1000, 'horizon': 100.0}},
                     {'run': {'out': out, 'threads': threads}}]
        return run('levy', None, overrides, verbose=False)

    with tempfile.TemporaryDirectory() as tmp, patch.object(Config, 'SOURCE_DATE_EPOCH', '1700000000'):
        first = levy(os.path.join(tmp, 'a'), 1)
        second = levy(os.path.join(tmp, 'b'), 1)
        third = levy(os.path.join(tmp, 'c'), 3)
        assert first.manifest.hash == second.manifest.hash == third.manifest.hash
        assert first.manifest.timestamp == '2023-11-14T22:13:20+00:00'
        for name in ('levy.csv', 'levy_details.json', 'config.toml', 'manifest.json'):
            reference = read_bytes(os.path.join(first.out_dir, name))
            assert read_bytes(os.path.join(second.out_dir, name)) == reference, name
            assert read_bytes(os.path.join(third.out_dir, name)) == reference, name


def test_carpet_pipelines_on_fixed_ensemble():
    with tempfile.TemporaryDirectory() as tmp, patch('cle_carpet.cli.sample_ensemble', side_effect=synthetic_ensemble):
        results = {}
        for subcommand in ('sample', 'carpet', 'dist', 'render'):
            out = os.path.join(tmp, subcommand)
            results[subcommand] = run(subcommand, None, [SMALL_CARPET, {'run': {'out': out}}], verbose=False)
            assert results[subcommand].exit_code == EXIT_OK
            assert all(inside(out, p) for p in results[subcommand].artifacts)
            assert os.path.exists(os.path.join(out, 'manifest.json'))
            assert os.path.exists(os.path.join(out, 'config.toml'))
        assert sorted(os.listdir(tmp)) == ['carpet', 'dist', 'render', 'sample']

        fraction = results['carpet'].summary['carpet_fraction']
        expected = 1.0 - (0.15 ** 2 + 0.1 ** 2) / 0.9 ** 2
        assert abs(fraction - expected) < 0.02
        assert results['sample'].summary['cle_loops'] == 2
        assert os.path.exists(os.path.join(tmp, 'dist', 'dist.csv'))
        assert os.path.exists(os.path.join(tmp, 'dist', 'field_1.csv'))
        assert results['render'].summary['max_boxes'] > 1


def test_render_is_deterministic():
    with tempfile.TemporaryDirectory() as tmp, patch('cle_carpet.cli.sample_ensemble', side_effect=synthetic_ensemble):
        images = []
        for name in ('first', 'second'):
            out = os.path.join(tmp, name)
            result = run('render', None, [SMALL_CARPET, {'run': {'out': out}}], verbose=False)
            images.append(read_bytes(result.artifacts[0]))
        assert images[0] == images[1]
        assert images[0][:8] == b'\x89PNG\r\n\x1a\n'


def test_golden_render_skips_without_frozen_file():
    with tempfile.TemporaryDirectory() as tmp:
        missing = os.path.join(tmp, 'data', 'golden_render.png')
        result = suite_golden_render(missing)
        assert result['status'] == 'SKIP'
        assert not os.path.exists(missing)
        assert not os.path.exists(os.path.dirname(missing))


def test_golden_render_compares_bytes():
    with tempfile.TemporaryDirectory() as tmp:
        golden = render_golden(os.path.join(tmp, 'golden_render.png'))
        assert suite_golden_render(golden)['status'] == 'PASS'
        with open(golden, 'ab') as f:
            f.write(b'\0')
        assert suite_golden_render(golden)['status'] == 'FAIL'


def main_tests():
    """Run all tests in this module"""
    print_header("Configuration & CLI Tests")
    results = {}
    for name, test in list(globals().items()):
        if name.startswith('test_') and callable(test):
            try:
                test()
                results[name] = True
            except Exception as e:
                print(f"✗ {name}: {e!r}")
                results[name] = False

    passed = sum(1 for v in results.values() if v)
    for test_name, result in results.items():
        print(f"{'✓ PASS' if result else '✗ FAIL'}: {test_name}")
    print(f"\nTotal: {passed}/{len(results)} tests passed")
    return passed == len(results)


if __name__ == '__main__':
    sys.exit(0 if main_tests() else 1)
