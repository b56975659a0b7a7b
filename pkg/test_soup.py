"""
Test Script for the loop soup
Brownian loops, clustering and outermost boundaries
"""

import sys
from dataclasses import replace

import numpy as np

from cle_carpet.config import RunConfig, SoupConfig, default_intensity
from cle_carpet.exceptions import ConfigError, NoDomainLoopError
from cle_carpet.geometry import Loop
from cle_carpet.manifest import RunManifest
from cle_carpet.rng import make_rng
from cle_carpet.soup import (
    UnionFind,
    cluster_loops,
    cluster_loops_bruteforce,
    outermost_boundaries,
    rasterized_overlaps,
    sample_brownian_loop,
    sample_ensemble,
    sample_loop_soup,
    soup_mass,
)


def print_header(text):
    """Print formatted header"""
    print("\n" + "=" * 70)
    print(f"🧪 {text}")
    print("=" * 70)


def circle(cx, cy, r, k=256):
    t = np.linspace(0.0, 2.0 * np.pi, k, endpoint=False)
    return Loop(np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)]))


# =====================================================
# Brownian loops
# =====================================================

def test_brownian_loop_is_rooted():
    loop = sample_brownian_loop((0.3, -0.2), 0.5, 64, make_rng(1, 99))
    assert len(loop) == 64
    assert np.array_equal(loop.vertices[0], np.array([0.3, -0.2]))


def test_brownian_loop_rejects_short_bridges():
    try:
        sample_brownian_loop((0.0, 0.0), 1.0, 7, make_rng(1, 99))
    except ConfigError:
        return
    raise AssertionError("steps < 8 must be rejected")


def test_brownian_loop_translation():
    base = sample_brownian_loop((0.0, 0.0), 0.2, 32, make_rng(5, 1))
    moved = sample_brownian_loop((1.0, 1.0), 0.2, 32, make_rng(5, 1))
    assert np.allclose(moved.vertices, base.vertices + 1.0)


def test_brownian_loop_scaling():
    small = sample_brownian_loop((0.0, 0.0), 0.01, 32, make_rng(8, 1))
    large = sample_brownian_loop((0.0, 0.0), 0.04, 32, make_rng(8, 1))
    assert np.allclose(large.vertices, 2.0 * small.vertices)


def test_max_excursion_matches_fine_steps():
    """Mean squared excursion at `steps` agrees with an 8x refined discretization"""
    def excursions(steps, seed):
        rng = make_rng(seed, 7)
        return np.array([
            np.max(np.sum(sample_brownian_loop((0.0, 0.0), 1.0, steps, rng).vertices ** 2, axis=1))
            for _ in range(4000)
        ])

    coarse = excursions(64, 1)
    fine = excursions(512, 2)
    gap = abs(coarse.mean() - fine.mean())
    se = np.sqrt(coarse.var() / len(coarse) + fine.var() / len(fine))
    # the coarse grid misses part of every excursion
    assert coarse.mean() <= fine.mean() + 4.0 * se
    assert gap <= 4.0 * se + 0.2 * fine.mean()


# =====================================================
# Soup
# =====================================================

def test_zero_intensity_soup_is_empty():
    assert sample_loop_soup(SoupConfig(intensity=0.0, seed=3)) == []


def test_default_intensity_at_kappa_3():
    assert abs(default_intensity(3.0) - 0.5) < 1e-15
    assert SoupConfig(kappa=3.0).effective_intensity == 0.5
    assert not SoupConfig(kappa=3.0).intensity_overridden


def test_soup_count_matches_loop_measure():
    config = SoupConfig(kappa=3.0, intensity=0.5, min_duration=1e-3, bridge_steps=8, restrict_to_domain=False)
    expected = soup_mass(config)
    assert abs(expected - 250.0) < 1e-9
    counts = [len(sample_loop_soup(replace(config, seed=seed))) for seed in range(200)]
    se = np.sqrt(expected / len(counts))
    assert abs(np.mean(counts) - expected) <= 4.0 * se


def test_restricted_soup_stays_in_disk():
    loops = sample_loop_soup(SoupConfig(min_duration=2e-3, bridge_steps=16, seed=11))
    for loop in loops:
        assert np.all(np.hypot(loop.vertices[:, 0], loop.vertices[:, 1]) < 1.0)


# =====================================================
# Clustering
# =====================================================

def test_union_find_groups():
    uf = UnionFind(5)
    uf.union(0, 3)
    uf.union(3, 4)
    assert uf.groups() == [{0, 3, 4}, {1}, {2}]


def test_disjoint_circles_are_singletons():
    clusters = cluster_loops([circle(0.0, 0.0, 1.0, 64), circle(5.0, 0.0, 1.0, 64)])
    assert clusters == [{0}, {1}]


def test_overlapping_circles_cluster():
    loops = [circle(0.0, 0.0, 1.0, 64), circle(1.0, 0.0, 1.0, 64), circle(10.0, 10.0, 1.0, 64)]
    clusters = cluster_loops(loops)
    assert sorted(len(c) for c in clusters) == [1, 2]
    assert {0, 1} in clusters


def test_clustering_matches_bruteforce():
    for seed in range(5):
        loops = sample_loop_soup(SoupConfig(min_duration=2e-3, bridge_steps=32, seed=seed))[:500]
        fast = cluster_loops(loops)
        slow = cluster_loops_bruteforce(loops)
        assert fast == slow
        covered = sorted(i for block in fast for i in block)
        assert covered == list(range(len(loops)))


# =====================================================
# Outermost boundaries
# =====================================================

def test_single_circle_boundary():
    loops = [circle(0.0, 0.0, 0.5)]
    ensemble = outermost_boundaries(cluster_loops(loops), loops, 256)
    assert len(ensemble.cle_loops) == 1
    traced = ensemble.cle_loops[0]
    radii = np.hypot(traced.vertices[:, 0], traced.vertices[:, 1])
    assert np.all(np.abs(radii - 0.5) <= 3.0 * ensemble.grid.h)
    assert ensemble.domain_loop is traced
    assert abs(traced.winding_number((0.0, 0.0))) == 1


def test_nested_circle_is_discarded():
    loops = [circle(0.1, 0.0, 0.3), circle(0.0, 0.0, 1.0)]
    ensemble = outermost_boundaries(cluster_loops(loops), loops, 256)
    assert len(ensemble.cle_loops) == 1
    radii = np.hypot(ensemble.cle_loops[0].vertices[:, 0], ensemble.cle_loops[0].vertices[:, 1])
    assert np.all(np.abs(radii - 1.0) <= 3.0 * ensemble.grid.h)


def test_no_domain_loop_when_origin_uncovered():
    loops = [circle(3.0, 3.0, 0.5)]
    ensemble = outermost_boundaries(cluster_loops(loops), loops, 256)
    assert ensemble.domain_loop is None
    try:
        ensemble.require_domain()
    except NoDomainLoopError:
        return
    raise AssertionError("require_domain must fail without a loop around 0")


def test_raster_too_coarse():
    loops = [circle(0.0, 0.0, 0.5)]
    try:
        outermost_boundaries(cluster_loops(loops), loops, 128)
    except ConfigError:
        return
    raise AssertionError("raster_n < 256 must be rejected")


def test_outermost_loops_are_disjoint():
    loops = sample_loop_soup(SoupConfig(min_duration=1e-3, bridge_steps=32, seed=21))
    ensemble = outermost_boundaries(cluster_loops(loops), loops, 256)
    assert ensemble.cle_loops
    assert rasterized_overlaps(ensemble.cle_loops, ensemble.grid) == 0


def test_ensemble_is_seed_deterministic():
    config = SoupConfig(min_duration=1e-4, bridge_steps=32, raster_n=256, seed=42)
    manifest = RunManifest.build(RunConfig(soup=config), 'sample')
    first = sample_ensemble(config, manifest=manifest)
    second = sample_ensemble(config)
    assert first.domain_loop is not None
    assert bool(first.domain_loop.contains(np.zeros((1, 2)))[0])
    assert first.domain_loop == second.domain_loop
    assert first.cle_loops == second.cle_loops
    assert first.attempts == second.attempts
    assert first.manifest is manifest and second.manifest is None


def main():
    """Run all tests in this module"""
    print_header("Loop Soup Tests")
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
    sys.exit(0 if main() else 1)
