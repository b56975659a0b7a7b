"""
Test Script for the stable Lévy process tools
Parameters, increments, jumps and running-infimum statistics
"""

import math
import sys

import numpy as np

from cle_carpet.exceptions import ConfigError
from cle_carpet.levy import (
    StablePath,
    infimum_moments,
    jump_count_statistics,
    jump_sum_statistics,
    largest_jumps_sum,
    params_from_kappa,
    positivity_estimate,
    sample_increment,
    sample_increments,
    sample_jumps,
    sample_path_with_jumps,
    scaling_ks,
    simulate_pair_moments,
    simulate_touch_times,
    symmetric_params,
    tau_statistics,
)
from cle_carpet.rng import make_rng


def print_header(text):
    """Print formatted header"""
    print("\n" + "=" * 70)
    print(f"🧪 {text}")
    print("=" * 70)


# =====================================================
# Parameters
# =====================================================

def test_kappa_three_parameters():
    params = params_from_kappa(3.0)
    assert math.isclose(params.alpha, 4.0 / 3.0)
    assert math.isclose(params.u, 0.5)
    assert math.isclose(params.skew_beta, -1.0 / 3.0)
    assert math.isclose(params.positivity, 5.0 / 8.0)
    assert math.isclose(params.a_plus, 1.0 / 3.0)
    assert math.isclose(params.a_minus, 2.0 / 3.0)


def test_skewness_identity_over_range():
    rng = make_rng(1, 4, 99)
    for kappa in rng.uniform(8.0 / 3.0 + 1e-6, 4.0 - 1e-6, 100):
        params = params_from_kappa(kappa)
        beta = params.skew_beta
        assert abs((1.0 + beta) / (1.0 - beta) - params.u) <= 1e-12
        assert math.isclose(params.a_plus + params.a_minus, 1.0)
        assert -1.0 <= beta <= 0.0


def test_kappa_out_of_range():
    for kappa in (2.5, 8.0 / 3.0, 4.0):
        try:
            params_from_kappa(kappa)
            raise AssertionError(f"kappa={kappa} must be rejected")
        except ConfigError:
            pass


def test_limit_near_four():
    params = params_from_kappa(3.999)
    assert abs(params.alpha - 1.0) < 1e-3
    assert abs(params.u - 1.0) < 1e-3
    assert abs(params.skew_beta) < 1e-3
    assert abs(params.positivity - 0.5) < 1e-3


def test_params_dict():
    body = params_from_kappa(3.0).to_dict()
    assert set(body) == {'kappa', 'alpha', 'u', 'skew_beta', 'positivity', 'a_plus', 'a_minus', 'scale'}
    assert body['scale'] > 0


# =====================================================
# Increments
# =====================================================

def test_positivity_matches_target():
    params = params_from_kappa(3.0)
    result = positivity_estimate(params, 200_000, make_rng(2, 4))
    assert abs(result['estimate'] - 0.625) <= 4.0 * result['se']


def test_symmetric_median_is_zero():
    x = sample_increments(symmetric_params(4.0 / 3.0), 1.0, 100_000, make_rng(3, 4))
    assert abs(np.median(x)) <= 0.04


def test_self_similar_scaling():
    params = params_from_kappa(3.0)
    result = scaling_ks(params, 2, 20_000, make_rng(4, 4))
    assert result['ok'], result


def test_single_increment_scales_with_dt():
    params = params_from_kappa(3.0)
    one = sample_increment(params, 1.0, make_rng(5, 4))
    eight = sample_increment(params, 8.0, make_rng(5, 4))
    assert one == float(sample_increments(params, 1.0, 1, make_rng(5, 4))[0])
    assert math.isclose(eight, 8.0 ** (1.0 / params.alpha) * one, rel_tol=1e-12)
    try:
        sample_increment(params, -1.0, make_rng(5, 4))
        raise AssertionError("negative dt must be rejected")
    except ConfigError:
        pass


def test_increments_need_positive_dt():
    try:
        sample_increments(params_from_kappa(3.0), 0.0, 10, make_rng(1, 4))
    except ConfigError:
        return
    raise AssertionError("dt = 0 must be rejected")


# =====================================================
# Jumps and paths
# =====================================================

def test_jumps_are_sorted_and_large():
    times, sizes = sample_jumps(params_from_kappa(3.0), 2.0, 0.05, make_rng(5, 4))
    assert len(times) == len(sizes) > 0
    assert np.all(np.diff(times) >= 0)
    assert np.all((times >= 0) & (times <= 2.0))
    assert np.all(np.abs(sizes) >= 0.05)


def test_path_invariants():
    params = params_from_kappa(3.0)
    path = sample_path_with_jumps(params, 1.0, 0.004, 0.1, make_rng(6, 4))
    assert len(path.times) == len(path.values) == 251
    assert path.values[0] == 0.0
    assert np.all(np.abs(path.jump_sizes) >= 0.1)
    assert np.all(np.abs(np.diff(path.remainder())) < 0.1 * (1.0 + 1e-9))
    assert np.all(np.diff(path.running_infimum) <= 0)
    assert np.all(np.diff(path.running_supremum) >= 0)


def test_path_rejects_coarse_grid():
    try:
        sample_path_with_jumps(params_from_kappa(3.0), 1.0, 0.01, 0.1, make_rng(6, 4))
    except ConfigError:
        return
    raise AssertionError("dt above cutoff^alpha / 10 must be rejected")


def test_jump_counts_are_poisson():
    result = jump_count_statistics(params_from_kappa(3.0), 0.5, 10_000, make_rng(7, 4))
    assert result['ok'], result
    assert abs(result['dispersion'] - 1.0) <= 0.1


def test_largest_jumps_sum():
    path = StablePath(
        times=np.array([0.0, 0.1, 0.2, 0.3, 0.4, 1.5]),
        values=np.array([0.0, 3.0, 4.0, 6.0, 1.0, 11.0]),
        jump_times=np.array([0.1, 0.2, 0.3, 0.4, 1.5]),
        jump_sizes=np.array([3.0, 1.0, 2.0, -5.0, 10.0]),
        cutoff=0.5,
    )
    assert largest_jumps_sum(path, 2) == 5.0
    assert largest_jumps_sum(path, 10) == 6.0
    try:
        largest_jumps_sum(path, 0)
        raise AssertionError("n = 0 must be rejected")
    except ConfigError:
        pass


def test_jump_sum_slope_bound():
    params = params_from_kappa(3.0)
    result = jump_sum_statistics(params, [1, 2, 4, 8, 16, 32, 64], 1000, 1e-3, make_rng(8, 4))
    assert math.isclose(result['bound'], 0.25)
    assert result['slope'] <= 0.30
    assert all(b >= a for a, b in zip(result['mean'], result['mean'][1:]))


# =====================================================
# Running infimum
# =====================================================

def test_tau_needs_long_runs():
    try:
        tau_statistics(params_from_kappa(3.0), 100, 100.0, make_rng(9, 4))
    except ConfigError:
        return
    raise AssertionError("short tau runs must be rejected in strict mode")


def test_tau_structure_when_not_strict():
    params = params_from_kappa(3.0)
    result = tau_statistics(params, 200, 400.0, make_rng(9, 4), strict=False)
    assert result['fit_range'] == [10.0, 40.0]
    assert 0 <= result['censored'] <= 200
    assert len(result['independence']) == 12
    assert math.isclose(result['single_target'], -3.0 / 8.0)
    assert math.isclose(result['pair_target'], -3.0 / 4.0)
    for plain, conditioned in (('single', 'conditioned'), ('pair', 'pair_conditioned')):
        survival = np.array(result[plain]['survival'])
        assert np.all(np.array(result[conditioned]['survival']) <= survival)


def test_tau_tail_exponents():
    params = params_from_kappa(3.0)
    result = tau_statistics(params, 20_000, 1000.0, make_rng(12, 4), strict=False)
    assert result['fit_range'] == [10.0, 100.0]
    assert abs(result['single']['slope'] + 0.375) <= 0.1, result['single']
    assert abs(result['pair']['slope'] + 0.75) <= 0.15, result['pair']
    assert result['pair_conditioned']['slope'] < result['single']['slope']


def test_infimum_moments_are_monotone():
    result = infimum_moments(params_from_kappa(3.0), [1, 10, 100], 500, make_rng(10, 4))
    means = [row['neg_inf_mean'] for row in result['rows']]
    assert means[0] <= means[1] <= means[2]
    assert all(row['top_mean'] >= 0 for row in result['rows'])


def test_top_moment_stays_bounded():
    # stopped at the first touch of either path in the pair
    result = infimum_moments(params_from_kappa(3.0), [10, 100, 1000], 4000, make_rng(13, 4), dt=0.1)
    assert result['top_ratio'] <= 3.0, [row['top_mean'] for row in result['rows']]
    assert result['top_ok']
    assert result['log_slope'] > 0 and result['bottom_ok']


def test_infimum_moments_need_three_values():
    try:
        infimum_moments(params_from_kappa(3.0), [1, 100], 10, make_rng(10, 4))
    except ConfigError:
        return
    raise AssertionError("fewer than 3 M values must be rejected")


def test_touch_times_thread_invariant():
    params = params_from_kappa(3.0)
    eta = params.scale * 0.05 ** (1.0 / params.alpha)
    first = simulate_touch_times(params, 9000, 20.0, 0.05, [eta], make_rng(11, 4), threads=1)
    second = simulate_touch_times(params, 9000, 20.0, 0.05, [eta], make_rng(11, 4), threads=3)
    assert first['tau'].shape == (1, 9000)
    for key in first:
        assert np.array_equal(first[key], second[key], equal_nan=True), key


def test_pair_moments_thread_invariant():
    params = params_from_kappa(3.0)
    eta = params.scale * 0.1 ** (1.0 / params.alpha)
    first = simulate_pair_moments(params, 5000, 0.1, eta, [1.0, 5.0, 20.0], make_rng(14, 4), threads=1)
    second = simulate_pair_moments(params, 5000, 0.1, eta, [1.0, 5.0, 20.0], make_rng(14, 4), threads=3)
    assert first['x_at'].shape == (3, 5000)
    assert np.all(first['tau'] >= 1.0)
    for key in first:
        assert np.array_equal(first[key], second[key], equal_nan=True), key


def main():
    """Run all tests in this module"""
    print_header("Stable Process Tests")
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
