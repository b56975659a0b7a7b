"""
Test Script for the CarpetLab JSON service
Exercises every endpoint through the Flask test client
"""

import os
import sys
import tempfile

from cle_carpet.app import create_app
from cle_carpet.config import Config

LEVY_OVERRIDES = {
    'levy': {
        'kappa_list': [3.0],
        'increments': 20000,
        'paths': 1000,
        'horizon': 100.0,
        'jump_paths': 200,
        'moment_paths': 200,
    }
}


def print_header(text):
    """Print formatted header"""
    print("\n" + "=" * 70)
    print(f"🧪 {text}")
    print("=" * 70)


def client():
    app = create_app(verbose=False)
    app.config['TESTING'] = True
    return app.test_client()


def test_health_check():
    """Test health check endpoint"""
    print_header("Testing Health Check")
    response = client().get('/api/health')
    body = response.get_json()
    print(f"✓ Status Code: {response.status_code}")
    print(f"✓ Response: {body}")
    return response.status_code == 200 and body['status'] == 'success' and body['version']


def test_params():
    """Test stable parameters for valid and invalid kappa"""
    print_header("Testing Stable Parameters")
    api = client()

    response = api.get('/api/params?kappa=3')
    data = response.get_json()['data']
    print(f"✓ kappa=3: {data}")
    ok = response.status_code == 200 and abs(data['positivity'] - 0.625) < 1e-12

    for bad in ('5', 'abc'):
        response = api.get(f'/api/params?kappa={bad}')
        body = response.get_json()
        print(f"  kappa={bad}: {response.status_code} {body['code']}")
        ok = ok and response.status_code == 400 and body['code'] == 'INVALID_KAPPA'
    return ok


def test_run_validation():
    """Test request validation on /api/run"""
    print_header("Testing Run Validation")
    api = client()
    cases = [
        ({}, 'MISSING_SUBCOMMAND'),
        ({'subcommand': 'selftest'}, 'INVALID_SUBCOMMAND'),
        ({'subcommand': 'nope'}, 'INVALID_SUBCOMMAND'),
        ({'subcommand': 'levy', 'overrides': [1]}, 'INVALID_OVERRIDES'),
        ({'subcommand': 'levy', 'overrides': {'soup': {'kappa': 5.0}}}, 'CONFIG_ERROR'),
    ]
    ok = True
    for payload, code in cases:
        response = api.post('/api/run', json=payload)
        body = response.get_json()
        print(f"  {payload}: {response.status_code} {body['code']}")
        ok = ok and response.status_code == 400 and body['code'] == code
    return ok


def test_levy_run_and_listing():
    """Test a small levy run and the run listing"""
    print_header("Testing Levy Run")
    original = Config.OUTPUT_DIR
    with tempfile.TemporaryDirectory() as tmp:
        Config.OUTPUT_DIR = tmp
        try:
            api = client()
            response = api.post('/api/run', json={'subcommand': 'levy', 'overrides': LEVY_OVERRIDES})
            body = response.get_json()
            print(f"✓ Status Code: {response.status_code}")
            if response.status_code != 200:
                print(f"✗ Response: {body}")
                return False
            data = body['data']
            print(f"✓ Artifacts: {data['artifacts']}")
            landed = os.path.dirname(os.path.abspath(data['out_dir'])) == os.path.abspath(tmp)

            listing = api.get('/api/runs').get_json()['data']
            print(f"✓ Runs: {listing['count']}")
            return (
                body['code'] == 'RUN_COMPLETE'
                and data['exit_code'] == 0
                and 'levy.csv' in data['artifacts']
                and landed
                and listing['count'] == 1
                and listing['runs'][0]['manifest_hash'] == data['manifest']['manifest_hash']
            )
        finally:
            Config.OUTPUT_DIR = original


def test_unknown_route():
    """Test the JSON 404 handler"""
    print_header("Testing Unknown Route")
    response = client().get('/api/missing')
    body = response.get_json()
    print(f"✓ Status Code: {response.status_code}")
    return response.status_code == 404 and body['code'] == 'NOT_FOUND'


def main():
    """Run all tests"""
    print("\n" + "=" * 70)
    print("🚀 CarpetLab - Service Test Suite")
    print("=" * 70)

    results = {
        'Health Check': test_health_check(),
        'Stable Parameters': test_params(),
        'Run Validation': test_run_validation(),
        'Levy Run': test_levy_run_and_listing(),
        'Unknown Route': test_unknown_route(),
    }

    print_header("Test Summary")
    passed = sum(1 for v in results.values() if v)
    total = len(results)
    for test_name, result in results.items():
        status = "✓ PASS" if result else "✗ FAIL"
        print(f"{status}: {test_name}")
    print(f"\nTotal: {passed}/{total} tests passed")
    return passed == total


if __name__ == '__main__':
    sys.exit(0 if main() else 1)
