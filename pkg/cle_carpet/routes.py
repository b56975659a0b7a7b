"""
Flask Routes for CarpetLab
JSON endpoints for stable parameters and pipeline runs
"""

import json
import os
from datetime import datetime

from flask import Blueprint, jsonify, request

from .cli import SUBCOMMANDS, run
from .config import TOOL_VERSION, Config
from .exceptions import CarpetLabError, ConfigError
from .levy import params_from_kappa

# Create Blueprint for routes
api = Blueprint('api', __name__)

# selftest takes minutes to hours; it is run from the command line only
SERVICE_SUBCOMMANDS = tuple(name for name in SUBCOMMANDS if name != 'selftest')


def load_manifests(root):
    """Collect manifest.json files one level below root"""
    manifests = []
    if not os.path.isdir(root):
        return manifests
    for name in sorted(os.listdir(root)):
        path = os.path.join(root, name, 'manifest.json')
        try:
            if os.path.exists(path):
                with open(path, 'r', encoding='utf-8') as f:
                    body = json.load(f)
                body['run'] = name
                manifests.append(body)
        except (OSError, json.JSONDecodeError) as e:
            print(f"⚠️ Error loading {path}: {str(e)}")
    return manifests


# =====================================================
# Health & Status Endpoints
# =====================================================

@api.route('/api/health', methods=['GET'])
def health_check():
    """Health check endpoint"""
    return jsonify({
        'status': 'success',
        'message': 'CarpetLab service is operational',
        'timestamp': datetime.now().isoformat(),
        'version': TOOL_VERSION
    }), 200


# =====================================================
# Stable Process Parameters
# =====================================================

@api.route('/api/params', methods=['GET'])
def stable_params():
    """Stable-process parameters for ?kappa=..."""
    raw = request.args.get('kappa', '3')
    try:
        kappa = float(raw)
    except ValueError:
        return jsonify({
            'status': 'error',
            'message': f'kappa must be a number, got {raw!r}',
            'code': 'INVALID_KAPPA'
        }), 400
    try:
        params = params_from_kappa(kappa)
    except ConfigError as e:
        return jsonify({'status': 'error', 'message': e.message, 'code': 'INVALID_KAPPA'}), 400
    return jsonify({
        'status': 'success',
        'code': 'PARAMS',
        'data': params.to_dict()
    }), 200


# =====================================================
# Pipeline Runs
# =====================================================

@api.route('/api/run', methods=['POST'])
def run_pipeline():
    """
    Run one subcommand into the service output directory
    Body: {"subcommand": "carpet", "overrides": {...}}
    """
    try:
        data = request.get_json(silent=True)

        if not data or 'subcommand' not in data:
            return jsonify({
                'status': 'error',
                'message': 'Missing required field: subcommand',
                'code': 'MISSING_SUBCOMMAND'
            }), 400

        subcommand = data['subcommand']
        if subcommand not in SERVICE_SUBCOMMANDS:
            return jsonify({
                'status': 'error',
                'message': f'subcommand must be one of {", ".join(SERVICE_SUBCOMMANDS)}',
                'code': 'INVALID_SUBCOMMAND'
            }), 400

        overrides = data.get('overrides') or {}
        if not isinstance(overrides, dict):
            return jsonify({
                'status': 'error',
                'message': 'overrides must be an object',
                'code': 'INVALID_OVERRIDES'
            }), 400

        # Runs always land under the service output directory
        stamp = datetime.now().strftime('%Y%m%d-%H%M%S-%f')
        out_dir = os.path.join(Config.OUTPUT_DIR, f'{subcommand}-{stamp}')
        forced = {'run': {'out': out_dir}}
        result = run(subcommand, None, [overrides, forced], verbose=False)
        print(f"✅ {subcommand} run saved to {out_dir}")

        return jsonify({
            'status': 'success',
            'code': 'RUN_COMPLETE',
            'data': result.to_dict()
        }), 200

    except ConfigError as e:
        return jsonify(e.to_dict()), 400
    except CarpetLabError as e:
        print(f"❌ Pipeline error: {e.message}")
        return jsonify(e.to_dict()), 500
    except Exception as e:
        print(f"❌ Error in run_pipeline: {str(e)}")
        return jsonify({
            'status': 'error',
            'message': 'An error occurred while running the pipeline',
            'code': 'INTERNAL_ERROR'
        }), 500


@api.route('/api/runs', methods=['GET'])
def list_runs():
    """List manifests of runs saved under the output directory"""
    manifests = load_manifests(Config.OUTPUT_DIR)
    return jsonify({
        'status': 'success',
        'code': 'RUNS',
        'data': {
            'runs': manifests,
            'count': len(manifests)
        }
    }), 200
