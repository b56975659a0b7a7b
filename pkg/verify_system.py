"""
System Verification Script
Checks packages, configuration and reference files before running CarpetLab
"""

import os
import sys


def check_python_version():
    """Check Python version (tomllib needs 3.11)"""
    print("\n✓ Python Version Check:")
    version = sys.version_info
    print(f"  Python {version.major}.{version.minor}.{version.micro}")
    return version >= (3, 11)


def check_python_packages():
    """Check required Python packages"""
    print("\n✓ Python Packages Check:")

    required_packages = {
        'flask': 'Flask',
        'flask_cors': 'Flask-CORS',
        'dotenv': 'python-dotenv',
        'sklearn': 'scikit-learn',
        'numpy': 'numpy',
        'scipy': 'scipy',
        'matplotlib': 'matplotlib',
        'contourpy': 'contourpy',
        'PIL': 'Pillow',
        'tomli_w': 'tomli-w',
    }

    all_installed = True

    for import_name, display_name in required_packages.items():
        try:
            __import__(import_name)
            print(f"  ✓ {display_name}")
        except ImportError:
            print(f"  ✗ {display_name}: NOT INSTALLED")
            all_installed = False

    return all_installed


def check_default_config():
    """Check the default TOML configuration parses and validates"""
    print("\n✓ Default Configuration Check:")

    try:
        from cle_carpet.cli import SUBCOMMANDS
        from cle_carpet.config import Config, load_config

        if not os.path.exists(Config.DEFAULT_CONFIG_PATH):
            print(f"  ✗ {Config.DEFAULT_CONFIG_PATH}: NOT FOUND")
            return False
        config = load_config(Config.DEFAULT_CONFIG_PATH)
        for subcommand in SUBCOMMANDS:
            config.validate(subcommand)
        print(f"  ✓ {os.path.basename(Config.DEFAULT_CONFIG_PATH)} valid for {len(SUBCOMMANDS)} subcommands")
        print(f"    → kappa={config.soup.kappa} grid={config.carpet.grid} eps={config.carpet.eps_list}")
        return True
    except Exception as e:
        print(f"  ✗ Configuration error: {str(e)}")
        return False


def check_stable_params():
    """Check the kappa -> stable parameter identities"""
    print("\n✓ Stable Parameter Check:")

    try:
        from cle_carpet.levy import params_from_kappa

        for kappa in (2.7, 3.0, 3.5, 3.9):
            params = params_from_kappa(kappa)
            print(f"  ✓ kappa={kappa}: alpha={params.alpha:.4f} beta={params.skew_beta:+.4f} rho={params.positivity:.4f}")
        return True
    except Exception as e:
        print(f"  ✗ Parameter check failed: {str(e)}")
        return False


def check_golden_render():
    """Check the frozen golden render used by selftest"""
    print("\n✓ Golden Render Check:")

    from cle_carpet.config import Config

    if os.path.exists(Config.GOLDEN_RENDER_PATH):
        size = os.path.getsize(Config.GOLDEN_RENDER_PATH)
        print(f"  ✓ golden_render.png ({size} bytes)")
    else:
        print("  ⚠️ golden_render.png not found; selftest skips the golden check until `python freeze_golden.py` runs")
    return True


def main():
    """Run all checks"""

    print("\n" + "=" * 70)
    print("🔍 CarpetLab - SYSTEM VERIFICATION")
    print("=" * 70)

    checks = [
        ("Python Version", check_python_version),
        ("Python Packages", check_python_packages),
        ("Default Configuration", check_default_config),
        ("Stable Parameters", check_stable_params),
        ("Golden Render", check_golden_render),
    ]

    results = {}

    for check_name, check_func in checks:
        try:
            results[check_name] = check_func()
        except Exception as e:
            print(f"\n✗ {check_name} failed with error: {str(e)}")
            results[check_name] = False

    print("\n" + "=" * 70)
    print("📊 VERIFICATION SUMMARY")
    print("=" * 70)

    total_checks = len(results)
    passed_checks = sum(1 for v in results.values() if v)

    for check_name, result in results.items():
        status = "✓ PASS" if result else "✗ FAIL"
        print(f"{status}: {check_name}")

    print("\n" + "-" * 70)
    print(f"Overall Status: {passed_checks}/{total_checks} checks passed")

    if passed_checks == total_checks:
        print("\n✨ All systems operational! Run `python -m cle_carpet selftest` for the full battery.")
        print("=" * 70 + "\n")
        return True

    print(f"\n⚠️  {total_checks - passed_checks} checks failed. Please review the issues above.")
    print("=" * 70 + "\n")
    return False


if __name__ == '__main__':
    success = main()
    sys.exit(0 if success else 1)
