"""
Freeze the golden render for CarpetLab
Renders the fixed selftest configuration into data/golden_render.png (or CARPET_GOLDEN)
"""

import os
import sys

from cle_carpet.config import Config
from cle_carpet.selftest import GOLDEN_OVERRIDES, render_golden


def freeze_golden(path=None, force=False):
    """Write the golden render; an existing file is kept unless force is set"""

    print("\n" + "=" * 60)
    print("🖼️  CarpetLab - Golden Render")
    print("=" * 60 + "\n")

    path = path or Config.GOLDEN_RENDER_PATH
    if os.path.exists(path) and not force:
        print(f"⚠️  {path} already exists; pass --force to replace it")
        return False

    print(f"🎯 Configuration: {GOLDEN_OVERRIDES}")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    render_golden(path)
    print(f"✅ Golden render saved to {path} ({os.path.getsize(path)} bytes)")
    return True


if __name__ == '__main__':
    freeze_golden(force='--force' in sys.argv[1:])
