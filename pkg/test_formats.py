"""
Test Script for artifact formats
Loop files, mask rasters, tables and renders
"""

import csv
import json
import os
import sys
import tempfile

import numpy as np
from PIL import Image

from cle_carpet.carpet import CARPET, EXTERIOR, HOLE, CarpetMask, distance_field
from cle_carpet.formats import (
    EXTERIOR_COLOR,
    HOLE_COLOR,
    UNREACHABLE_COLOR,
    read_loops_binary,
    read_loops_text,
    read_mask,
    render_field,
    viridis_lut,
    write_csv,
    write_grid_csv,
    write_json,
    write_loops_binary,
    write_loops_text,
    write_mask,
    write_render,
    write_table,
)
from cle_carpet.geometry import Loop
from cle_carpet.rng import make_rng


def print_header(text):
    """Print formatted header"""
    print("\n" + "=" * 70)
    print(f"🧪 {text}")
    print("=" * 70)


def random_loops(count=5, seed=1):
    rng = make_rng(seed, 0)
    return [Loop(rng.normal(size=(int(rng.integers(3, 40)), 2))) for _ in range(count)]


def walled_mask():
    """300 x 300 carpet, a hole wall at columns 100-109 and exterior rows on top"""
    cells = np.full((300, 300), CARPET, dtype=np.uint8)
    cells[:, 100:110] = HOLE
    cells[290:, :] = EXTERIOR
    return CarpetMask.from_cells(cells, 1.0 / 300)


# =====================================================
# Loop files
# =====================================================

def test_loop_text_round_trip():
    loops = random_loops()
    domain = Loop(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    with tempfile.TemporaryDirectory() as tmp:
        path = write_loops_text(os.path.join(tmp, 'loops.txt'), 3.0, 0.5, 42, domain, loops, 'abc123')
        back = read_loops_text(path)
    assert back['kappa'] == 3.0 and back['intensity'] == 0.5 and back['seed'] == 42
    assert back['manifest_hash'] == 'abc123'
    assert back['domain_loop'] == domain
    assert len(back['loops']) == len(loops)
    for original, parsed in zip(loops, back['loops']):
        assert np.allclose(original.vertices, parsed.vertices, rtol=1e-8, atol=1e-12)


def test_loop_text_without_domain():
    with tempfile.TemporaryDirectory() as tmp:
        path = write_loops_text(os.path.join(tmp, 'loops.txt'), 3.0, 0.5, 1, None, random_loops(2))
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.read().splitlines()
        back = read_loops_text(path)
    assert lines[2] == '0'
    assert back['domain_loop'] is None
    assert len(back['loops']) == 2


def test_loop_binary_round_trip_is_exact():
    loops = random_loops(7, seed=2)
    with tempfile.TemporaryDirectory() as tmp:
        path = write_loops_binary(os.path.join(tmp, 'loops.bin'), 3.2, 0.41, 2 ** 40, None, loops, '0123456789abcdef')
        with open(path, 'rb') as f:
            assert f.read(4) == b'CLEL'
        back = read_loops_binary(path)
    assert back['kappa'] == 3.2 and back['intensity'] == 0.41 and back['seed'] == 2 ** 40
    assert back['manifest_hash'] == '0123456789abcdef'
    assert back['domain_loop'] is None
    assert back['loops'] == loops


# =====================================================
# Masks
# =====================================================

def test_mask_round_trip():
    mask = walled_mask()
    with tempfile.TemporaryDirectory() as tmp:
        path, sidecar = write_mask(os.path.join(tmp, 'mask.pgm'), mask, 'feed')
        with open(path, 'rb') as f:
            assert f.read(2) == b'P5'
        with open(sidecar, 'r', encoding='utf-8') as f:
            meta = json.load(f)
        back = read_mask(path)
    assert meta['codes'] == {'exterior': 0, 'hole': 128, 'carpet': 255}
    assert meta['manifest_hash'] == 'feed'
    assert np.array_equal(back.cells, mask.cells)
    assert back.h == mask.h and back.n == 300


# =====================================================
# Tables
# =====================================================

def test_csv_columns_are_union_of_keys():
    rows = [{'a': 1, 'b': 0.5}, {'b': 2.0, 'c': [1, 2]}]
    with tempfile.TemporaryDirectory() as tmp:
        path = write_csv(os.path.join(tmp, 'table.csv'), rows, 'cafe')
        with open(path, 'r', encoding='utf-8', newline='') as f:
            parsed = list(csv.DictReader(f))
    assert list(parsed[0].keys()) == ['a', 'b', 'c', 'manifest_hash']
    assert parsed[0]['c'] == '' and parsed[1]['a'] == ''
    assert parsed[1]['c'] == '[1, 2]'
    assert all(row['manifest_hash'] == 'cafe' for row in parsed)
    assert float(parsed[0]['b']) == 0.5


def test_json_table_and_numpy_values():
    with tempfile.TemporaryDirectory() as tmp:
        path = write_table(os.path.join(tmp, 'table'), [{'x': np.float64(1.5)}], 'json', 'beef',
                           extra={'grid': np.arange(3), 'flag': np.bool_(True)})
        with open(path, 'r', encoding='utf-8') as f:
            body = json.load(f)
        plain = write_json(os.path.join(tmp, 'plain.json'), {'n': np.int64(4)})
        with open(plain, 'r', encoding='utf-8') as f:
            assert json.load(f)['n'] == 4
    assert path.endswith('.json')
    assert body['rows'] == [{'x': 1.5}]
    assert body['grid'] == [0, 1, 2] and body['flag'] is True
    assert body['manifest_hash'] == 'beef'


def test_grid_csv_puts_highest_y_first():
    grid = np.array([[1, 2], [3, 4]])
    with tempfile.TemporaryDirectory() as tmp:
        path = write_grid_csv(os.path.join(tmp, 'grid.csv'), grid, 'h')
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.read().splitlines()
    assert lines == ['# manifest h', '3,4', '1,2']


# =====================================================
# Renders
# =====================================================

def test_render_colors():
    mask = walled_mask()
    field = distance_field(mask, 0.1, (0.05, 0.05))
    image = render_field(mask, field)
    lut = viridis_lut()
    assert image.shape == (300, 300, 3)
    # image row 0 is the highest y
    assert tuple(image[299 - 0, 0]) == tuple(lut[0])
    assert tuple(image[0, 0]) == EXTERIOR_COLOR
    assert tuple(image[299 - 10, 105]) == HOLE_COLOR
    assert tuple(image[299 - 10, 200]) == UNREACHABLE_COLOR


def test_render_png_carries_hash():
    mask = walled_mask()
    field = distance_field(mask, 0.1, (0.05, 0.05))
    with tempfile.TemporaryDirectory() as tmp:
        path = write_render(os.path.join(tmp, 'render.png'), mask, field, '0011223344556677')
        with Image.open(path) as image:
            image.load()
            text = dict(image.text)
            pixels = np.asarray(image.convert('RGB'))
    assert text == {'manifest_hash': '0011223344556677'}
    assert np.array_equal(pixels, render_field(mask, field))


def main():
    """Run all tests in this module"""
    print_header("Artifact Format Tests")
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
