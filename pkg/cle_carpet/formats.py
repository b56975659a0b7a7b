"""
Artifact formats for CarpetLab
Loop files, mask rasters, report tables and distance-field renders
"""

import csv
import io
import json
import os
import struct

import numpy as np
from matplotlib import colormaps
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .carpet import CARPET, EXTERIOR, HOLE, CarpetMask
from .geometry import Loop

LOOP_MAGIC = b'CLEL'
LOOP_VERSION = 1

HOLE_COLOR = (0x20, 0x20, 0x20)
EXTERIOR_COLOR = (0xff, 0xff, 0xff)
UNREACHABLE_COLOR = (0x80, 0x80, 0x80)


def viridis_lut():
    """256-entry uint8 RGB table of matplotlib's viridis colormap"""
    rgba = colormaps['viridis'](np.linspace(0.0, 1.0, 256))
    return np.round(rgba[:, :3] * 255.0).astype(np.uint8)


# =====================================================
# Loop ensembles
# =====================================================

def _loop_line(loop):
    if loop is None:
        return '0'
    coords = ' '.join('%.9g %.9g' % (x, y) for x, y in loop.vertices)
    return f'{len(loop)} {coords}'


def _parse_loop_line(line):
    parts = line.split()
    k = int(parts[0])
    if k == 0:
        return None
    values = np.array([float(v) for v in parts[1:1 + 2 * k]]).reshape(k, 2)
    return Loop(values)


def write_loops_text(path, kappa, intensity, seed, domain_loop, loops, manifest_hash=''):
    """
    Write loops in the line format

    Line 1 is `kappa intensity seed`, line 2 the domain loop (`0` when absent),
    then one loop per line as `k x1 y1 ... xk yk` with 9 significant digits.
    A leading `# manifest <hash>` comment identifies the run.
    """
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(f'# manifest {manifest_hash}\n')
        f.write('%.9g %.9g %d\n' % (kappa, intensity, seed))
        f.write(_loop_line(domain_loop) + '\n')
        for loop in loops:
            f.write(_loop_line(loop) + '\n')
    return path


def read_loops_text(path):
    """Inverse of write_loops_text; returns a dict with header fields and loops"""
    with open(path, 'r', encoding='utf-8') as f:
        lines = [line.strip() for line in f if line.strip()]
    manifest_hash = ''
    if lines and lines[0].startswith('#'):
        manifest_hash = lines[0].split()[-1] if len(lines[0].split()) > 2 else ''
        lines = lines[1:]
    kappa, intensity, seed = lines[0].split()
    return {
        'kappa': float(kappa),
        'intensity': float(intensity),
        'seed': int(seed),
        'domain_loop': _parse_loop_line(lines[1]) if len(lines) > 1 else None,
        'loops': [_parse_loop_line(line) for line in lines[2:]],
        'manifest_hash': manifest_hash,
    }


def write_loops_binary(path, kappa, intensity, seed, domain_loop, loops, manifest_hash=''):
    """
    Little-endian binary loop file

    Layout: magic 'CLEL', u32 version, 16-byte manifest hash, f8 kappa,
    f8 intensity, u64 seed, u32 loop count (domain loop first, k = 0 when
    absent), then per loop a u32 vertex count followed by k x 2 f8 coordinates.
    """
    everything = [domain_loop] + list(loops)
    with open(path, 'wb') as f:
        f.write(LOOP_MAGIC)
        f.write(struct.pack('<I', LOOP_VERSION))
        f.write(manifest_hash.encode('ascii')[:16].ljust(16, b'\0'))
        f.write(struct.pack('<ddQI', kappa, intensity, seed, len(everything)))
        for loop in everything:
            if loop is None:
                f.write(struct.pack('<I', 0))
                continue
            f.write(struct.pack('<I', len(loop)))
            f.write(np.ascontiguousarray(loop.vertices, dtype='<f8').tobytes())
    return path


def read_loops_binary(path):
    with open(path, 'rb') as f:
        data = f.read()
    if data[:4] != LOOP_MAGIC:
        raise ValueError(f"{path} is not a loop file")
    offset = 8
    manifest_hash = data[offset:offset + 16].rstrip(b'\0').decode('ascii')
    offset += 16
    kappa, intensity, seed, count = struct.unpack_from('<ddQI', data, offset)
    offset += struct.calcsize('<ddQI')
    loops = []
    for _ in range(count):
        (k,) = struct.unpack_from('<I', data, offset)
        offset += 4
        if k == 0:
            loops.append(None)
            continue
        vertices = np.frombuffer(data, dtype='<f8', count=2 * k, offset=offset).reshape(k, 2)
        offset += 16 * k
        loops.append(Loop(vertices.astype(float)))
    return {
        'kappa': kappa,
        'intensity': intensity,
        'seed': seed,
        'domain_loop': loops[0] if loops else None,
        'loops': loops[1:],
        'manifest_hash': manifest_hash,
    }


# =====================================================
# Masks
# =====================================================

def write_mask(path, mask, manifest_hash=''):
    """
    Binary PGM (P5) of the classification bytes plus a JSON sidecar

    Image rows run top to bottom, so mask row 0 (lowest y) is the last image row.
    """
    buffer = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(np.flipud(mask.cells))).save(buffer, format='PPM')
    with open(path, 'wb') as f:
        f.write(buffer.getvalue())
    sidecar = os.path.splitext(path)[0] + '.json'
    write_json(sidecar, {
        'n': mask.n,
        'h': mask.h,
        'bbox': list(mask.bbox),
        'codes': {'exterior': EXTERIOR, 'hole': HOLE, 'carpet': CARPET},
        'boundary_cells': int(len(mask.boundary_cells)),
    }, manifest_hash)
    return path, sidecar


def read_mask(path):
    sidecar = os.path.splitext(path)[0] + '.json'
    with open(sidecar, 'r', encoding='utf-8') as f:
        meta = json.load(f)
    with Image.open(path) as image:
        cells = np.flipud(np.asarray(image, dtype=np.uint8))
    x0, y0 = meta['bbox'][0], meta['bbox'][1]
    return CarpetMask.from_cells(cells, meta['h'], x0, y0)


# =====================================================
# Tables and documents
# =====================================================

def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path, body, manifest_hash=''):
    body = dict(body)
    body['manifest_hash'] = manifest_hash
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(body, f, indent=2, sort_keys=True, default=_jsonable)
        f.write('\n')
    return path


def write_csv(path, rows, manifest_hash=''):
    """One row per record; columns are the union of keys in first-seen order"""
    columns = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    if 'manifest_hash' not in columns:
        columns.append('manifest_hash')
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=columns, restval='', lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({**{k: _cell(v) for k, v in row.items()}, 'manifest_hash': manifest_hash})
    return path


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return json.dumps(value, default=_jsonable)
    return value


def write_table(path_stem, rows, fmt, manifest_hash='', extra=None):
    """Write rows as CSV or as JSON ({'rows': [...], **extra}); returns the path"""
    if fmt == 'json':
        body = {'rows': rows}
        body.update(extra or {})
        return write_json(path_stem + '.json', body, manifest_hash)
    return write_csv(path_stem + '.csv', rows, manifest_hash)


def write_grid_csv(path, grid, manifest_hash=''):
    """Integer grid as CSV, first row of the file is the highest y"""
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(f'# manifest {manifest_hash}\n')
        for row in np.flipud(np.asarray(grid)):
            f.write(','.join(str(int(v)) for v in row) + '\n')
    return path


# =====================================================
# Renders
# =====================================================

def render_field(mask, field):
    """
    RGB image of a per-cell distance field

    Reachable carpet cells use viridis scaled from 1 to the field maximum; holes
    are #202020, exterior #ffffff, unreachable carpet #808080.
    """
    lut = viridis_lut()
    values = np.asarray(field.cells)
    image = np.empty(values.shape + (3,), dtype=np.uint8)
    image[:] = EXTERIOR_COLOR
    image[mask.cells == HOLE] = HOLE_COLOR
    carpet = mask.cells == CARPET
    image[carpet & (values < 0)] = UNREACHABLE_COLOR
    reach = carpet & (values > 0)
    if reach.any():
        top = max(int(values[reach].max()), 2)
        index = np.round(255.0 * (values[reach] - 1) / (top - 1)).astype(np.int64)
        image[reach] = lut[np.clip(index, 0, 255)]
    return np.flipud(image)


def write_render(path, mask, field, manifest_hash=''):
    """PNG of render_field with the manifest hash as the only text chunk"""
    info = PngInfo()
    info.add_text('manifest_hash', manifest_hash)
    Image.fromarray(np.ascontiguousarray(render_field(mask, field))).save(path, format='PNG', pnginfo=info, optimize=False)
    return path
