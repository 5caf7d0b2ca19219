"""Parametric 36x36 wafer maps for desk-scale experiments.

Every map has a circular die footprint (cells outside the inscribed disc are
0) and places failing dies (code 2) according to its class. Each map draws
from its own generator seeded by ``(seed, class, index)``, so any subset can
be regenerated independently.
"""

import numpy as np

from .data import GRID, ClassLabel, Dataset, Provenance, WaferMap

RADIUS = GRID / 2
CENTER_MAX_RADIUS = 9.0  # Center blobs never extend past this distance from the grid centre

_yy, _xx = np.mgrid[0:GRID, 0:GRID] + 0.5
_DY, _DX = _yy - RADIUS, _xx - RADIUS
_R = np.hypot(_DY, _DX)
_THETA = np.arctan2(_DY, _DX)
DISC = _R <= RADIUS


def _scatter(rng, p):
    return rng.random((GRID, GRID)) < p


def _fill(rng, mask, p):
    return mask & _scatter(rng, p)


def _center(rng):
    r = rng.uniform(4.0, 7.5)
    cy, cx = rng.uniform(-1.0, 1.0, size=2)
    return _fill(rng, np.hypot(_DY - cy, _DX - cx) <= r, rng.uniform(0.8, 0.95))


def _donut(rng):
    inner = rng.uniform(5.0, 8.0)
    outer = inner + rng.uniform(2.5, 4.5)
    cy, cx = rng.uniform(-1.0, 1.0, size=2)
    r = np.hypot(_DY - cy, _DX - cx)
    return _fill(rng, (r >= inner) & (r <= outer), rng.uniform(0.8, 0.95))


def _edge_loc(rng):
    start = rng.uniform(-np.pi, np.pi)
    span = np.deg2rad(rng.uniform(30.0, 75.0))
    depth = rng.uniform(3.0, 6.0)
    dtheta = np.mod(_THETA - start, 2 * np.pi)
    return _fill(rng, (dtheta <= span) & (_R >= RADIUS - depth), rng.uniform(0.8, 0.95))


def _edge_ring(rng):
    depth = rng.uniform(2.0, 3.5)
    return _fill(rng, _R >= RADIUS - depth, rng.uniform(0.85, 0.97))


def _local(rng):
    dist = rng.uniform(6.0, 12.0)
    ang = rng.uniform(-np.pi, np.pi)
    cy, cx = dist * np.sin(ang), dist * np.cos(ang)
    r = rng.uniform(2.5, 4.5)
    return _fill(rng, np.hypot(_DY - cy, _DX - cx) <= r, rng.uniform(0.8, 0.95))


def _random(rng):
    return _scatter(rng, rng.uniform(0.15, 0.35))


def _scratch(rng):
    length = rng.uniform(12.0, 24.0)
    ang = rng.uniform(0, np.pi)
    half_width = rng.choice([0.5, 1.0])
    # segment midpoint inside the inner part of the disc
    dist = rng.uniform(0.0, 8.0)
    mang = rng.uniform(-np.pi, np.pi)
    my, mx = dist * np.sin(mang), dist * np.cos(mang)
    uy, ux = np.sin(ang), np.cos(ang)
    along = (_DY - my) * uy + (_DX - mx) * ux
    across = np.abs((_DY - my) * ux - (_DX - mx) * uy)
    return (np.abs(along) <= length / 2) & (across <= half_width)


def _near_full(rng):
    return _scatter(rng, rng.uniform(0.75, 0.95))


def _no_pattern(rng):
    return _scatter(rng, rng.uniform(0.0, 0.02))


_SHAPES = {
    ClassLabel.NoPattern: _no_pattern,
    ClassLabel.Center: _center,
    ClassLabel.Donut: _donut,
    ClassLabel.EdgeLoc: _edge_loc,
    ClassLabel.EdgeRing: _edge_ring,
    ClassLabel.Local: _local,
    ClassLabel.Random: _random,
    ClassLabel.Scratch: _scratch,
    ClassLabel.NearFull: _near_full,
}

# low-density background failures on patterned classes; Center is kept clean so
# its defects stay concentrated
_NOISE = {ClassLabel.NoPattern: 0.0, ClassLabel.Center: 0.0, ClassLabel.Random: 0.0, ClassLabel.NearFull: 0.0}


def generate_map(label, seed, index):
    label = ClassLabel(int(label))
    rng = np.random.default_rng([seed, int(label), index])
    defects = _SHAPES[label](rng)
    noise = _NOISE.get(label, 0.01)
    if noise:
        defects |= _scatter(rng, rng.uniform(0.0, noise))
    cells = np.where(DISC, np.where(defects, 2, 1), 0).astype(np.uint8)
    return WaferMap(cells, label, Provenance.synthetic)


def generate_synthetic(counts, seed=0):
    """``counts`` is an int (same for all classes) or a per-class sequence/dict."""
    if isinstance(counts, int):
        counts = {c: counts for c in ClassLabel}
    elif not isinstance(counts, dict):
        counts = dict(zip(ClassLabel, counts))
    maps = []
    for label in ClassLabel:
        n = int(counts.get(label, 0))
        if n < 0:
            raise ValueError(f"negative count for {label.name}")
        maps.extend(generate_map(label, seed, i) for i in range(n))
    return Dataset(maps, Provenance.synthetic)
