"""Wafer-map data model, file codecs, resizing, splitting and D4 augmentation.

Cell codes: 0 = no die, 1 = passing die, 2 = failing die.

WFM1 container (little-endian)::

    b"WFM1"
    u32  record count
    per record:
        u16 height, u16 width, u8 label, height*width u8 cell codes (row-major)

CSV import: one map per row, ``height,width,label,cells`` where ``label`` is
an integer or a class name and ``cells`` is a string of ``height*width``
digits in row-major order.
"""

import csv
import enum
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .errors import FormatError, InputError

log = logging.getLogger(__name__)

MAGIC = b"WFM1"
GRID = 36


class ClassLabel(enum.IntEnum):
    NoPattern = 0
    Center = 1
    Donut = 2
    EdgeLoc = 3
    EdgeRing = 4
    Local = 5
    Random = 6
    Scratch = 7
    NearFull = 8


CLASS_NAMES = [c.name for c in ClassLabel]
N_CLASSES = len(CLASS_NAMES)


class Provenance(str, enum.Enum):
    real = "real"
    synthetic = "synthetic"
    augmented = "augmented"


@dataclass
class WaferMap:
    cells: np.ndarray  # (H, W) uint8
    label: ClassLabel
    provenance: Provenance = Provenance.real
    # (template index, D4 element) for augmented maps
    origin: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.uint8)
        if self.cells.ndim != 2 or 0 in self.cells.shape:
            raise InputError(f"wafer map must be a non-empty 2-d grid, got shape {self.cells.shape}")
        if self.cells.max(initial=0) > 2:
            raise InputError("cell codes must lie in {0, 1, 2}")
        self.label = ClassLabel(int(self.label))

    @property
    def height(self):
        return self.cells.shape[0]

    @property
    def width(self):
        return self.cells.shape[1]


@dataclass
class Dataset:
    maps: List[WaferMap] = field(default_factory=list)
    provenance: Provenance = Provenance.real

    def __len__(self):
        return len(self.maps)

    def __iter__(self):
        return iter(self.maps)

    def __getitem__(self, i):
        return self.maps[i]

    @property
    def labels(self):
        return np.array([int(m.label) for m in self.maps], dtype=np.int64)

    def class_counts(self):
        return np.bincount(self.labels, minlength=N_CLASSES)

    def to_arrays(self):
        """``(x, y)``: normalized (N, 1, 36, 36) float32 inputs and int labels.

        Maps that are not 36x36 are resized first.
        """
        x = np.empty((len(self.maps), 1, GRID, GRID), dtype=np.float32)
        for i, m in enumerate(self.maps):
            x[i] = normalize(resize_nearest(m))
        return x, self.labels


# --------------------------------------------------------------------------
# codecs


def save_wfm(dataset, path):
    parts = [MAGIC, struct.pack("<I", len(dataset))]
    for m in dataset:
        parts.append(struct.pack("<HHB", m.height, m.width, int(m.label)))
        parts.append(np.ascontiguousarray(m.cells, dtype=np.uint8).tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_wfm(path, provenance=Provenance.real):
    buf = Path(path).read_bytes()
    if len(buf) < 8:
        raise FormatError(f"{path}: file too short for WFM1 header", len(buf))
    if buf[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {buf[:4]!r}", 0)
    (count,) = struct.unpack_from("<I", buf, 4)
    off = 8
    maps = []
    for i in range(count):
        if off + 5 > len(buf):
            raise FormatError(f"{path}: truncated header of record {i}", off)
        h, w, label = struct.unpack_from("<HHB", buf, off)
        if label >= N_CLASSES:
            raise FormatError(f"{path}: record {i} has label {label}", off + 4)
        off += 5
        if off + h * w > len(buf):
            raise FormatError(f"{path}: truncated cells of record {i}", off)
        cells = np.frombuffer(buf, dtype=np.uint8, count=h * w, offset=off)
        bad = np.flatnonzero(cells > 2)
        if bad.size:
            raise FormatError(f"{path}: record {i} has cell code {cells[bad[0]]}", off + int(bad[0]))
        if h == 0 or w == 0:
            raise FormatError(f"{path}: record {i} has empty grid", off - 5)
        maps.append(WaferMap(cells.reshape(h, w).copy(), ClassLabel(label), provenance))
        off += h * w
    if off != len(buf):
        raise FormatError(f"{path}: {len(buf) - off} trailing bytes", off)
    return Dataset(maps, provenance)


def _parse_label(text):
    text = text.strip()
    if text.isdigit():
        value = int(text)
        if value >= N_CLASSES:
            raise InputError(f"label {value} out of range")
        return ClassLabel(value)
    key = text.replace("-", "").replace("_", "").replace(" ", "").lower()
    for c in ClassLabel:
        if c.name.lower() == key:
            return c
    raise InputError(f"unknown class label {text!r}")


def _as_label(value):
    return _parse_label(value) if isinstance(value, str) else ClassLabel(int(value))


def import_csv(path):
    maps = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].strip().lower() == "height":
                continue
            if len(row) != 4:
                raise InputError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            h, w = int(row[0]), int(row[1])
            digits = row[3].strip()
            if len(digits) != h * w or not set(digits) <= set("012"):
                raise InputError(f"{path}:{lineno}: expected {h * w} digits from {{0,1,2}}")
            cells = np.frombuffer(digits.encode(), dtype=np.uint8) - ord("0")
            maps.append(WaferMap(cells.reshape(h, w), _parse_label(row[2])))
    return Dataset(maps, Provenance.real)


def export_csv(dataset, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["height", "width", "label", "cells"])
        for m in dataset:
            writer.writerow([m.height, m.width, int(m.label), "".join(map(str, m.cells.ravel()))])


# --------------------------------------------------------------------------
# transforms


def resize_nearest(m, size=GRID):
    """Nearest-neighbour resample: ``src = floor(dst * src_extent / size)``."""
    if m.cells.shape == (size, size):
        return m
    rows = (np.arange(size) * m.height) // size
    cols = (np.arange(size) * m.width) // size
    return WaferMap(m.cells[np.ix_(rows, cols)], m.label, m.provenance, m.origin)


_LEVELS = np.array([0.0, 0.5, 1.0], dtype=np.float32)


def normalize(m):
    """Map codes 0/1/2 to 0.0/0.5/1.0; returns a (1, H, W) float32 tensor."""
    if m.cells.shape != (GRID, GRID):
        raise InputError(f"normalize expects a {GRID}x{GRID} map, got {m.cells.shape}")
    return _LEVELS[m.cells][None]


def denormalize(x):
    return np.rint(np.asarray(x)[0] * 2).astype(np.uint8)


# D4 elements: identity, three rotations, four reflections
D4_NAMES = ("identity", "rot90", "rot180", "rot270", "flip_lr", "flip_ud", "transpose", "antitranspose")
_D4_INVERSE = (0, 3, 2, 1, 4, 5, 6, 7)


def d4_transform(cells, k):
    if k == 0:
        return cells.copy()
    if 1 <= k <= 3:
        return np.rot90(cells, k).copy()
    if k == 4:
        return cells[:, ::-1].copy()
    if k == 5:
        return cells[::-1, :].copy()
    if k == 6:
        return cells.T.copy()
    if k == 7:
        return cells[::-1, ::-1].T.copy()
    raise InputError(f"D4 element index must be in 0..7, got {k}")


def d4_inverse(k):
    return _D4_INVERSE[k]


# --------------------------------------------------------------------------
# splitting and augmentation


@dataclass(frozen=True)
class SplitSpec:
    ratios: Tuple[float, ...] = (0.8, 0.2)
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        ratios = tuple(float(r) for r in self.ratios)
        object.__setattr__(self, "ratios", ratios)
        if not 1 <= len(ratios) <= 3 or any(r <= 0 for r in ratios):
            raise InputError(f"split ratios must be 1-3 positive values, got {ratios}")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise InputError(f"split ratios must sum to 1, got {sum(ratios)}")


def part_sizes(n, ratios):
    """Floor-based part sizes with the remainder assigned to the first part."""
    sizes = [int(np.floor(r * n + 1e-9)) for r in ratios]
    sizes[0] += n - sum(sizes)
    return sizes


def split_indices(labels, spec):
    labels = np.asarray(labels)
    rng = np.random.default_rng(spec.seed)
    parts = [[] for _ in spec.ratios]
    groups = [np.flatnonzero(labels == c) for c in np.unique(labels)] if spec.stratified else [np.arange(len(labels))]
    for idx in groups:
        idx = idx[rng.permutation(len(idx))]
        start = 0
        for p, size in zip(parts, part_sizes(len(idx), spec.ratios)):
            p.append(idx[start : start + size])
            start += size
    return [np.concatenate(p) if p else np.array([], dtype=np.int64) for p in parts]


def split(dataset, spec):
    """Disjoint, exhaustive partition of ``dataset`` per ``spec``."""
    return [Dataset([dataset.maps[i] for i in idx], dataset.provenance) for idx in split_indices(dataset.labels, spec)]


def augment_minority(dataset, targets, seed=0, allow_repeats=False):
    """Grow under-represented classes to ``targets[class]`` with D4 images.

    Each template contributes at most its seven non-identity images unless
    ``allow_repeats`` is set. Originals are kept untouched and new maps are
    appended with provenance ``augmented``.
    """
    rng = np.random.default_rng(seed)
    counts = dataset.class_counts()
    new = []
    for cls, target in sorted((int(_as_label(k)), int(v)) for k, v in dict(targets).items()):
        have = int(counts[cls])
        if target < have:
            raise InputError(f"target {target} for {CLASS_NAMES[cls]} is below current count {have}")
        need = target - have
        if need == 0:
            continue
        templates = [i for i, m in enumerate(dataset.maps) if m.label == cls]
        if not templates:
            raise InputError(f"class {CLASS_NAMES[cls]} has no templates to augment")
        pairs = [(t, k) for t in templates for k in range(1, 8)]
        order = rng.permutation(len(pairs))
        chosen = [pairs[i] for i in order[:need]]
        if need > len(pairs):
            if not allow_repeats:
                raise InputError(
                    f"{CLASS_NAMES[cls]}: target {target} needs {need} new maps but only {len(pairs)} distinct D4 images exist"
                )
            log.warning("%s: reusing (template, transform) pairs to reach %d", CLASS_NAMES[cls], target)
            extra = rng.integers(0, len(pairs), size=need - len(pairs))
            chosen += [pairs[i] for i in extra]
        for t, k in chosen:
            src = dataset.maps[t]
            new.append(WaferMap(d4_transform(src.cells, k), src.label, Provenance.augmented, (t, k)))
    return Dataset(list(dataset.maps) + new, dataset.provenance)
