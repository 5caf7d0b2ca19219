import numpy as np
import pytest

from wafer2spike.data import ClassLabel, Provenance
from wafer2spike.synthetic import CENTER_MAX_RADIUS, generate_map, generate_synthetic


def fail_mask(m):
    return m.cells == 2


def test_counts_and_provenance():
    ds = generate_synthetic(3, seed=0)
    assert len(ds) == 27 and ds.class_counts().tolist() == [3] * 9
    assert all(m.provenance is Provenance.synthetic and m.cells.shape == (36, 36) for m in ds)


def test_per_class_counts():
    assert generate_synthetic({ClassLabel.Donut: 2}).class_counts().tolist() == [0, 0, 2, 0, 0, 0, 0, 0, 0]
    assert generate_synthetic([1, 0, 3]).class_counts()[:3].tolist() == [1, 0, 3]
    with pytest.raises(ValueError):
        generate_synthetic({ClassLabel.Local: -1})


def test_same_seed_same_maps():
    a, b = generate_synthetic(2, seed=7), generate_synthetic(2, seed=7)
    assert all(np.array_equal(x.cells, y.cells) for x, y in zip(a, b))
    c = generate_synthetic(2, seed=8)
    assert not all(np.array_equal(x.cells, y.cells) for x, y in zip(a, c))


def test_maps_do_not_depend_on_counts_of_other_classes():
    a = generate_synthetic({ClassLabel.Scratch: 3}, seed=1)
    b = generate_synthetic(5, seed=1)
    scratch = [m for m in b if m.label == ClassLabel.Scratch][:3]
    assert all(np.array_equal(x.cells, y.cells) for x, y in zip(a, scratch))


def test_disc_footprint_is_shared():
    ds = generate_synthetic(2, seed=0)
    off = ds[0].cells == 0
    assert off[0, 0] and not off[18, 18]
    assert all(np.array_equal(m.cells == 0, off) for m in ds)


@pytest.mark.parametrize("index", range(10))
def test_no_pattern_is_sparse(index):
    m = generate_map(ClassLabel.NoPattern, 0, index)
    assert fail_mask(m)[m.cells > 0].mean() <= 0.04


@pytest.mark.parametrize("index", range(10))
def test_center_defects_stay_central(index):
    m = generate_map(ClassLabel.Center, 0, index)
    yy, xx = np.nonzero(fail_mask(m))
    r = np.hypot(yy - 17.5, xx - 17.5)
    assert len(r) > 0 and r.max() <= CENTER_MAX_RADIUS + 1


@pytest.mark.parametrize("index", range(10))
def test_edge_ring_hugs_the_rim(index):
    m = generate_map(ClassLabel.EdgeRing, 0, index)
    yy, xx = np.nonzero(fail_mask(m))
    r = np.hypot(yy - 17.5, xx - 17.5)
    assert np.mean(r > 13) > 0.8


@pytest.mark.parametrize("index", range(5))
def test_near_full_is_mostly_failing(index):
    m = generate_map(ClassLabel.NearFull, 0, index)
    die = m.cells > 0
    assert fail_mask(m)[die].mean() > 0.7


def test_density_ordering():
    ds = generate_synthetic(10, seed=3)
    density = {c: np.mean([fail_mask(m).mean() for m in ds if m.label == c]) for c in ClassLabel}
    assert density[ClassLabel.NoPattern] < min(v for c, v in density.items() if c != ClassLabel.NoPattern)
    assert density[ClassLabel.NearFull] > max(v for c, v in density.items() if c != ClassLabel.NearFull)
