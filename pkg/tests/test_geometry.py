"""Coupled geometry, interface frame, and sampler statistics."""

import numpy as np
import pytest

from stokesdarcy.errors import ConfigError
from stokesdarcy.geometry import (BatchSizes, BoundarySegment, CoupledGeometry,
                                  Rect, classify_boundary_point, draw_batch,
                                  interface_frame)
from stokesdarcy.problems import get_problem

# chi-square 0.999 quantile at 99 degrees of freedom (10x10 cells)
CHI2_CRIT_99 = 148.23035916510173


def test_frame_porous_above():
    geom = CoupledGeometry(Rect(0, 1, 0, 1), Rect(0, 1, 1, 2))
    n, t = interface_frame(geom)
    assert np.allclose(n, [0, 1])
    assert np.allclose(t, [-1, 0])
    assert geom.interface_coord == 1.0


def test_frame_porous_below():
    geom = CoupledGeometry(Rect(0, 1, 1, 2), Rect(0, 1, 0, 1))
    n, t = interface_frame(geom)
    assert np.allclose(n, [0, -1])
    assert np.allclose(t, [1, 0])


def test_frame_orthonormal_for_all_builtins():
    for name in ("test1", "test2", "test3", "test4", "test5"):
        geom = get_problem(name).geometry
        n, t = interface_frame(geom)
        assert abs(np.dot(n, t)) == 0.0
        assert np.linalg.norm(n) == 1.0 and np.linalg.norm(t) == 1.0
        assert np.allclose(geom.normal_d, -n)


def test_vertical_interface():
    geom = CoupledGeometry(Rect(0, 1, 0, 2), Rect(1, 3, 0, 2))
    n, t = interface_frame(geom)
    assert np.allclose(n, [1, 0])
    assert np.allclose(t, [0, 1])


def test_no_shared_edge_rejected():
    with pytest.raises(ConfigError):
        CoupledGeometry(Rect(0, 1, 0, 1), Rect(0, 2, 1, 2))   # partial edge
    with pytest.raises(ConfigError):
        CoupledGeometry(Rect(0, 1, 0, 1), Rect(2, 3, 0, 1))   # detached
    with pytest.raises(ConfigError):
        CoupledGeometry(Rect(0, 1, 0, 1), Rect(0.5, 1.5, 0.5, 1.5))  # overlap


def _spec_batch(sizes, seed=0):
    spec = get_problem("test1")
    rng = np.random.default_rng(seed)
    return spec, draw_batch(spec.geometry, sizes, rng, spec.segments)


def test_zero_sizes_give_empty_batch():
    _, batch = _spec_batch(BatchSizes(0, 0, 0, 0, 0))
    assert batch.counts() == {k: 0 for k in batch.counts()}


def test_counts_match_request():
    _, batch = _spec_batch(BatchSizes(50, 60, 30, 40, 20))
    assert batch.counts() == {"interior_s": 50, "interior_d": 60,
                              "boundary_s": 30, "boundary_d": 40, "interface": 20}


def test_same_seed_bitwise_identical():
    spec = get_problem("test1")
    s = BatchSizes(40, 40, 20, 20, 10)
    b1 = draw_batch(spec.geometry, s, np.random.default_rng(9), spec.segments)
    b2 = draw_batch(spec.geometry, s, np.random.default_rng(9), spec.segments)
    assert b1.interior_s.tobytes() == b2.interior_s.tobytes()
    assert b1.interface.tobytes() == b2.interface.tobytes()
    for (s1, p1), (s2, p2) in zip(b1.boundary_d, b2.boundary_d):
        assert s1 is s2 and p1.tobytes() == p2.tobytes()


def test_containment_and_edge_exactness():
    spec, batch = _spec_batch(BatchSizes(500, 500, 300, 300, 200), seed=3)
    geom = spec.geometry
    rs, rd = geom.rect_s, geom.rect_d
    assert np.all(rs.contains(batch.interior_s[:, 0], batch.interior_s[:, 1], tol=0))
    assert np.all(rd.contains(batch.interior_d[:, 0], batch.interior_d[:, 1], tol=0))
    assert np.all(batch.interface[:, 1] == geom.interface_coord)
    for seg, pts in batch.boundary_s + batch.boundary_d:
        rect = geom.rect(seg.region)
        axis, coord, lo, hi = rect.side_edge(seg.side)
        fixed = pts[:, 1] if axis == "y" else pts[:, 0]
        along = pts[:, 0] if axis == "y" else pts[:, 1]
        assert np.all(fixed == coord)           # exactly on the edge
        assert np.all((along >= lo) & (along <= hi))
        # sampled points classify back to their own side
        for x, y in pts[:5]:
            assert classify_boundary_point(geom, seg.region, x, y) == seg.side


def test_corner_ownership_lexicographic():
    geom = get_problem("test5").geometry   # porous box below, interface on top
    # porous corner (0, 0) lies on both bottom and left; bottom wins
    assert classify_boundary_point(geom, "D", 0.0, 0.0) == "bottom"
    # free-flow corner (0, 2) lies on left and top; left wins
    assert classify_boundary_point(geom, "S", 0.0, 2.0) == "left"


def test_interior_mean_near_center():
    # componentwise sample mean of 1e5 uniform points on the unit square
    _, batch = _spec_batch(BatchSizes(100000, 0, 0, 0, 0), seed=12)
    mean = batch.interior_s.mean(axis=0)
    assert np.all(np.abs(mean - 0.5) < 0.005)


def test_interior_uniformity_chi_square():
    _, batch = _spec_batch(BatchSizes(100000, 0, 0, 0, 0), seed=4)
    hist, _, _ = np.histogram2d(batch.interior_s[:, 0], batch.interior_s[:, 1],
                                bins=[10, 10], range=[[0, 1], [0, 1]])
    expected = 100000 / 100.0
    stat = np.sum((hist - expected) ** 2 / expected)
    assert stat < CHI2_CRIT_99


def test_boundary_arclength_uniform():
    # side frequencies proportional to side lengths for a non-square region
    geom = CoupledGeometry(Rect(0, 2, 0, 1), Rect(0, 2, 1, 3))
    segs = [BoundarySegment("S", s, "dirichlet_velocity",
                            lambda x, y: (0 * x, 0 * x))
            for s in geom.outer_sides("S")]
    segs += [BoundarySegment("D", s, "dirichlet_pressure", lambda x, y: 0 * x)
             for s in geom.outer_sides("D")]
    rng = np.random.default_rng(8)
    batch = draw_batch(geom, BatchSizes(0, 0, 40000, 0, 0), rng, segs)
    counts = {seg.side: len(pts) for seg, pts in batch.boundary_s}
    total = sum(counts.values())
    # outer boundary of S: bottom 2, left 1, right 1
    assert abs(counts["bottom"] / total - 0.5) < 0.02
    assert abs(counts["left"] / total - 0.25) < 0.02


def test_segment_partition_validated():
    from stokesdarcy.geometry import check_segments

    geom = CoupledGeometry(Rect(0, 1, 0, 1), Rect(0, 1, 1, 2))
    segs = [BoundarySegment("S", "bottom", "dirichlet_velocity",
                            lambda x, y: (0 * x, 0 * x))]
    with pytest.raises(ConfigError):
        check_segments(geom, segs)   # left/right sides uncovered


def test_negative_sizes_rejected():
    with pytest.raises(ConfigError):
        BatchSizes(interior_s=-1).validate()
