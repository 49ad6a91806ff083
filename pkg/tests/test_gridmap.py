import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratemap.gridmap import (
    Cell,
    GridMap,
    MapFormatError,
    block_average_prior,
    boustrophedon,
    complement_indices,
    elevation_to_traversability,
    fov_indices,
    load_map,
    path_weights,
    read_pgm,
    save_map,
    waypoint_path,
    write_pgm,
)


def test_csv_load(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("0,1\n0.5,0.25\n")
    m = load_map(p)
    assert m.shape == (2, 2)
    np.testing.assert_array_equal(m.values, [0, 1, 0.5, 0.25])


def test_pgm_p2_scaling(tmp_path):
    p = tmp_path / "m.pgm"
    p.write_text("P2\n# comment\n2 1\n255\n255 0\n")
    m = load_map(p)
    assert m[0, 0] == 1.0
    assert m[0, 1] == 0.0


def test_csv_out_of_range_reports_cell(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1.2,0\n0,0\n")
    with pytest.raises(MapFormatError, match=r"\(0, 0\)"):
        load_map(p)


def test_pgm_binary_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    g = np.round(rng.random((5, 7)) * 255) / 255
    write_pgm(tmp_path / "a.pgm", g)
    np.testing.assert_allclose(read_pgm(tmp_path / "a.pgm"), g, atol=1e-12)
    save_map(tmp_path / "b.csv", GridMap.from_array(g))
    np.testing.assert_allclose(load_map(tmp_path / "b.csv").as_array(), g)


def test_truncated_pgm(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n4 4\n255\n\x00\x01")
    with pytest.raises(MapFormatError):
        load_map(p)


def test_gridmap_invariants():
    with pytest.raises(ValueError):
        GridMap(2, 2, np.zeros(3))
    with pytest.raises(ValueError):
        GridMap.from_array(np.array([[0.0, 1.5]]))
    m = GridMap.from_array(np.arange(6).reshape(2, 3) / 5)
    assert m.index((1, 2)) == 5
    assert m.cell(4) == Cell(1, 1)


@pytest.mark.parametrize(
    "center, fov, shape, expected",
    [((64, 64), 7, (128, 128), 49), ((0, 0), 7, (128, 128), 16), ((0, 0), 1, (128, 128), 1)],
)
def test_fov_sizes(center, fov, shape, expected):
    m = GridMap.from_array(np.zeros(shape))
    idx = fov_indices(center, fov, fov, m)
    assert idx.size == expected
    if fov == 1:
        assert idx.tolist() == [0]


def test_fov_row_major_order():
    m = GridMap.from_array(np.zeros((5, 5)))
    assert fov_indices((2, 2), 3, 3, m).tolist() == [6, 7, 8, 11, 12, 13, 16, 17, 18]


def test_fov_rejects_even_side():
    m = GridMap.from_array(np.zeros((5, 5)))
    with pytest.raises(ValueError):
        fov_indices((2, 2), 4, 3, m)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.data())
def test_fov_indices_property(rows, cols, data):
    m = GridMap.from_array(np.zeros((rows, cols)))
    r = data.draw(st.integers(0, rows - 1))
    c = data.draw(st.integers(0, cols - 1))
    fr = data.draw(st.sampled_from([1, 3, 5, 7]))
    fc = data.draw(st.sampled_from([1, 3, 5, 7]))
    idx = fov_indices((r, c), fr, fc, m)
    assert len(set(idx.tolist())) == idx.size
    assert np.all((idx >= 0) & (idx < rows * cols))
    assert np.all(np.diff(idx) > 0)
    expect = {i * cols + j for i in range(rows) for j in range(cols)
              if abs(i - r) <= fr // 2 and abs(j - c) <= fc // 2}
    assert set(idx.tolist()) == expect


@pytest.mark.parametrize("sel, d, expected", [([1, 2], 4, [0, 3]), ([0, 1, 2], 3, []), ([], 3, [0, 1, 2])])
def test_complement(sel, d, expected):
    assert complement_indices(np.array(sel, dtype=int), d).tolist() == expected


def test_path_weights_closed_form():
    m = GridMap.from_array(np.zeros((1, 12)))
    w = path_weights([(0, 0)], 1.0, m).reshape(1, 12)
    assert w[0, 0] == 1.0
    assert math.isclose(w[0, 2], math.exp(-2), rel_tol=1e-12)
    assert math.isclose(w[0, 2], 0.135335, abs_tol=1e-6)
    w10 = path_weights([(0, 0)], 10.0, m)
    m2 = GridMap.from_array(np.zeros((1, 11)))
    assert math.isclose(path_weights([(0, 0)], 10.0, m2)[10], 0.606531, abs_tol=1e-6)
    assert w10.min() > 0


def test_path_weights_floor_and_nearest():
    m = GridMap.from_array(np.zeros((40, 40)))
    w = path_weights([(0, 0), (39, 39)], 1.0, m, floor=1e-6)
    assert w.min() == 1e-6
    assert w[m.index((39, 37))] == pytest.approx(math.exp(-2))


def test_path_weights_empty_path():
    with pytest.raises(ValueError):
        path_weights([], 1.0, GridMap.from_array(np.zeros((2, 2))))


def test_path_weights_match_brute_force():
    rng = np.random.default_rng(3)
    m = GridMap.from_array(np.zeros((9, 11)))
    path = [tuple(int(v) for v in rng.integers(0, (9, 11))) for _ in range(5)]
    w = path_weights(path, 2.5, m, floor=1e-9)
    for i in range(m.size):
        r, c = m.cell(i)
        d2 = min((r - pr) ** 2 + (c - pc) ** 2 for pr, pc in path)
        assert w[i] == pytest.approx(max(1e-9, math.exp(-d2 / (2 * 2.5**2))), rel=1e-12)


def test_elevation_examples():
    assert np.all(elevation_to_traversability(np.full((3, 3), 7.0)).values == 0)
    np.testing.assert_allclose(elevation_to_traversability(np.array([[0.0, 1.0, 3.0]])).values, [0, 1, 0.5])
    assert elevation_to_traversability(np.array([[4.0]])).values.tolist() == [0.0]


def test_elevation_8_neighbourhood():
    elev = np.zeros((3, 3))
    elev[1, 1] = 1.0
    x = elevation_to_traversability(elev).as_array()
    # centre differs from 8 neighbours, every other cell from one
    assert x[1, 1] == 1.0
    assert np.all(x[np.arange(3) != 1][:, [0, 2]] == 0.0)


def test_block_average_examples():
    np.testing.assert_array_equal(block_average_prior(GridMap(2, 2, np.array([0.0, 1, 1, 0])), 2), [0.5] * 4)
    rng = np.random.default_rng(1)
    m = GridMap.from_array(rng.random((4, 4)))
    np.testing.assert_array_equal(block_average_prior(m, 1), m.values)
    g = np.zeros((4, 4))
    g[2:, :2] = 1.0
    prior = block_average_prior(GridMap.from_array(g), 2).reshape(4, 4)
    np.testing.assert_array_equal(prior[2:, :2], 1.0)
    assert prior.sum() == 4.0
    with pytest.raises(ValueError):
        block_average_prior(m, 3)


def test_boustrophedon_is_connected():
    path = boustrophedon(10, 8, 3, margin=1)
    assert path[0] == Cell(1, 1)
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        assert abs(r0 - r1) + abs(c0 - c1) == 1


def test_waypoint_path():
    path = waypoint_path([(0, 0), (2, 3), (2, 1)])
    assert path == [Cell(0, 0), Cell(1, 0), Cell(2, 0), Cell(2, 1), Cell(2, 2), Cell(2, 3),
                    Cell(2, 2), Cell(2, 1)]
