import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratemap.gridmap import Cell
from ratemap.oracles import dijkstra_cost
from ratemap.planner import PlanConfig, astar, cell_cost, path_cost, plan, save_path

CFG = PlanConfig()


def test_cell_cost_examples():
    assert cell_cost(0.3, CFG, 1024) == pytest.approx(0.325)
    assert cell_cost(0.6, CFG, 1024) == pytest.approx(538.624)
    assert cell_cost(CFG.epsilon, CFG, 1024) == pytest.approx(CFG.epsilon + CFG.a)


def test_plan_config_validation():
    with pytest.raises(ValueError):
        PlanConfig(a=0.0)
    with pytest.raises(ValueError):
        PlanConfig(epsilon=1.5)


def test_free_corridor():
    path = plan(np.zeros(3), (1, 3), (0, 0), (0, 2), CFG)
    assert path == [Cell(0, 0), Cell(0, 1), Cell(0, 2)]
    costs = cell_cost(np.zeros((1, 3)), CFG, 3)
    assert path_cost(path, costs) == pytest.approx(3 * CFG.a)


def test_avoids_centre():
    x = np.zeros((3, 3))
    x[1, 1] = 1.0
    path = plan(x.reshape(-1), (3, 3), (0, 0), (2, 2), CFG)
    assert Cell(1, 1) not in path
    assert len(path) == 5
    costs = cell_cost(x, CFG, 9)
    assert path_cost(path, costs) == pytest.approx(dijkstra_cost(costs, (0, 0), (2, 2)))


def test_all_infeasible_gives_manhattan_path():
    path = plan(np.ones(20), (4, 5), (0, 0), (3, 4), CFG)
    assert len(path) == 3 + 4 + 1
    costs = cell_cost(np.ones((4, 5)), CFG, 20)
    assert path_cost(path, costs) == pytest.approx(dijkstra_cost(costs, (0, 0), (3, 4)))


def test_start_equals_goal():
    assert plan(np.zeros(4), (2, 2), (1, 1), (1, 1), CFG) == [Cell(1, 1)]


def test_path_is_four_connected():
    rng = np.random.default_rng(0)
    x = rng.random(100)
    path = plan(x, (10, 10), (0, 0), (9, 9), CFG)
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        assert abs(r0 - r1) + abs(c0 - c1) == 1


def test_eight_connected_flag():
    cfg = PlanConfig(eight_connected=True)
    path = plan(np.zeros(25), (5, 5), (0, 0), (4, 4), cfg)
    assert len(path) == 5
    costs = cell_cost(np.zeros((5, 5)), cfg, 25)
    assert path_cost(path, costs) == pytest.approx(dijkstra_cost(costs, (0, 0), (4, 4), eight_connected=True))


def test_deterministic_ties():
    a = plan(np.zeros(36), (6, 6), (0, 0), (5, 5), CFG)
    b = plan(np.zeros(36), (6, 6), (0, 0), (5, 5), CFG)
    assert a == b


def test_out_of_bounds():
    with pytest.raises(IndexError):
        plan(np.zeros(4), (2, 2), (0, 0), (2, 0), CFG)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**31), st.booleans())
def test_astar_matches_dijkstra(rows, cols, seed, eight):
    rng = np.random.default_rng(seed)
    x = rng.random((rows, cols))
    cfg = PlanConfig(eight_connected=eight)
    costs = cell_cost(x, cfg, rows * cols)
    start = tuple(int(v) for v in rng.integers(0, (rows, cols)))
    goal = tuple(int(v) for v in rng.integers(0, (rows, cols)))
    path = astar(costs, start, goal, cfg.a, eight)
    assert path[0] == start and path[-1] == goal
    assert path_cost(path, costs) == pytest.approx(dijkstra_cost(costs, start, goal, eight), abs=1e-9)


def test_save_path(tmp_path):
    save_path(tmp_path / "p.csv", [Cell(0, 0), Cell(0, 1)])
    assert (tmp_path / "p.csv").read_text() == "row,col\n0,0\n0,1\n"
