import itertools

import numpy as np
import pytest

from glntsp.graph import TspInstance, canonicalize, distance_matrix, tour_length
from glntsp.solvers import (
    SolverError,
    SolverKind,
    insertion_heuristic,
    nearest_neighbor,
    solve,
    solve_brute_force,
    solve_held_karp,
    two_opt_labeler,
    two_opt_refine,
)


def random_D(rng, n):
    return distance_matrix(TspInstance(rng.random((n, 2))))


def test_brute_force_unit_square(unit_square):
    D = distance_matrix(unit_square)
    t = solve_brute_force(D)
    assert t.order == (0, 1, 2, 3)
    assert tour_length(t, D) == pytest.approx(4.0)


def test_brute_force_triangle(rng):
    assert solve_brute_force(random_D(rng, 3)).order == (0, 1, 2)


def test_brute_force_beats_every_enumerated_tour(rng):
    D = random_D(rng, 8)
    best = tour_length(solve_brute_force(D), D)
    lengths = {canonicalize((0,) + p).order: tour_length((0,) + p, D) for p in itertools.permutations(range(1, 8))}
    assert len(lengths) == 2520
    assert all(best <= v + 1e-12 for v in lengths.values())


def test_brute_force_range():
    with pytest.raises(SolverError):
        solve_brute_force(np.zeros((11, 11)))


def test_held_karp_unit_square(unit_square):
    D = distance_matrix(unit_square)
    assert tour_length(solve_held_karp(D), D) == pytest.approx(4.0)


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 8, 9])
def test_held_karp_matches_brute_force(rng, n):
    for _ in range(15):
        D = random_D(rng, n)
        assert tour_length(solve_held_karp(D), D) == pytest.approx(tour_length(solve_brute_force(D), D), abs=1e-9)


def test_held_karp_limits():
    with pytest.raises(SolverError):
        solve_held_karp(np.zeros((23, 23)))
    with pytest.raises(SolverError):
        solve_held_karp(np.ones((16, 16)) - np.eye(16), memory_cap=1024)


def test_nearest_neighbor_unit_square(unit_square):
    D = distance_matrix(unit_square)
    assert tour_length(nearest_neighbor(D, 0), D) == pytest.approx(4.0)


def test_nearest_neighbor_trace():
    # 0 -> 1 (0.1) -> 2 (0.2) -> 3, ties impossible on this line
    D = distance_matrix(TspInstance([[0, 0], [0.1, 0], [0.3, 0], [1, 0]]))
    assert nearest_neighbor(D).order == (0, 1, 2, 3)


def test_nearest_neighbor_bad_start(unit_square):
    with pytest.raises(SolverError):
        nearest_neighbor(distance_matrix(unit_square), start=4)


@pytest.mark.parametrize("rule", ["nearest", "random", "farthest"])
def test_insertion_returns_valid_deterministic_tours(rng, rule):
    D = random_D(rng, 15)
    a = insertion_heuristic(D, rule, rng=np.random.default_rng(3))
    b = insertion_heuristic(D, rule, rng=np.random.default_rng(3))
    assert a == b
    assert sorted(a.order) == list(range(15))


def test_insertion_requires_rng_for_random(unit_square):
    with pytest.raises(SolverError):
        insertion_heuristic(distance_matrix(unit_square), "random")
    with pytest.raises(SolverError):
        insertion_heuristic(distance_matrix(unit_square), "cheapest")


def test_insertion_square_is_optimal(unit_square):
    D = distance_matrix(unit_square)
    for rule in ("nearest", "farthest"):
        assert tour_length(insertion_heuristic(D, rule), D) == pytest.approx(4.0)


def test_two_opt_keeps_optimal_square(unit_square):
    D = distance_matrix(unit_square)
    assert tour_length(two_opt_refine(canonicalize([0, 1, 2, 3]), D), D) == pytest.approx(4.0)


def test_two_opt_uncrosses_square(unit_square):
    D = distance_matrix(unit_square)
    crossed = canonicalize([0, 2, 1, 3])
    assert tour_length(crossed, D) == pytest.approx(2 + 2 * np.sqrt(2))
    assert tour_length(two_opt_refine(crossed, D), D) == pytest.approx(4.0)


def test_two_opt_never_worse_than_nn(rng):
    for _ in range(10):
        D = random_D(rng, 50)
        nn = nearest_neighbor(D)
        refined = two_opt_refine(nn, D)
        assert tour_length(refined, D) <= tour_length(nn, D) + 1e-12


def test_optimality_dominance(rng):
    for n in (6, 8, 10):
        D = random_D(rng, n)
        opt = tour_length(solve_brute_force(D), D)
        assert tour_length(solve_held_karp(D), D) == pytest.approx(opt, abs=1e-9)
        for kind in SolverKind:
            assert tour_length(solve(D, kind, rng=np.random.default_rng(0)), D) >= opt - 1e-9


def test_two_opt_labeler_close_to_optimal(rng):
    D = random_D(rng, 12)
    assert tour_length(two_opt_labeler(D), D) <= 1.05 * tour_length(solve_held_karp(D), D)


def test_published_baselines_at_n50():
    # published TSP50 means for these heuristics
    rng = np.random.default_rng(50)
    nn, ri = [], []
    for _ in range(1000):
        D = random_D(rng, 50)
        nn.append(tour_length(nearest_neighbor(D), D))
        ri.append(tour_length(insertion_heuristic(D, "random", rng=rng), D))
    assert np.mean(nn) == pytest.approx(7.00, abs=0.06)
    assert np.mean(ri) == pytest.approx(6.13, abs=0.06)
