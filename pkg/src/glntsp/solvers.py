"""Exact and heuristic TSP solvers.

All solvers take a dense distance matrix and return a canonical :class:`Tour`.
Ties are always broken towards the lowest node index (or the lexicographically
smallest tour for the brute-force search).
"""

from __future__ import annotations

import itertools
from enum import Enum
from functools import lru_cache

import numpy as np

from glntsp.graph import Tour, canonicalize, tour_length

BRUTE_FORCE_MAX_N = 10
HELD_KARP_MAX_N = 22
DEFAULT_MEMORY_CAP = 2 * 1024**3


class SolverKind(str, Enum):
    BRUTE_FORCE = "brute_force"
    HELD_KARP = "held_karp"
    NEAREST_NEIGHBOR = "nearest_neighbor"
    NEAREST_INSERTION = "nearest_insertion"
    RANDOM_INSERTION = "random_insertion"
    FARTHEST_INSERTION = "farthest_insertion"
    TWO_OPT_REFINED = "two_opt_refined"


class SolverError(ValueError):
    pass


def _as_square(D: np.ndarray) -> np.ndarray:
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise SolverError(f"distance matrix must be square, got {D.shape}")
    if D.shape[0] < 3:
        raise SolverError(f"need at least 3 nodes, got {D.shape[0]}")
    return D


@lru_cache(maxsize=None)
def _canonical_permutations(n: int) -> np.ndarray:
    # tails of canonical tours, in lexicographic order: perms of 1..n-1 with p[0] < p[-1]
    perms = np.array(list(itertools.permutations(range(1, n))), dtype=np.int8)
    return perms[perms[:, 0] < perms[:, -1]]


def solve_brute_force(D: np.ndarray) -> Tour:
    """Enumerate all (n-1)!/2 tours; exact for 3 <= n <= 10."""
    D = _as_square(D)
    n = D.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise SolverError(f"brute force supports n <= {BRUTE_FORCE_MAX_N}, got {n}")
    tails = _canonical_permutations(n).astype(np.intp)
    lengths = D[0, tails[:, 0]] + D[tails[:, -1], 0]
    for c in range(tails.shape[1] - 1):
        lengths += D[tails[:, c], tails[:, c + 1]]
    best = int(np.argmin(lengths))
    return Tour((0, *tails[best].tolist()))


@lru_cache(maxsize=4)
def _held_karp_layers(m: int) -> list[list[tuple[np.ndarray, np.ndarray]]]:
    """For each subset size s >= 2 and each bit b, the masks of size s containing b."""
    masks = np.arange(1 << m, dtype=np.int64)
    popcount = np.zeros(1 << m, dtype=np.int8)
    for b in range(m):
        popcount += ((masks >> b) & 1).astype(np.int8)
    layers = []
    for s in range(2, m + 1):
        layer_masks = masks[popcount == s]
        per_bit = []
        for b in range(m):
            sel = layer_masks[(layer_masks >> b) & 1 == 1]
            per_bit.append((sel, sel ^ (1 << b)))
        layers.append(per_bit)
    return layers


def solve_held_karp(D: np.ndarray, memory_cap: int = DEFAULT_MEMORY_CAP) -> Tour:
    """Exact subset dynamic program, O(n^2 2^n) time and O(n 2^n) memory.

    Node 0 is fixed as the start; ``dp[S, j]`` is the shortest path from 0
    through the node set ``S`` (over nodes 1..n-1) ending at ``j``.
    """
    D = _as_square(D)
    n = D.shape[0]
    if n > HELD_KARP_MAX_N:
        raise SolverError(f"Held-Karp supports n <= {HELD_KARP_MAX_N}, got {n}")
    m = n - 1
    needed = (1 << m) * m * 8
    if needed > memory_cap:
        raise SolverError(f"Held-Karp table needs {needed} bytes, cap is {memory_cap}")

    inner = D[1:, 1:]
    dp = np.full((1 << m, m), np.inf)
    dp[1 << np.arange(m), np.arange(m)] = D[0, 1:]
    for per_bit in _held_karp_layers(m):
        for b, (sel, prev) in enumerate(per_bit):
            dp[sel, b] = (dp[prev] + inner[:, b]).min(axis=1)

    full = (1 << m) - 1
    last = int(np.argmin(dp[full] + D[1:, 0]))
    path = [last]
    mask = full
    while mask & (mask - 1):
        prev = mask ^ (1 << last)
        last = int(np.argmin(dp[prev] + inner[:, last]))
        path.append(last)
        mask = prev
    return canonicalize([0] + [j + 1 for j in reversed(path)])


def nearest_neighbor(D: np.ndarray, start: int = 0) -> Tour:
    D = _as_square(D)
    n = D.shape[0]
    if not 0 <= start < n:
        raise SolverError(f"start node {start} out of range for n={n}")
    visited = np.zeros(n, dtype=bool)
    order = [start]
    visited[start] = True
    cur = start
    for _ in range(n - 1):
        cand = np.where(visited, np.inf, D[cur])
        cur = int(np.argmin(cand))
        visited[cur] = True
        order.append(cur)
    return canonicalize(order)


INSERTION_RULES = ("nearest", "random", "farthest")


def insertion_heuristic(
    D: np.ndarray,
    rule: str,
    rng: np.random.Generator | None = None,
    start: int | None = None,
) -> Tour:
    """Grow a tour by cheapest-position insertion.

    The initial 2-cycle is the globally shortest edge, or ``start`` with its
    nearest neighbour when ``start`` is given. The next city is picked by
    ``rule``: ``nearest`` (closest to the partial tour), ``farthest`` (largest
    distance to the partial tour) or ``random`` (uniform, drawn from ``rng``).
    """
    if rule not in INSERTION_RULES:
        raise SolverError(f"unknown insertion rule {rule!r}")
    if rule == "random" and rng is None:
        raise SolverError("random insertion needs a seeded rng")
    D = _as_square(D)
    n = D.shape[0]

    if start is None:
        masked = np.where(np.eye(n, dtype=bool), np.inf, D)
        a, b = np.unravel_index(int(np.argmin(masked)), D.shape)
    else:
        if not 0 <= start < n:
            raise SolverError(f"start node {start} out of range for n={n}")
        a = start
        b = int(np.argmin(np.where(np.arange(n) == start, np.inf, D[start])))
    tour = [int(a), int(b)]
    in_tour = np.zeros(n, dtype=bool)
    in_tour[tour] = True
    # distance from every city to its closest tour city
    closest = np.minimum(D[a], D[b])

    for _ in range(n - 2):
        remaining = np.flatnonzero(~in_tour)
        if rule == "nearest":
            c = int(remaining[np.argmin(closest[remaining])])
        elif rule == "farthest":
            c = int(remaining[np.argmax(closest[remaining])])
        else:
            c = int(remaining[rng.integers(len(remaining))])
        t = np.asarray(tour)
        nxt = np.roll(t, -1)
        cost = D[t, c] + D[c, nxt] - D[t, nxt]
        pos = int(np.argmin(cost))
        tour.insert(pos + 1, c)
        in_tour[c] = True
        closest = np.minimum(closest, D[c])
    return canonicalize(tour)


def two_opt_refine(tour: Tour, D: np.ndarray, tol: float = 1e-12) -> Tour:
    """Apply improving 2-edge exchanges until none remains.

    Each pass scans ``i`` in order and takes the best exchange for that ``i``.
    """
    D = _as_square(D)
    order = np.asarray(tour.order, dtype=np.intp)
    n = len(order)
    if n != D.shape[0]:
        raise SolverError(f"tour has {n} nodes but the distance matrix has {D.shape[0]}")
    improved = True
    while improved:
        improved = False
        for i in range(n - 2):
            a, b = order[i], order[i + 1]
            # j runs over edges (order[j], order[j+1]) not adjacent to edge i
            j = np.arange(i + 2, n if i > 0 else n - 1)
            if len(j) == 0:
                continue
            c = order[j]
            d = order[(j + 1) % n]
            delta = D[a, c] + D[b, d] - D[a, b] - D[c, d]
            k = int(np.argmin(delta))
            if delta[k] < -tol:
                jj = j[k]
                order[i + 1 : jj + 1] = order[i + 1 : jj + 1][::-1]
                improved = True
    return canonicalize(order.tolist())


def two_opt_labeler(D: np.ndarray, restarts: int = 10) -> Tour:
    """Best of ``restarts`` farthest-insertion starts, each refined by 2-opt."""
    D = _as_square(D)
    n = D.shape[0]
    best, best_len = None, np.inf
    for start in range(min(restarts, n)):
        t = two_opt_refine(insertion_heuristic(D, "farthest", start=start), D)
        length = tour_length(t, D)
        if length < best_len:
            best, best_len = t, length
    return best


def solve(D: np.ndarray, kind: SolverKind | str, rng: np.random.Generator | None = None) -> Tour:
    """Dispatch to a solver by name. ``two_opt_refined`` runs the 2-opt labeler."""
    kind = SolverKind(kind)
    if kind is SolverKind.BRUTE_FORCE:
        return solve_brute_force(D)
    if kind is SolverKind.HELD_KARP:
        return solve_held_karp(D)
    if kind is SolverKind.NEAREST_NEIGHBOR:
        return nearest_neighbor(D)
    if kind is SolverKind.NEAREST_INSERTION:
        return insertion_heuristic(D, "nearest")
    if kind is SolverKind.RANDOM_INSERTION:
        return insertion_heuristic(D, "random", rng=rng)
    if kind is SolverKind.FARTHEST_INSERTION:
        return insertion_heuristic(D, "farthest")
    return two_opt_labeler(D)
