"""Core TSP types: instances, canonical tours, distances and adjacency."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class TspInstance:
    """``n`` points in the unit square."""

    coords: np.ndarray

    def __post_init__(self) -> None:
        coords = np.array(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coords must have shape (n, 2), got {coords.shape}")
        if coords.shape[0] < 3:
            raise ValueError(f"a TSP instance needs at least 3 nodes, got {coords.shape[0]}")
        if not np.all(np.isfinite(coords)) or coords.min() < 0.0 or coords.max() > 1.0:
            raise ValueError("coordinates must lie in [0, 1]")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TspInstance):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self) -> int:
        return hash(self.coords.tobytes())


@dataclass(frozen=True)
class Tour:
    """A Hamiltonian cycle in canonical form.

    ``order[0] == 0`` and ``order[1] < order[-1]``, which fixes both the
    rotation and the direction of travel. Build one with :func:`canonicalize`.
    """

    order: tuple[int, ...]

    def __post_init__(self) -> None:
        order = tuple(int(v) for v in self.order)
        _check_permutation(order)
        if order[0] != 0 or order[1] > order[-1]:
            raise ValueError(f"tour {order} is not in canonical form; use canonicalize()")
        object.__setattr__(self, "order", order)

    @property
    def n(self) -> int:
        return len(self.order)

    def __len__(self) -> int:
        return len(self.order)

    def __iter__(self):
        return iter(self.order)

    def edges(self) -> list[tuple[int, int]]:
        """Consecutive node pairs, including the closing edge."""
        o = self.order
        return [(o[i], o[(i + 1) % len(o)]) for i in range(len(o))]


def _check_permutation(order: Sequence[int]) -> None:
    n = len(order)
    if n < 3:
        raise ValueError(f"a tour needs at least 3 nodes, got {n}")
    if sorted(order) != list(range(n)):
        raise ValueError(f"{list(order)} is not a permutation of 0..{n - 1}")


def canonicalize(order: Sequence[int]) -> Tour:
    """Rotate ``order`` to start at node 0 and orient it so order[1] < order[-1]."""
    order = [int(v) for v in order]
    _check_permutation(order)
    k = order.index(0)
    rotated = order[k:] + order[:k]
    if rotated[1] > rotated[-1]:
        rotated = [0] + rotated[:0:-1]
    return Tour(tuple(rotated))


def distance_matrix(instance: TspInstance | np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances, shape (n, n)."""
    coords = instance.coords if isinstance(instance, TspInstance) else np.asarray(instance, dtype=np.float64)
    diff = coords[:, None, :] - coords[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    # exact symmetry and zero diagonal regardless of rounding in the sum
    d = np.triu(d, 1)
    d = d + d.T
    d.setflags(write=False)
    return d


def tour_length(tour: Tour | Sequence[int], D: np.ndarray) -> float:
    order = np.asarray(tour.order if isinstance(tour, Tour) else tour, dtype=np.intp)
    D = np.asarray(D)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"distance matrix must be square, got {D.shape}")
    if len(order) != D.shape[0]:
        raise ValueError(f"tour has {len(order)} nodes but the distance matrix has {D.shape[0]}")
    return float(D[order, np.roll(order, -1)].sum())


def tour_to_adjacency(tour: Tour | Sequence[int]) -> np.ndarray:
    """Symmetric 0/1 adjacency (uint8) of the tour's n undirected edges."""
    order = np.asarray(tour.order if isinstance(tour, Tour) else tour, dtype=np.intp)
    n = len(order)
    a = np.zeros((n, n), dtype=np.uint8)
    nxt = np.roll(order, -1)
    a[order, nxt] = 1
    a[nxt, order] = 1
    return a


def check_adjacency(a: np.ndarray) -> None:
    """Raise ``ValueError`` unless ``a`` is a square symmetric 0/1 matrix with empty diagonal."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    if not np.isin(a, (0, 1)).all():
        raise ValueError("adjacency entries must be 0 or 1")
    if not np.array_equal(a, a.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diag(a)):
        raise ValueError("adjacency must have a zero diagonal")


def upper_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the unordered off-diagonal pairs (i < j)."""
    return np.triu_indices(n, 1)
