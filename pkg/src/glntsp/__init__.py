"""Graph Learning Network for the Euclidean travelling salesman problem.

Train a recurrent graph-convolutional edge predictor on labelled TSP
instances, decode its adjacency predictions into tours with a masked greedy
walk, and benchmark the result against exact and heuristic solvers.
"""

from glntsp.graph import (
    Tour,
    TspInstance,
    canonicalize,
    distance_matrix,
    tour_length,
    tour_to_adjacency,
)

__version__ = "0.1.0"

__all__ = [
    "Tour",
    "TspInstance",
    "canonicalize",
    "distance_matrix",
    "tour_length",
    "tour_to_adjacency",
]
