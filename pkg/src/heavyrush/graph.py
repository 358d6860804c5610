"""Areal adjacency structure underlying all spatial precision matrices.

Areas are 0-based and contiguous.  Adjacency is supplied as an explicit
edge list (one pair per shared border); geometry processing is out of
scope.  Duplicate and reversed edges are deduplicated silently, which is
common in exported adjacency files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import IndexOutOfRangeError, MissingColumnError, SelfLoopError


@dataclass(frozen=True, eq=False)
class SpatialGraph:
    """Symmetric binary neighbourhood structure over ``n`` areas.

    ``edges`` holds each unordered pair once, as ``(i, j)`` with ``i < j``;
    ``degree[i]`` counts the edges incident to area ``i``.  Instances are
    immutable and safe for concurrent shared reads.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    degree: np.ndarray = field(repr=False)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> list[int]:
        out = [j for (a, j) in self.edges if a == i]
        out += [a for (a, j) in self.edges if j == i]
        return sorted(out)


def build_graph(n: int, edge_list: Iterable[Sequence[int]]) -> SpatialGraph:
    """Validate and canonicalize an edge list into a :class:`SpatialGraph`.

    Raises :class:`SelfLoopError` for any pair ``(i, i)`` and
    :class:`IndexOutOfRangeError` for indices outside ``[0, n)``.
    Reversed/duplicate pairs collapse to a single edge.
    """
    if n <= 0:
        raise ValueError(f"graph needs at least one area, got n={n}")
    canonical: set[tuple[int, int]] = set()
    for pair in edge_list:
        i, j = int(pair[0]), int(pair[1])
        if i == j:
            raise SelfLoopError(f"edge ({i},{j}) connects an area to itself")
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRangeError(f"edge ({i},{j}) outside [0, {n})")
        canonical.add((min(i, j), max(i, j)))
    edges = tuple(sorted(canonical))
    degree = np.zeros(n, dtype=np.int64)
    for i, j in edges:
        degree[i] += 1
        degree[j] += 1
    degree.setflags(write=False)
    return SpatialGraph(n=n, edges=edges, degree=degree)


def dense_weights(g: SpatialGraph) -> np.ndarray:
    """Dense symmetric 0/1 weight matrix with zero diagonal."""
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = 1.0
        w[j, i] = 1.0
    return w


def read_adjacency_csv(path: str | Path, one_based: bool = False) -> list[tuple[int, int]]:
    """Read an edge list from a CSV with header ``i,j``.

    ``one_based=True`` shifts indices down by one on ingest.
    """
    shift = 1 if one_based else 0
    edges: list[tuple[int, int]] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"i", "j"} <= set(reader.fieldnames):
            raise MissingColumnError(f"{path}: adjacency CSV needs header 'i,j'")
        for row in reader:
            edges.append((int(row["i"]) - shift, int(row["j"]) - shift))
    return edges


def write_adjacency_csv(path: str | Path, g: SpatialGraph) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j"])
        for i, j in g.edges:
            writer.writerow([i, j])
