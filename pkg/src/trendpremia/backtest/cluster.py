"""Average-linkage clustering of strategy sleeves on correlation distance."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from ..errors import InsufficientData, InsufficientOverlap

MIN_OVERLAP = 40


@dataclass(frozen=True)
class Merge:
    left: tuple[str, ...]
    right: tuple[str, ...]
    distance: float

    @property
    def members(self) -> tuple[str, ...]:
        return self.left + self.right


@dataclass(frozen=True)
class ClusterTree:
    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]

    def linkage_matrix(self) -> np.ndarray:
        """SciPy-style (n-1, 4) linkage matrix: [id_a, id_b, distance, size]."""
        ids = {(leaf,): k for k, leaf in enumerate(self.leaves)}
        rows = []
        for k, m in enumerate(self.merges):
            a, b = ids[m.left], ids[m.right]
            rows.append([min(a, b), max(a, b), m.distance, len(m.members)])
            ids[m.members] = len(self.leaves) + k
        return np.array(rows, dtype=float)

    def render_text(self) -> str:
        lines = [f"leaves: {', '.join(self.leaves)}"]
        for k, m in enumerate(self.merges, start=1):
            lines.append(f"{k}. ({' '.join(m.left)}) + ({' '.join(m.right)}) at {m.distance:.6f}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "leaves": list(self.leaves),
            "merges": [{"left": list(m.left), "right": list(m.right), "distance": m.distance} for m in self.merges],
        }


def correlation_distance(frame: pd.DataFrame) -> np.ndarray:
    """1 - Pearson correlation over rows where every column is finite."""
    x = frame.to_numpy(dtype=float)
    x = x[np.all(np.isfinite(x), axis=1)]
    if x.shape[0] < MIN_OVERLAP:
        raise InsufficientOverlap(f"{x.shape[0]} overlapping observations, need {MIN_OVERLAP}")
    d = x - x.mean(axis=0)
    norm = np.sqrt(np.sum(d * d, axis=0))
    if np.any(norm <= 0):
        raise InsufficientData("a sleeve has zero variance over the overlap")
    corr = np.clip((d.T @ d) / np.outer(norm, norm), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return 1.0 - corr


def average_linkage(labels: Sequence[str], dist: np.ndarray) -> ClusterTree:
    """Agglomerate by smallest mean pairwise distance.

    Equal distances are broken by the label order of each cluster's first
    leaf, so merges are deterministic.
    """
    labels = tuple(str(x) for x in labels)
    n = len(labels)
    if n < 2:
        raise InsufficientData("clustering needs at least two series")
    d = {(i, j): float(dist[i, j]) for i in range(n) for j in range(n) if i != j}
    active = list(range(n))
    members = {i: (i,) for i in range(n)}
    merges = []
    next_id = n
    while len(active) > 1:
        best = None
        for x in range(len(active)):
            for y in range(x + 1, len(active)):
                a, b = active[x], active[y]
                key = (d[(a, b)], min(members[a]), min(members[b]))
                if best is None or key < best[0]:
                    best = (key, a, b)
        (dist_ab, _, _), a, b = best
        left, right = (a, b) if min(members[a]) < min(members[b]) else (b, a)
        new = members[left] + members[right]
        merges.append(Merge(tuple(labels[i] for i in members[left]), tuple(labels[i] for i in members[right]), dist_ab))
        na, nb = len(members[a]), len(members[b])
        active = [c for c in active if c not in (a, b)]
        for c in active:
            v = (na * d[(a, c)] + nb * d[(b, c)]) / (na + nb)
            d[(next_id, c)] = d[(c, next_id)] = v
        members[next_id] = new
        active.append(next_id)
        active.sort(key=lambda c: min(members[c]))
        next_id += 1
    return ClusterTree(labels, tuple(merges))


def horizon_cluster(sleeves: pd.DataFrame | Mapping[str, np.ndarray]) -> ClusterTree:
    """Cluster sleeve return series (one column per label) on 1 - correlation."""
    frame = sleeves if isinstance(sleeves, pd.DataFrame) else pd.DataFrame(dict(sleeves))
    if frame.shape[1] < 2:
        raise InsufficientData("clustering needs at least two series")
    return average_linkage([str(c) for c in frame.columns], correlation_distance(frame))
