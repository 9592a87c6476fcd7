"""Per-frame ghost removal by hierarchical clustering of pelvis positions.

Pose models sometimes emit two candidates for one person.  Real people
on stage keep a minimum pelvis separation, so candidates whose pelvis
points cluster closer than that separation are duplicate hypotheses of
one person; only the highest-confidence member of each cluster is kept.

Clustering is agglomerative with Ward linkage computed through the
Lance-Williams recurrence; two singletons link at their Euclidean
distance, so the common two-skeleton case cuts exactly at the configured
separation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Detection, JointLayout, pelvis


@dataclass(frozen=True)
class Merge:
    """One agglomeration step: clusters a and b join at the given height."""

    cluster_a: int
    cluster_b: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge history for n points: n-1 merges with non-decreasing heights.

    Point i is cluster i; the merge at position k creates cluster n + k.
    """

    point_count: int
    merges: tuple[Merge, ...]

    def cluster_count_at(self, cut_height: float) -> int:
        applied = sum(1 for m in self.merges if m.height < cut_height)
        return self.point_count - applied

    def labels_at(self, cut_height: float) -> np.ndarray:
        """Flat cluster labels after applying every merge below the cut.

        Labels are renumbered 0..k-1 in order of first point occurrence.
        """
        n = self.point_count
        parent = list(range(n + len(self.merges)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for k, m in enumerate(self.merges):
            if m.height >= cut_height:
                continue
            new = n + k
            parent[find(m.cluster_a)] = new
            parent[find(m.cluster_b)] = new

        labels = np.empty(n, dtype=int)
        seen: dict[int, int] = {}
        for i in range(n):
            root = find(i)
            labels[i] = seen.setdefault(root, len(seen))
        return labels


def ward_dendrogram(points: Sequence) -> Dendrogram:
    """Full Ward agglomeration of n >= 1 3D points.

    Ties on linkage height break deterministically toward the lowest
    (a, b) cluster-index pair.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = pts.shape[0]
    if n == 0:
        raise ValueError("need at least one point")

    sizes = {i: 1 for i in range(n)}
    dist: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = float(np.linalg.norm(pts[i] - pts[j]))

    active = set(range(n))
    merges = []
    next_id = n
    while len(active) > 1:
        (a, b) = min(dist, key=lambda key: (dist[key], key))
        d_ab = dist.pop((a, b))
        sa, sb = sizes.pop(a), sizes.pop(b)
        active.discard(a)
        active.discard(b)
        for k in sorted(active):
            d_ak = dist.pop((min(a, k), max(a, k)))
            d_bk = dist.pop((min(b, k), max(b, k)))
            sk = sizes[k]
            d_new = np.sqrt(
                ((sa + sk) * d_ak**2 + (sb + sk) * d_bk**2 - sk * d_ab**2)
                / (sa + sb + sk)
            )
            dist[(k, next_id)] = float(d_new)
        merges.append(Merge(cluster_a=a, cluster_b=b, height=d_ab, size=sa + sb))
        sizes[next_id] = sa + sb
        active.add(next_id)
        next_id += 1

    return Dendrogram(point_count=n, merges=tuple(merges))


def ward_cluster(points: Sequence, cut_height: float) -> np.ndarray:
    """Flat Ward cluster labels with merges below ``cut_height`` applied."""
    return ward_dendrogram(points).labels_at(cut_height)


def remove_ghosts(
    detections: Sequence[Detection],
    min_separation: float,
    layout: JointLayout,
) -> list[Detection]:
    """Keep one detection per pelvis cluster: the best score, lowest index on ties.

    Output preserves the input order of the survivors.
    """
    if len(detections) <= 1:
        return list(detections)
    anchors = [pelvis(d.skeleton, layout) for d in detections]
    labels = ward_cluster(anchors, min_separation)
    best: dict[int, int] = {}
    for i, (det, label) in enumerate(zip(detections, labels)):
        label = int(label)
        if label not in best or det.score > detections[best[label]].score:
            best[label] = i
    keep = sorted(best.values())
    return [detections[i] for i in keep]
