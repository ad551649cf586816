"""Pareto-front utilities and the exact 2-objective hypervolume indicator.

Both objectives are minimized. The hypervolume of a front against a
reference point is the area it dominates inside the reference box; fronts
from different runs are comparable when measured against one shared
reference point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rollout import PENALTY, ObjectiveVector


def dominates(a, b) -> bool:
    """True iff `a` is no worse in both objectives and better in one."""
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


@dataclass(frozen=True)
class ParetoFront:
    """Mutually non-dominated objective points, optionally with genomes."""

    points: tuple[ObjectiveVector, ...]
    genomes: tuple | None = None
    label: str = ""

    def __post_init__(self):
        if self.genomes is not None and len(self.genomes) != len(self.points):
            raise ValueError("genomes must align one-to-one with points")
        # with two objectives, mutual non-dominance plus no duplicates is
        # equivalent to: sorted by f_acc strictly ascending, f_t strictly
        # descending
        ordered = sorted(self.points)
        for a, b in zip(ordered, ordered[1:]):
            if a[0] >= b[0] or a[1] <= b[1]:
                raise ValueError(f"front points {tuple(a)} and {tuple(b)} "
                                 "are not mutually non-dominated")

    def __len__(self) -> int:
        return len(self.points)


def extract_front(points, genomes=None, label: str = "") -> ParetoFront:
    """Maximal non-dominated subset, duplicates collapsed, sorted by f_acc.

    Sweep over points sorted by (f_acc, f_t): a point survives iff it
    strictly improves the best f_t seen so far. Exact duplicates keep their
    first occurrence (and its genome).
    """
    pts = [ObjectiveVector(float(p[0]), float(p[1])) for p in points]
    order = sorted(range(len(pts)), key=lambda i: (pts[i][0], pts[i][1], i))
    keep = []
    best_ft = np.inf
    for i in order:
        if pts[i][1] < best_ft:
            keep.append(i)
            best_ft = pts[i][1]
    kept_genomes = None if genomes is None else tuple(genomes[i] for i in keep)
    return ParetoFront(points=tuple(pts[i] for i in keep), genomes=kept_genomes, label=label)


def hypervolume_2d(front: ParetoFront, ref) -> float:
    """Exact dominated area between `front` and the reference point.

    Points with any coordinate at or beyond the reference are discarded
    (their rectangle would be degenerate). Empty result -> 0.
    """
    rx, ry = float(ref[0]), float(ref[1])
    if not (np.isfinite(rx) and np.isfinite(ry)):
        raise ValueError("reference point must be finite")
    pts = sorted(p for p in front.points if p[0] < rx and p[1] < ry)
    area = 0.0
    for i, (x, y) in enumerate(pts):
        next_x = pts[i + 1][0] if i + 1 < len(pts) else rx
        area += (next_x - x) * (ry - y)
    return area


def reference_point(fronts) -> ObjectiveVector:
    """Component-wise maximum over all fronts, scaled by 1.1.

    Divergence-penalty points are excluded first so one blown-up rollout
    cannot stretch the comparison box. Raises if no finite point remains.
    """
    best_acc = best_t = -np.inf
    for front in fronts:
        for p in front.points:
            if p[0] >= PENALTY or p[1] >= PENALTY:
                continue
            best_acc = max(best_acc, p[0])
            best_t = max(best_t, p[1])
    if not np.isfinite(best_acc):
        raise ValueError("no non-penalty points to build a reference from")
    return ObjectiveVector(1.1 * best_acc, 1.1 * best_t)
