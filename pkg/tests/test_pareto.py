import numpy as np
import pytest

from pdtune.pareto import ParetoFront, dominates, extract_front, hypervolume_2d, reference_point
from pdtune.rollout import PENALTY, ObjectiveVector


def brute_force_front(points):
    keep = set()
    for p in points:
        if not any(dominates(q, p) for q in points):
            keep.add((p[0], p[1]))
    return sorted(keep)


def mc_hypervolume(points, ref, n_samples=200_000, seed=0):
    """Monte-Carlo estimate of the dominated area inside the ref box."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, ref[0], size=n_samples)
    ys = rng.uniform(0.0, ref[1], size=n_samples)
    hit = np.zeros(n_samples, dtype=bool)
    for p in points:
        hit |= (xs >= p[0]) & (ys >= p[1])
    return hit.mean() * ref[0] * ref[1]


class TestDominates:
    def test_strictly_better(self):
        assert dominates((1.0, 2.0), (2.0, 3.0))

    def test_incomparable(self):
        assert not dominates((1.0, 3.0), (3.0, 1.0))
        assert not dominates((3.0, 1.0), (1.0, 3.0))

    def test_equal_points(self):
        assert not dominates((1.0, 2.0), (1.0, 2.0))

    def test_weak_improvement(self):
        assert dominates((1.0, 2.0), (1.0, 3.0))


class TestExtractFront:
    def test_dominated_dropped(self):
        front = extract_front([(1.0, 1.0), (2.0, 2.0)])
        assert front.points == (ObjectiveVector(1.0, 1.0),)

    def test_incomparable_retained(self):
        front = extract_front([(1.0, 3.0), (3.0, 1.0), (2.0, 2.0)])
        assert len(front) == 3

    def test_duplicates_collapse(self):
        front = extract_front([(1.0, 2.0), (1.0, 2.0), (0.5, 3.0)])
        assert len(front) == 2

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(1, 60))
            pts = [tuple(map(float, rng.integers(0, 8, size=2))) for _ in range(n)]
            mine = sorted((p.f_acc, p.f_t) for p in extract_front(pts).points)
            assert mine == brute_force_front(pts)

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        pts = [tuple(map(float, rng.uniform(0, 5, size=2))) for _ in range(50)]
        once = extract_front(pts)
        twice = extract_front(once.points)
        assert once.points == twice.points

    def test_genome_alignment(self):
        pts = [(2.0, 2.0), (1.0, 3.0), (3.0, 1.0)]
        genomes = ["a", "b", "c"]
        front = extract_front(pts, genomes=genomes)
        assert dict(zip(front.points, front.genomes)) == \
            {ObjectiveVector(1.0, 3.0): "b", ObjectiveVector(3.0, 1.0): "c",
             ObjectiveVector(2.0, 2.0): "a"}

    def test_empty_input(self):
        assert len(extract_front([])) == 0

    def test_front_invariant_enforced(self):
        with pytest.raises(ValueError):
            ParetoFront(points=(ObjectiveVector(1.0, 1.0), ObjectiveVector(2.0, 2.0)))
        with pytest.raises(ValueError):
            ParetoFront(points=(ObjectiveVector(1.0, 1.0), ObjectiveVector(1.0, 1.0)))


class TestHypervolume:
    def test_unit_square(self):
        front = extract_front([(1.0, 1.0)])
        assert hypervolume_2d(front, (2.0, 2.0)) == 1.0

    def test_two_point_rectangle_decomposition(self):
        front = extract_front([(1.0, 3.0), (3.0, 1.0)])
        assert hypervolume_2d(front, (4.0, 4.0)) == 5.0

    def test_dominated_point_contributes_nothing(self):
        base = extract_front([(1.0, 3.0), (3.0, 1.0)])
        extra = extract_front([(1.0, 3.0), (3.0, 1.0), (2.0, 3.5)])
        assert hypervolume_2d(base, (4.0, 4.0)) == hypervolume_2d(extra, (4.0, 4.0))

    def test_points_touching_reference_discarded(self):
        # (0.5, 2.0) hits the reference in f_t: degenerate rectangle, dropped
        front = extract_front([(1.0, 1.0), (0.5, 2.0)])
        assert hypervolume_2d(front, (2.0, 2.0)) == 1.0

    def test_all_discarded_gives_zero(self):
        front = extract_front([(3.0, 3.0)])
        assert hypervolume_2d(front, (2.0, 2.0)) == 0.0

    def test_monotone_in_new_points(self):
        rng = np.random.default_rng(3)
        ref = (10.0, 10.0)
        for _ in range(50):
            pts = [tuple(rng.uniform(0, 9, size=2)) for _ in range(15)]
            base = extract_front(pts)
            hv0 = hypervolume_2d(base, ref)
            extra = extract_front(pts + [tuple(rng.uniform(0, 9, size=2))])
            assert hypervolume_2d(extra, ref) >= hv0 - 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        pts = [tuple(rng.uniform(0, 5, size=2)) for _ in range(20)]
        ref = (6.0, 6.0)
        hv = hypervolume_2d(extract_front(pts), ref)
        for _ in range(5):
            rng.shuffle(pts)
            assert hypervolume_2d(extract_front(pts), ref) == hv

    def test_against_monte_carlo(self):
        rng = np.random.default_rng(5)
        for trial in range(10):
            n = int(rng.integers(1, 20))
            pts = [tuple(rng.uniform(0.5, 8.0, size=2)) for _ in range(n)]
            front = extract_front(pts)
            ref = (9.0, 9.0)
            exact = hypervolume_2d(front, ref)
            approx = mc_hypervolume(front.points, ref, seed=trial)
            assert exact == pytest.approx(approx, rel=0.02)

    def test_non_finite_reference_rejected(self):
        with pytest.raises(ValueError):
            hypervolume_2d(extract_front([(1.0, 1.0)]), (np.inf, 2.0))


class TestReferencePoint:
    def test_single_front_scaling(self):
        front = extract_front([(1.0, 2.0)])
        assert reference_point([front]) == ObjectiveVector(1.1, 2.2)

    def test_componentwise_max(self):
        fronts = [extract_front([(1.0, 4.0)]), extract_front([(3.0, 2.0)])]
        ref = reference_point(fronts)
        assert ref == pytest.approx((3.3, 4.4))

    def test_penalty_points_excluded(self):
        fronts = [extract_front([(PENALTY, PENALTY), (1.0, 1.0)])]
        assert reference_point(fronts) == pytest.approx((1.1, 1.1))

    def test_all_penalty_rejected(self):
        with pytest.raises(ValueError):
            reference_point([extract_front([(PENALTY, PENALTY)])])

    def test_reference_covers_all_points(self):
        rng = np.random.default_rng(6)
        fronts = [extract_front([tuple(rng.uniform(0.1, 5, size=2)) for _ in range(10)])
                  for _ in range(4)]
        ref = reference_point(fronts)
        for front in fronts:
            for p in front.points:
                assert p.f_acc < ref.f_acc and p.f_t < ref.f_t
