import numpy as np
import pytest

from fairrank import (
    Candidate,
    Distribution,
    Ranking,
    SubgroupLabel,
    check_feasibility,
    detconstsort,
    ndcg,
    sort_by_score,
)
from fairrank.detconstsort import ceil_quota, floor_quota
from fairrank.errors import InsufficientCandidates, InvalidRank

X, Y = SubgroupLabel(["X"]), SubgroupLabel(["Y"])
HALF = Distribution({X: 0.5, Y: 0.5})


def make(*pairs):
    return sort_by_score([Candidate(cid, s, SubgroupLabel([g]))
                          for cid, s, g in pairs])


def random_instance(rng):
    """Random pool, k and a target that is feasible by construction.

    The target comes from the group counts of a random k-subset, so each
    group's ceil(p_g * k) never exceeds its supply.
    """
    n = int(rng.integers(1, 13))
    n_groups = int(rng.integers(1, 5))
    labels = [SubgroupLabel([f"g{rng.integers(0, n_groups)}"]) for _ in range(n)]
    cands = [Candidate(f"c{i}", float(rng.uniform()), g)
             for i, g in enumerate(labels)]
    ranking = sort_by_score(cands)
    k = int(rng.integers(1, n + 1))
    subset = rng.choice(n, size=k, replace=False)
    counts: dict[SubgroupLabel, int] = {}
    for i in subset:
        g = cands[int(i)].true_label
        counts[g] = counts.get(g, 0) + 1
    target = Distribution({g: c / k for g, c in counts.items()})
    return ranking, target, k


def naive_constrained(original: Ranking, target: Distribution, k: int) -> Ranking:
    """Floor-triggered insertion without the score-improving swap phase."""
    queues = {g: [c for c in original.items if c.true_label == g]
              for g in target.labels()}
    counts = {g: 0 for g in target.labels()}
    mins = {g: 0 for g in target.labels()}
    placed = []
    counter = 0
    while len(placed) < k:
        counter += 1
        changed = [g for g, p in target.items() if floor_quota(p, counter) > mins[g]]
        changed.sort(key=lambda g: (-(queues[g][counts[g]].score
                                      if counts[g] < len(queues[g]) else -1e18), g))
        for g in changed:
            placed.append(queues[g][counts[g]])
            counts[g] += 1
            mins[g] += 1
            if len(placed) == k:
                break
    return Ranking(tuple(placed), "reranked")


class TestQuotaArithmetic:
    def test_float_guards(self):
        assert floor_quota(0.7, 300) == 210  # 0.7 * 300 = 209.999... in binary
        assert floor_quota(0.3, 10) == 3
        assert floor_quota(1 / 3, 9) == 3
        assert floor_quota(1 / 3, 10) == 3
        assert ceil_quota(0.5, 4) == 2
        assert ceil_quota(0.45, 10) == 5
        assert ceil_quota(0.7, 300) == 210


class TestCheckFeasibility:
    def test_alternating_is_feasible(self):
        r = make(("X1", 0.9, "X"), ("Y1", 0.7, "Y"), ("X2", 0.8, "X"), ("Y2", 0.6, "Y"))
        reordered = Ranking((r.items[0], r.items[2], r.items[1], r.items[3]), "reranked")
        ok, violation = check_feasibility(reordered, HALF, 4)
        assert ok and violation is None

    def test_front_loaded_violates(self):
        r = Ranking(tuple(Candidate(c, s, SubgroupLabel([g])) for c, s, g in
                          [("X1", 0.9, "X"), ("X2", 0.8, "X"),
                           ("X3", 0.7, "X"), ("Y1", 0.6, "Y")]), "original")
        ok, violation = check_feasibility(r, HALF, 4)
        assert not ok
        assert violation.position == 2
        assert violation.group == Y

    def test_single_group_trivially_true(self):
        r = make(("a", 0.9, "X"), ("b", 0.8, "X"))
        ok, _ = check_feasibility(r, Distribution({X: 1.0}), 2)
        assert ok

    def test_k_bounds(self):
        r = make(("a", 0.9, "X"))
        with pytest.raises(InvalidRank):
            check_feasibility(r, Distribution({X: 1.0}), 2)


class TestDetConstSort:
    def test_worked_example(self):
        r = make(("X1", 0.9, "X"), ("X2", 0.8, "X"), ("Y1", 0.7, "Y"), ("Y2", 0.6, "Y"))
        out = detconstsort(r, HALF, 4)
        assert out.ids() == ["X1", "Y1", "X2", "Y2"]
        assert out.source == "reranked"

    def test_single_group_returns_topk(self):
        r = make(("a", 0.9, "X"), ("b", 0.8, "X"), ("c", 0.7, "X"))
        out = detconstsort(r, Distribution({X: 1.0}), 2)
        assert out.ids() == ["a", "b"]

    def test_already_feasible_input(self):
        r = make(("Y1", 0.9, "Y"), ("X1", 0.8, "X"), ("X2", 0.7, "X"), ("Y2", 0.6, "Y"))
        out = detconstsort(r, HALF, 4)
        ok, _ = check_feasibility(out, HALF, 4)
        assert ok

    def test_feasibility_on_random_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(300):
            ranking, target, k = random_instance(rng)
            out = detconstsort(ranking, target, k)
            assert len(out) == k
            ok, violation = check_feasibility(out, target, k)
            assert ok, f"violation {violation} for target {target} k={k}"
            # output is a subset of the input
            assert set(out.ids()) <= set(ranking.ids())
            # within-group relative order (hence score order) is preserved
            for g in target.labels():
                orig_ids = [c.id for c in ranking.items if c.true_label == g]
                out_ids = [c.id for c in out.items if c.true_label == g]
                positions = [orig_ids.index(i) for i in out_ids]
                assert positions == sorted(positions)
                out_scores = [c.score for c in out.items if c.true_label == g]
                assert all(a >= b for a, b in zip(out_scores, out_scores[1:]))

    def test_swaps_never_hurt_ranking_quality(self):
        rng = np.random.default_rng(99)
        for _ in range(200):
            ranking, target, k = random_instance(rng)
            swapped = detconstsort(ranking, target, k)
            plain = naive_constrained(ranking, target, k)
            assert ndcg(swapped) >= ndcg(plain) - 1e-12

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        ranking, target, k = random_instance(rng)
        a = detconstsort(ranking, target, k)
        b = detconstsort(ranking, target, k)
        assert a.ids() == b.ids()

    def test_insufficient_supply(self):
        r = make(("X1", 0.9, "X"), ("X2", 0.8, "X"), ("Y1", 0.7, "Y"))
        with pytest.raises(InsufficientCandidates) as exc:
            detconstsort(r, HALF, 4)
        assert exc.value.group == Y

    def test_absent_group_with_positive_mass(self):
        r = make(("X1", 0.9, "X"), ("X2", 0.8, "X"))
        with pytest.raises(InsufficientCandidates):
            detconstsort(r, HALF, 2)

    def test_invalid_k(self):
        r = make(("X1", 0.9, "X"))
        with pytest.raises(InvalidRank):
            detconstsort(r, Distribution({X: 1.0}), 0)

    def test_constrains_on_inferred_labels(self):
        items = [
            Candidate("a", 0.9, X, inferred_label=Y),
            Candidate("b", 0.8, X, inferred_label=X),
            Candidate("c", 0.7, Y, inferred_label=X),
            Candidate("d", 0.6, Y, inferred_label=Y),
        ]
        r = sort_by_score(items)
        out = detconstsort(r, HALF, 4, which_label="inferred")
        ok_inferred, _ = check_feasibility(out, HALF, 4, which_label="inferred")
        assert ok_inferred
        # inferred floors force "a" (inferred Y) into an early slot
        assert out.ids()[:2] == ["a", "b"]

    def test_three_group_rotation(self):
        pool = [(f"A{i}", 0.9 - i / 100, "A") for i in range(4)] + \
               [(f"B{i}", 0.85 - i / 100, "B") for i in range(4)] + \
               [(f"C{i}", 0.8 - i / 100, "C") for i in range(4)]
        r = make(*pool)
        third = Distribution({SubgroupLabel([g]): 1 / 3 for g in "ABC"})
        out = detconstsort(r, third, 9)
        ok, _ = check_feasibility(out, third, 9)
        assert ok
        counts = {g: 0 for g in "ABC"}
        for c in out.items:
            counts[c.true_label.parts[0]] += 1
        assert counts == {"A": 3, "B": 3, "C": 3}
