"""Deterministic constrained re-ranking with per-prefix group floors.

The re-ranker builds a top-k list in which every group g occupies at
least ``floor(p_g * j)`` of the first j positions, for every prefix
length j <= k, while greedily improving score order wherever the floor
constraints leave slack.

Mechanics: a virtual position counter advances and group floors
``floor(p_g * counter)`` are recomputed. Whenever a group's floor
increases, that group's next-best candidate is appended at the first
empty slot and tagged with its latest feasible 1-based position (the
current counter value). Groups triggering together are processed in
decreasing order of their next candidate's score. Each appended
candidate then bubbles upward while its score strictly exceeds its
predecessor's and the predecessor's tag allows it to move one slot down.
The tag discipline is exactly what keeps every prefix floor intact, so
``check_feasibility`` is the ground-truth oracle for any change here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .core import Distribution, Ranking, SubgroupLabel
from .errors import InsufficientCandidates, InvalidRank

# Guard against binary float error in p*k (e.g. 0.7 * 300 = 209.99...97):
# nudge products up by well under any meaningful fractional gap before
# taking the floor.
_FLOOR_EPS = 1e-9


def floor_quota(p: float, j: int) -> int:
    """floor(p * j), robust to float representation error."""
    return int(math.floor(p * j + _FLOOR_EPS))


def ceil_quota(p: float, j: int) -> int:
    """ceil(p * j), robust to float representation error."""
    return int(math.ceil(p * j - _FLOOR_EPS))


@dataclass
class FeasibilityState:
    """Bookkeeping for a partially built constrained ranking.

    counts:     candidates placed so far per group.
    min_counts: current floor requirement per group.
    max_index:  per placed slot, the latest 1-based position its occupant
                may hold without breaking a prefix floor.
    last_empty: index of the next open slot (0-based).
    """

    counts: dict[SubgroupLabel, int] = field(default_factory=dict)
    min_counts: dict[SubgroupLabel, int] = field(default_factory=dict)
    max_index: list[int] = field(default_factory=list)
    last_empty: int = 0


class FeasibilityViolation(NamedTuple):
    position: int
    group: SubgroupLabel


def check_feasibility(ranking: Ranking, target: Distribution, k: int,
                      which_label: str = "true",
                      ) -> tuple[bool, FeasibilityViolation | None]:
    """Verify count_g(top j) >= floor(p_g * j) for all groups and all j <= k.

    Returns (ok, first violation) where the violation carries the 1-based
    prefix length and the starving group.
    """
    if k > len(ranking):
        raise InvalidRank(f"k={k} exceeds ranking length {len(ranking)}")
    counts = {g: 0 for g in target.labels()}
    labels = ranking.labels(which_label)
    for j in range(1, k + 1):
        g = labels[j - 1]
        if g in counts:
            counts[g] += 1
        for grp, p in target.items():
            if counts[grp] < floor_quota(p, j):
                return False, FeasibilityViolation(j, grp)
    return True, None


def detconstsort(original: Ranking, target: Distribution, k: int,
                 which_label: str = "true") -> Ranking:
    """Re-rank into a feasible top-k list under per-prefix group floors.

    Candidates are grouped by ``which_label`` (use "inferred" to re-rank
    on inferred demographics). Within each group the original score order
    is preserved. Raises InsufficientCandidates when a positive-mass
    group cannot supply ceil(p_g * k) candidates, and the output always
    satisfies ``check_feasibility`` on the constrained label.
    """
    if k < 1:
        raise InvalidRank(f"k must be >= 1, got {k}")

    # Per-group candidate queues in list order (already score-sorted).
    queues: dict[SubgroupLabel, list] = {g: [] for g in target.labels()}
    for c in original.items:
        g = c.label(which_label)
        if g in queues:
            queues[g].append(c)

    for g, p in target.items():
        if p <= 0.0:
            continue
        need = ceil_quota(p, k)
        if len(queues[g]) < need:
            raise InsufficientCandidates(g, needed=need, available=len(queues[g]))

    state = FeasibilityState(
        counts={g: 0 for g in target.labels()},
        min_counts={g: 0 for g in target.labels()},
    )
    placed: list = []
    placed_scores: list[float] = []

    counter = 0
    hard_stop = max(100 * k, 1000) + k
    while state.last_empty < k:
        counter += 1
        if counter > hard_stop:  # pragma: no cover - defensive
            raise RuntimeError("constrained sort failed to make progress")
        changed = []
        for g, p in target.items():
            if floor_quota(p, counter) > state.min_counts[g]:
                changed.append(g)
        if not changed:
            continue
        # Insertion order: next candidate's score descending, label as tiebreak.
        def next_score(g: SubgroupLabel) -> float:
            q = queues[g]
            i = state.counts[g]
            return q[i].score if i < len(q) else -math.inf

        changed.sort(key=lambda g: (-next_score(g), g))
        for g in changed:
            queue = queues[g]
            if state.counts[g] >= len(queue):
                raise InsufficientCandidates(g, needed=state.counts[g] + 1,
                                             available=len(queue))
            cand = queue[state.counts[g]]
            placed.append(cand)
            placed_scores.append(cand.score)
            state.max_index.append(counter)
            i = state.last_empty
            # Bubble up while strictly better and the predecessor may
            # legally drop to 1-based position i + 1.
            while i > 0 and placed_scores[i] > placed_scores[i - 1] \
                    and state.max_index[i - 1] >= i + 1:
                placed[i], placed[i - 1] = placed[i - 1], placed[i]
                placed_scores[i], placed_scores[i - 1] = placed_scores[i - 1], placed_scores[i]
                state.max_index[i], state.max_index[i - 1] = \
                    state.max_index[i - 1], state.max_index[i]
                i -= 1
            state.counts[g] += 1
            state.last_empty += 1
            if state.last_empty == k:
                break
        else:
            state.min_counts = {g: floor_quota(p, counter) for g, p in target.items()}

    return Ranking(tuple(placed), source="reranked")
