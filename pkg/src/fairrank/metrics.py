"""Representation, attention and ranking-quality metrics for ranked lists.

Every function here is a pure function of immutable inputs.

Conventions used throughout:

* ranks are 1-based;
* position weights are ``1 / log2(rank + 1)``;
* viewer attention at a rank follows the geometric decay
  ``100 * (1 - p)^(rank - 1) * p`` where ``p`` is the share of attention
  spent on the first result (logarithmic decay is available for
  comparison plots only and is not part of the default metric suite);
* candidates outside the measured list receive no attention.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import Candidate, Distribution, Ranking, SubgroupLabel
from .errors import (
    DegenerateRatio,
    EmptyPopulation,
    InvalidRank,
    UnknownCandidate,
    ZeroBaseProportion,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class AttentionModel:
    """Positional attention decay.

    kind:  "geometric" (default) or "logarithmic" (comparison mode only).
    p:     fraction of total attention given to rank 1 (geometric only).
    k_max: horizon after which attention is treated as zero.
    """

    kind: str = "geometric"
    p: float = 0.015
    k_max: int = 300

    def __post_init__(self):
        if self.kind not in ("geometric", "logarithmic"):
            raise ValueError(f"unknown attention kind {self.kind!r}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must be in (0, 1), got {self.p!r}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max!r}")


def attention(model: AttentionModel, k: int) -> float:
    """Attention received at rank k (1-based)."""
    if k < 1:
        raise InvalidRank(f"rank must be >= 1, got {k!r}")
    if model.kind == "geometric":
        return 100.0 * (1.0 - model.p) ** (k - 1) * model.p
    # logarithmic: 1/log2(k+1), rescaled so rank 1 receives 100*p like
    # the geometric curve it is compared against.
    return 100.0 * model.p / math.log2(k + 1)


def attention_weights(model: AttentionModel, n: int) -> np.ndarray:
    """Attention for ranks 1..n as an array, zero beyond the model horizon."""
    ranks = np.arange(1, n + 1, dtype=np.float64)
    if model.kind == "geometric":
        w = 100.0 * (1.0 - model.p) ** (ranks - 1.0) * model.p
    else:
        w = 100.0 * model.p / np.log2(ranks + 1.0)
    w[ranks > model.k_max] = 0.0
    return w


@dataclass(frozen=True, slots=True)
class GroupStats:
    """Per-group attention and utility aggregates over one ranked list.

    eta:    mean attention per member.
    u_mean: mean utility score.
    theta:  utility-weighted mean attention, sum(a*s) / sum(s).
    gamma:  expected actions per member, mean(a*s) / 100 (view probability
            times act-given-view utility).
    skew_at_k: group share in the list over its share in the base
            distribution (NaN when no base distribution was supplied).
    count:  members of the group inside the list.
    theta_degenerate: set when the group's total score is zero and theta
            was reported as 0.
    """

    eta: float
    u_mean: float
    theta: float
    gamma: float
    skew_at_k: float
    count: int
    theta_degenerate: bool = False


@dataclass(frozen=True)
class MetricsRecord:
    """One evaluation bundle for a ranked list."""

    ndkl: float
    abr: float
    dtbr: float
    dibr: float
    ndcg: float
    marc: float
    group_stats: Mapping[SubgroupLabel, GroupStats]
    k: int
    seed: tuple | int | None = None


def _position_weights(n: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, n + 2, dtype=np.float64))


def skew_at_k(ranking: Ranking, population_dist: Distribution, g: SubgroupLabel, k: int,
              which_label: str = "true") -> float:
    """Share of group g in the top-k over its share in the base population."""
    if not 1 <= k <= len(ranking):
        raise InvalidRank(f"k must be in [1, {len(ranking)}], got {k}")
    base = population_dist.get(g, 0.0)
    if base <= 0.0:
        raise ZeroBaseProportion(f"group {g!s} has zero base proportion")
    count = sum(1 for c in ranking.items[:k] if c.label(which_label) == g)
    return (count / k) / base


def ndkl(ranking: Ranking, target_dist: Distribution, which_label: str = "true") -> float:
    """Position-discounted mean KL divergence of every prefix against the target.

    For a list of length n this is
    ``(1/Z) * sum_i kl(prefix_i || target) / log2(i+1)`` with
    ``Z = sum_i 1/log2(i+1)`` and ``kl`` in bits. Prefix cells with zero
    mass contribute zero (0*log 0 := 0); a zero-target-mass label occurring
    in the list is an error rather than being smoothed away.
    """
    n = len(ranking)
    if n == 0:
        raise EmptyPopulation("cannot compute divergence of an empty ranking")
    labels = ranking.labels(which_label)
    label_set = sorted(set(labels))
    for g in label_set:
        if target_dist.get(g, 0.0) <= 0.0:
            raise ZeroBaseProportion(f"group {g!s} appears in the ranking "
                                     "but has zero target mass")
    index = {g: j for j, g in enumerate(label_set)}
    onehot = np.zeros((n, len(label_set)), dtype=np.float64)
    onehot[np.arange(n), [index[g] for g in labels]] = 1.0
    prefix = np.cumsum(onehot, axis=0) / np.arange(1, n + 1, dtype=np.float64)[:, None]
    base = np.array([target_dist[g] for g in label_set], dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(prefix > 0.0, prefix * np.log2(prefix / base), 0.0)
    kl = terms.sum(axis=1)
    w = _position_weights(n)
    return float((w * kl).sum() / w.sum())


def ndcg(ranking: Ranking) -> float:
    """Position-discounted utility sum normalized by the all-ones ideal.

    ``(1/Z) * sum_i s_i / log2(i+1)`` with ``Z = sum_i 1/log2(i+1)``.
    Note the normalizer is score-independent, so this is 1.0 only when
    every score equals 1; use permutation comparisons to judge ordering
    quality.
    """
    n = len(ranking)
    if n == 0:
        raise EmptyPopulation("cannot compute ndcg of an empty ranking")
    w = _position_weights(n)
    return float((w * ranking.scores).sum() / w.sum())


def group_attention_stats(ranking: Ranking, model: AttentionModel,
                          which_label: str = "true",
                          reference: Distribution | None = None,
                          ) -> dict[SubgroupLabel, GroupStats]:
    """Per-group eta/U/theta/gamma (and skew when a reference is given).

    Group membership counts only candidates inside the ranking. A group
    whose scores sum to zero gets theta = 0 with the degenerate flag set.
    """
    n = len(ranking)
    if n == 0:
        raise EmptyPopulation("cannot compute group stats of an empty ranking")
    att = attention_weights(model, n)
    scores = ranking.scores
    labels = ranking.labels(which_label)
    stats: dict[SubgroupLabel, GroupStats] = {}
    for g in sorted(set(labels)):
        mask = np.array([lab == g for lab in labels])
        a_g = att[mask]
        s_g = scores[mask]
        count = int(mask.sum())
        eta = float(a_g.mean())
        u_mean = float(s_g.mean())
        weighted = float((a_g * s_g).sum())
        total_score = float(s_g.sum())
        degenerate = total_score <= 0.0
        if degenerate:
            logger.warning("group %s has zero total score; theta reported as 0", g)
            theta = 0.0
        else:
            theta = weighted / total_score
        gamma = weighted / (100.0 * count)
        if reference is not None:
            skew = skew_at_k(ranking, reference, g, n, which_label)
        else:
            skew = float("nan")
        stats[g] = GroupStats(eta=eta, u_mean=u_mean, theta=theta, gamma=gamma,
                              skew_at_k=skew, count=count, theta_degenerate=degenerate)
    return stats


def _min_max_ratio(values: list[float], metric: str) -> float:
    hi = max(values)
    if hi <= 0.0:
        raise DegenerateRatio(f"maximum group {metric} is zero")
    return min(values) / hi


def abr(stats: Mapping[SubgroupLabel, GroupStats]) -> float:
    """Attention bias ratio: min over groups of eta divided by the max."""
    if not stats:
        raise EmptyPopulation("no group statistics")
    return _min_max_ratio([s.eta for s in stats.values()], "eta")


def dtbr(stats: Mapping[SubgroupLabel, GroupStats]) -> float:
    """Disparate treatment bias ratio: min/max of utility-weighted attention."""
    if not stats:
        raise EmptyPopulation("no group statistics")
    return _min_max_ratio([s.theta for s in stats.values()], "theta")


def dibr(stats: Mapping[SubgroupLabel, GroupStats]) -> float:
    """Disparate impact bias ratio: min/max of expected per-member action rate."""
    if not stats:
        raise EmptyPopulation("no group statistics")
    return _min_max_ratio([s.gamma for s in stats.values()], "gamma")


def rank_change_metrics(original: Ranking, reranked: Ranking,
                        which_label: str = "true",
                        ) -> tuple[dict[str, int], dict[SubgroupLabel, float], float]:
    """Per-candidate rank boost, per-group mean absolute boost, and its maximum.

    boost = original rank - new rank, so positive means the candidate
    moved up. Groups are taken over candidates present in the re-ranked
    list.
    """
    orig_pos = {c.id: i + 1 for i, c in enumerate(original.items)}
    boosts: dict[str, int] = {}
    group_boosts: dict[SubgroupLabel, list[int]] = {}
    for i, c in enumerate(reranked.items):
        if c.id not in orig_pos:
            raise UnknownCandidate(f"candidate {c.id!r} not present in the original ranking")
        b = orig_pos[c.id] - (i + 1)
        boosts[c.id] = b
        group_boosts.setdefault(c.label(which_label), []).append(b)
    arc = {g: float(np.mean(np.abs(bs))) for g, bs in sorted(group_boosts.items())}
    marc = max(arc.values()) if arc else 0.0
    return boosts, arc, marc


def evaluate_ranking(ranking: Ranking, reference: Distribution, model: AttentionModel,
                     which_label: str = "true", original: Ranking | None = None,
                     seed: tuple | int | None = None) -> MetricsRecord:
    """Bundle every metric for one ranked list into a MetricsRecord.

    ``reference`` drives both the divergence target and the skew base.
    When ``original`` is given, rank-change metrics are computed against
    it; otherwise MARC is 0 (the list is its own original).
    """
    stats = group_attention_stats(ranking, model, which_label, reference)
    if original is not None:
        _, _, marc = rank_change_metrics(original, ranking, which_label)
    else:
        marc = 0.0
    return MetricsRecord(
        ndkl=ndkl(ranking, reference, which_label),
        abr=abr(stats),
        dtbr=dtbr(stats),
        dibr=dibr(stats),
        ndcg=ndcg(ranking),
        marc=marc,
        group_stats=stats,
        k=len(ranking),
        seed=seed,
    )
