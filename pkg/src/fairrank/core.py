"""Core domain types: subgroup labels, candidates, rankings, distributions.

All types are immutable value objects; instances can be shared freely
between threads or worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateId,
    EmptyPopulation,
    InvalidLabel,
    MissingLabel,
)

DIST_MASS_TOL = 1e-9


class SubgroupLabel:
    """Composite demographic label, e.g. the intersection of a race and a gender value.

    Equality, hashing and ordering all go through the canonical display
    string (the attribute values joined by single spaces, in a fixed
    attribute order), so labels behave as plain sortable dictionary keys.
    """

    __slots__ = ("parts", "canonical")

    def __init__(self, parts: Iterable[str]):
        parts = tuple(str(p) for p in parts)
        if not parts or any(not p for p in parts):
            raise InvalidLabel(f"label parts must be non-empty strings, got {parts!r}")
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "canonical", " ".join(parts))

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("SubgroupLabel is immutable")

    def __eq__(self, other):
        if isinstance(other, SubgroupLabel):
            return self.canonical == other.canonical
        return NotImplemented

    def __hash__(self):
        return hash(self.canonical)

    def __lt__(self, other):
        if isinstance(other, SubgroupLabel):
            return self.canonical < other.canonical
        return NotImplemented

    def __le__(self, other):
        if isinstance(other, SubgroupLabel):
            return self.canonical <= other.canonical
        return NotImplemented

    def __str__(self):
        return self.canonical

    def __repr__(self):
        return f"SubgroupLabel({self.canonical!r})"

    def __reduce__(self):
        return (SubgroupLabel, (self.parts,))


def subgroup_product(attribute_values: Iterable[str]) -> SubgroupLabel:
    """Build the composite label for one value per protected attribute.

    The attribute order of the input fixes the canonical order, e.g.
    ``("White", "Men") -> "White Men"``.
    """
    values = tuple(attribute_values)
    if not values:
        raise InvalidLabel("at least one attribute value is required")
    return SubgroupLabel(values)


@dataclass(frozen=True, slots=True)
class Candidate:
    """One rankable person: id, utility score and demographic labels."""

    id: str
    score: float
    true_label: SubgroupLabel
    inferred_label: SubgroupLabel | None = None

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"candidate {self.id!r} has non-finite score {self.score!r}")

    def label(self, which: str = "true") -> SubgroupLabel:
        """Return the true or inferred label; raises if the inferred one is unset."""
        if which == "true":
            return self.true_label
        if which == "inferred":
            if self.inferred_label is None:
                raise MissingLabel(f"candidate {self.id!r} has no inferred label")
            return self.inferred_label
        raise ValueError(f"which must be 'true' or 'inferred', got {which!r}")

    def with_inferred(self, label: SubgroupLabel) -> "Candidate":
        return Candidate(self.id, self.score, self.true_label, label)


@dataclass(frozen=True)
class Ranking:
    """Ordered candidate list; position 1 is the top of the list.

    ``source`` records whether the ordering is the score-sorted original
    or the output of a re-ranker. Original rankings must be sorted by
    non-increasing score.
    """

    items: tuple[Candidate, ...]
    source: str = "original"
    scores: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        items = tuple(self.items)
        object.__setattr__(self, "items", items)
        if self.source not in ("original", "reranked"):
            raise ValueError(f"source must be 'original' or 'reranked', got {self.source!r}")
        seen = set()
        for c in items:
            if c.id in seen:
                raise DuplicateId(f"duplicate candidate id {c.id!r}")
            seen.add(c.id)
        scores = np.array([c.score for c in items], dtype=np.float64)
        if self.source == "original" and len(scores) > 1 and np.any(np.diff(scores) > 0):
            raise ValueError("original rankings must have non-increasing scores")
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[Candidate]:
        return iter(self.items)

    def __getitem__(self, i: int) -> Candidate:
        return self.items[i]

    def top(self, k: int) -> "Ranking":
        """Length-k prefix, keeping the source tag."""
        return Ranking(self.items[:k], self.source)

    def labels(self, which: str = "true") -> list[SubgroupLabel]:
        return [c.label(which) for c in self.items]

    def ids(self) -> list[str]:
        return [c.id for c in self.items]


class Distribution:
    """Probability mass over subgroup labels; iteration order is by label."""

    __slots__ = ("_entries", "_lookup")

    def __init__(self, mass: Mapping[SubgroupLabel, float]):
        if not mass:
            raise ValueError("distribution must have at least one label")
        entries = tuple(sorted(mass.items()))
        total = 0.0
        for label, p in entries:
            if not isinstance(label, SubgroupLabel):
                raise InvalidLabel(f"distribution keys must be SubgroupLabel, got {label!r}")
            if p < 0 or not math.isfinite(p):
                raise ValueError(f"proportion for {label!s} must be >= 0, got {p!r}")
            total += p
        if abs(total - 1.0) > DIST_MASS_TOL:
            raise ValueError(f"proportions must sum to 1 (got {total!r})")
        object.__setattr__(self, "_entries", entries)
        object.__setattr__(self, "_lookup", dict(entries))

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("Distribution is immutable")

    @classmethod
    def from_counts(cls, counts: Mapping[SubgroupLabel, int]) -> "Distribution":
        n = sum(counts.values())
        if n <= 0:
            raise EmptyPopulation("cannot build a distribution from zero counts")
        return cls({g: c / n for g, c in counts.items()})

    @property
    def mass(self) -> dict[SubgroupLabel, float]:
        return dict(self._entries)

    def labels(self) -> list[SubgroupLabel]:
        return [g for g, _ in self._entries]

    def items(self):
        return self._entries

    def get(self, label: SubgroupLabel, default: float = 0.0) -> float:
        return self._lookup.get(label, default)

    def __getitem__(self, label: SubgroupLabel) -> float:
        return self._lookup[label]

    def __contains__(self, label: SubgroupLabel) -> bool:
        return label in self._lookup

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other):
        if isinstance(other, Distribution):
            return self._entries == other._entries
        return NotImplemented

    def __hash__(self):
        return hash(self._entries)

    def __repr__(self):
        body = ", ".join(f"{g!s}: {p:.6g}" for g, p in self._entries)
        return f"Distribution({{{body}}})"

    def __reduce__(self):
        return (Distribution, (dict(self._entries),))


def empirical_distribution(candidates: Sequence[Candidate], which: str = "true") -> Distribution:
    """Observed label proportions: mass[g] = count(g) / n."""
    if not candidates:
        raise EmptyPopulation("cannot compute a distribution over zero candidates")
    counts: dict[SubgroupLabel, int] = {}
    for c in candidates:
        g = c.label(which)
        counts[g] = counts.get(g, 0) + 1
    return Distribution.from_counts(counts)


def sort_by_score(candidates: Sequence[Candidate]) -> Ranking:
    """Arrange candidates by decreasing score; ties break by id ascending."""
    ids = [c.id for c in candidates]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DuplicateId(f"duplicate candidate ids: {dupes[:5]}")
    ordered = sorted(candidates, key=lambda c: (-c.score, c.id))
    return Ranking(tuple(ordered), source="original")
