"""Label perturbation through empirical or parametric confusion matrices.

A confusion matrix here is a row-stochastic table P(predicted | true)
used as a noise model: feeding ground-truth labels through it simulates
an imperfect demographic inference system. Five empirical race/ethnicity
matrices measured for real inference tools (ethcnn, ethnicolr, bisg,
nameprism, deepface) ship as package data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Candidate, SubgroupLabel, subgroup_product
from .errors import InvalidMatrix, MissingLabel, UnknownMatrix

ROW_SUM_TOL = 1e-6

BUILTIN_MATRICES = ("ethcnn", "ethnicolr", "bisg", "nameprism", "deepface")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row-stochastic map from true label to predicted-label probabilities.

    Row and column label sets are identical; labels are plain strings and
    are matched against a candidate's canonical label string.
    """

    labels: tuple[str, ...]
    rows: Mapping[str, Mapping[str, float]]

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(set(labels)) != len(labels) or not labels:
            raise InvalidMatrix(f"labels must be unique and non-empty, got {labels!r}")
        rows = {t: dict(r) for t, r in self.rows.items()}
        object.__setattr__(self, "rows", rows)
        if set(rows) != set(labels):
            raise InvalidMatrix("row label set differs from the declared labels")
        for true, row in rows.items():
            if set(row) != set(labels):
                raise InvalidMatrix(f"row {true!r} has column labels {sorted(row)}, "
                                    f"expected {sorted(labels)}")
            if any(p < 0 for p in row.values()):
                raise InvalidMatrix(f"row {true!r} has a negative entry")
            total = sum(row.values())
            if abs(total - 1.0) > ROW_SUM_TOL:
                raise InvalidMatrix(f"row {true!r} sums to {total!r}, expected 1")

    def probability(self, true: str, predicted: str) -> float:
        return self.rows[true][predicted]

    def row(self, true: str) -> dict[str, float]:
        return dict(self.rows[true])

    def relabel(self, mapping: Mapping[str, str]) -> "ConfusionMatrix":
        """Rename labels (e.g. to align matrix vocabulary with a dataset's)."""
        ren = lambda s: mapping.get(s, s)
        return ConfusionMatrix(
            labels=tuple(ren(l) for l in self.labels),
            rows={ren(t): {ren(p): v for p, v in row.items()}
                  for t, row in self.rows.items()},
        )

    def to_dict(self) -> dict:
        return {"labels": list(self.labels),
                "rows": {t: dict(r) for t, r in self.rows.items()}}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ConfusionMatrix":
        return cls(labels=tuple(data["labels"]), rows=data["rows"])


def load_matrix_file(path) -> ConfusionMatrix:
    """Read a matrix from a JSON file shaped {labels: [...], rows: {true: {pred: p}}}."""
    with open(path, "r", encoding="utf-8") as fh:
        return ConfusionMatrix.from_dict(json.load(fh))


def load_builtin_matrix(name: str) -> ConfusionMatrix:
    """Load one of the bundled empirical matrices by name."""
    key = name.lower()
    if key not in BUILTIN_MATRICES:
        raise UnknownMatrix(f"unknown matrix {name!r}; choose from {BUILTIN_MATRICES}")
    data = resources.files("fairrank.data").joinpath(f"{key}.json").read_text("utf-8")
    return ConfusionMatrix.from_dict(json.loads(data))


def uniform_accuracy_matrix(accuracy: float, labels: Sequence[str]) -> ConfusionMatrix:
    """Diagonal = accuracy, remaining mass spread evenly over the other labels."""
    if not 0.0 <= accuracy <= 1.0:
        raise InvalidMatrix(f"accuracy must be in [0, 1], got {accuracy!r}")
    labels = tuple(str(l) for l in labels)
    if len(labels) < 2:
        if accuracy < 1.0:
            raise InvalidMatrix("a single-label matrix requires accuracy 1.0")
        return ConfusionMatrix(labels=labels, rows={labels[0]: {labels[0]: 1.0}})
    off = (1.0 - accuracy) / (len(labels) - 1)
    rows = {t: {p: (accuracy if p == t else off) for p in labels} for t in labels}
    return ConfusionMatrix(labels=labels, rows=rows)


def compose_matrices(cm_a: ConfusionMatrix, cm_b: ConfusionMatrix) -> ConfusionMatrix:
    """Independent product over two attributes: P((a,b)->(a',b')) = P(a->a') P(b->b').

    The composite labels join the two attribute values with a space, in
    (cm_a, cm_b) order, matching subgroup_product's canonical form.
    """
    labels = tuple(f"{a} {b}" for a in cm_a.labels for b in cm_b.labels)
    rows = {}
    for ta in cm_a.labels:
        for tb in cm_b.labels:
            rows[f"{ta} {tb}"] = {
                f"{pa} {pb}": cm_a.rows[ta][pa] * cm_b.rows[tb][pb]
                for pa in cm_a.labels for pb in cm_b.labels
            }
    return ConfusionMatrix(labels=labels, rows=rows)


def identity_matrix(labels: Sequence[str]) -> ConfusionMatrix:
    return uniform_accuracy_matrix(1.0, labels) if len(labels) > 1 else ConfusionMatrix(
        labels=tuple(labels), rows={labels[0]: {labels[0]: 1.0}})


def perturb_labels(candidates: Sequence[Candidate], cm: ConfusionMatrix,
                   rng_seed) -> list[Candidate]:
    """Draw an inferred label for every candidate from its true-label row.

    Draws are independent across candidates and consume the random stream
    in input order, one uniform variate per candidate: the row is laid
    out with the true label's own cell first and the remaining cells in
    matrix label order, and the uniform is located on that cumulative
    scale. The generator is numpy's seedable 64-bit PCG64; passing the
    same seed always reproduces the same labels.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) \
        else np.random.default_rng(rng_seed)
    # Per-row cumulative layouts keyed by canonical label string. The row
    # is laid out with the true label first so that, under a shared
    # uniform draw, raising the diagonal never flips a correct label to a
    # wrong one.
    layouts: dict[str, tuple[np.ndarray, list[SubgroupLabel]]] = {}
    for true in cm.labels:
        order = [true] + [l for l in cm.labels if l != true]
        probs = np.cumsum([cm.rows[true][l] for l in order])
        probs[-1] = max(probs[-1], 1.0)  # guard the last edge against rounding
        layouts[true] = (probs, [SubgroupLabel(l.split(" ")) for l in order])
    draws = rng.uniform(0.0, 1.0, size=len(candidates))
    keys = [c.true_label.canonical for c in candidates]
    for key in set(keys):
        if key not in layouts:
            raise MissingLabel(f"true label {key!r} is not covered by the matrix")
    chosen: list[SubgroupLabel | None] = [None] * len(candidates)
    key_arr = np.array(keys)
    for key, (cum, lab_order) in layouts.items():
        idx = np.flatnonzero(key_arr == key)
        if idx.size == 0:
            continue
        cells = np.minimum(np.searchsorted(cum, draws[idx], side="right"),
                           len(lab_order) - 1)
        for i, cell in zip(idx, cells):
            chosen[i] = lab_order[cell]
    return [c.with_inferred(lab) for c, lab in zip(candidates, chosen)]
