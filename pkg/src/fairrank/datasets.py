"""CSV ingestion and metric-table serialization.

Candidate files are RFC-4180 CSV with columns ``id``, ``score``, one
column per demographic attribute (e.g. ``race``, ``gender``) and
optional ``inferred_<attribute>`` columns. Metric tables are emitted as
CSV and aligned markdown with group columns in canonical label order and
the aggregate column last.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import Candidate, SubgroupLabel, sort_by_score, subgroup_product
from .errors import DuplicateId, EmptyPopulation, MissingLabel
from .metrics import MetricsRecord

logger = logging.getLogger(__name__)

# Table families: per-group statistic plus the aggregate column shown last.
TABLE_KINDS = {
    "skew": ("skew_at_k", "NDKL", "ndkl"),
    "attention": ("eta", "ABR", "abr"),
    "treatment": ("theta", "DTBR", "dtbr"),
    "impact": ("gamma", "DIBR", "dibr"),
}


@dataclass(frozen=True)
class CandidateFile:
    """Loaded candidates (score-sorted) plus ingestion flags."""

    candidates: tuple[Candidate, ...]
    attribute_columns: tuple[str, ...]
    score_normalized: bool
    has_inferred: bool


def load_candidates_csv(path, attribute_columns: Sequence[str] = ("race", "gender"),
                        ) -> CandidateFile:
    """Read a candidate CSV; rows come back sorted by score descending.

    Composite labels are built from the attribute columns in the given
    order. Scores falling outside [0, 1] trigger a min-max rescale of the
    whole column (flagged on the result) so attention-utility metrics
    stay comparable with scores generated on the unit interval.
    """
    attribute_columns = tuple(attribute_columns)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = ["id", "score", *attribute_columns]
        missing = [c for c in required if c not in header]
        if missing:
            raise ValueError(f"{path}: missing required columns {missing}; "
                             f"header has {header}")
        inferred_cols = tuple(f"inferred_{a}" for a in attribute_columns)
        present_inferred = [c for c in inferred_cols if c in header]
        if present_inferred and len(present_inferred) != len(inferred_cols):
            raise ValueError(f"{path}: inferred columns must cover every attribute "
                             f"or none; found only {present_inferred}")
        has_inferred = bool(present_inferred)

        rows = []
        seen_ids: dict[str, int] = {}
        for line_no, row in enumerate(reader, start=2):
            cid = (row.get("id") or "").strip()
            if not cid:
                raise ValueError(f"{path}:{line_no}: empty id")
            if cid in seen_ids:
                raise DuplicateId(f"{path}:{line_no}: duplicate id {cid!r} "
                                  f"(first seen on line {seen_ids[cid]})")
            seen_ids[cid] = line_no
            try:
                score = float(row["score"])
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{line_no}: unparseable score "
                                 f"{row.get('score')!r}") from None
            if not math.isfinite(score):
                raise ValueError(f"{path}:{line_no}: non-finite score {score!r}")
            attrs = []
            for col in attribute_columns:
                v = (row.get(col) or "").strip()
                if not v:
                    raise ValueError(f"{path}:{line_no}: empty value in column {col!r}")
                attrs.append(v)
            inferred = None
            if has_inferred:
                ivals = []
                for col in inferred_cols:
                    v = (row.get(col) or "").strip()
                    if not v:
                        raise MissingLabel(f"{path}:{line_no}: empty value in "
                                           f"column {col!r}")
                    ivals.append(v)
                inferred = subgroup_product(ivals)
            rows.append((cid, score, subgroup_product(attrs), inferred))

    if not rows:
        raise EmptyPopulation(f"{path}: no candidate rows")

    scores = np.array([r[1] for r in rows])
    normalized = bool(scores.min() < 0.0 or scores.max() > 1.0)
    if normalized:
        lo, hi = float(scores.min()), float(scores.max())
        if hi > lo:
            scores = (scores - lo) / (hi - lo)
        else:
            scores = np.ones_like(scores)
        logger.warning("%s: scores outside [0, 1]; min-max normalized from "
                       "[%g, %g]", path, lo, hi)

    candidates = [Candidate(id=r[0], score=float(s), true_label=r[2],
                            inferred_label=r[3])
                  for r, s in zip(rows, scores)]
    ordered = sort_by_score(candidates).items
    return CandidateFile(candidates=ordered, attribute_columns=attribute_columns,
                         score_normalized=normalized, has_inferred=has_inferred)


def write_candidates_csv(candidates: Sequence[Candidate], path,
                         attribute_columns: Sequence[str] = ("race", "gender"),
                         boosts: Mapping[str, int] | None = None) -> None:
    """Write candidates in order; optionally append rank and boost columns."""
    attribute_columns = tuple(attribute_columns)
    has_inferred = any(c.inferred_label is not None for c in candidates)
    header = ["id", "score", *attribute_columns]
    if has_inferred:
        header += [f"inferred_{a}" for a in attribute_columns]
    if boosts is not None:
        header += ["rank", "boost"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rank, c in enumerate(candidates, start=1):
            row = [c.id, repr(c.score), *c.true_label.parts]
            if has_inferred:
                row += list(c.inferred_label.parts) if c.inferred_label else \
                    [""] * len(attribute_columns)
            if boosts is not None:
                row += [rank, boosts.get(c.id, 0)]
            writer.writerow(row)


def _table_cells(records: Mapping[str, MetricsRecord], kind: str
                 ) -> tuple[list[str], list[list[str]]]:
    if kind not in TABLE_KINDS:
        raise ValueError(f"unknown table kind {kind!r}; choose from {sorted(TABLE_KINDS)}")
    stat_field, agg_name, agg_field = TABLE_KINDS[kind]
    groups: list[SubgroupLabel] = sorted({g for r in records.values()
                                          for g in r.group_stats})
    header = ["row", *[g.canonical for g in groups], agg_name]
    body = []
    for name, rec in records.items():
        cells = [name]
        for g in groups:
            st = rec.group_stats.get(g)
            cells.append("" if st is None else f"{getattr(st, stat_field):.6f}")
        cells.append(f"{getattr(rec, agg_field):.6f}")
        body.append(cells)
    return header, body


def write_metrics_csv(records: Mapping[str, MetricsRecord], path,
                      kind: str = "skew") -> None:
    """One row per record: group columns then the family's aggregate column."""
    if not records:
        raise EmptyPopulation("no records to write")
    header, body = _table_cells(records, kind)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(body)


def _markdown_table(header: list[str], body: list[list[str]]) -> str:
    widths = [max(len(header[j]), *(len(r[j]) for r in body)) if body else len(header[j])
              for j in range(len(header))]
    def fmt(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
    lines = [fmt(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    lines += [fmt(r) for r in body]
    return "\n".join(lines) + "\n"


def write_metrics_markdown(records: Mapping[str, MetricsRecord], path,
                           kind: str = "skew") -> None:
    """Markdown rendering of the same cells write_metrics_csv produces."""
    if not records:
        raise EmptyPopulation("no records to write")
    header, body = _table_cells(records, kind)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_markdown_table(header, body))


@dataclass(frozen=True)
class SweepTable:
    """A metric grid: rows are accuracies, columns are distribution names."""

    metric: str
    row_labels: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray  # shape (rows, columns)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.shape != (len(self.row_labels), len(self.columns)):
            raise ValueError(f"values shape {v.shape} does not match "
                             f"{len(self.row_labels)} rows x {len(self.columns)} cols")


def write_sweep_csv(table: SweepTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["accuracy", *table.columns])
        for label, row in zip(table.row_labels, table.values):
            writer.writerow([label, *[f"{v:.6f}" for v in row]])


def read_sweep_csv(path, metric: str = "") -> SweepTable:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "accuracy":
            raise ValueError(f"{path}: not a sweep table")
        rows, labels = [], []
        for row in reader:
            labels.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return SweepTable(metric=metric, row_labels=tuple(labels),
                      columns=tuple(header[1:]), values=np.array(rows))


def write_sweep_markdown(table: SweepTable, path) -> None:
    header = ["accuracy", *table.columns]
    body = [[label, *[f"{v:.6f}" for v in row]]
            for label, row in zip(table.row_labels, table.values)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_markdown_table(header, body))
