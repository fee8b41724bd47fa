"""Monte Carlo harness: synthetic populations, noisy re-ranking trials, sweeps.

A trial generates a population with uniform random utility scores, sorts
it (the unconstrained "baseline" list), perturbs the demographic labels
through a confusion matrix, re-ranks the top k on the perturbed labels,
and then measures every fairness metric on the ground-truth labels. A
sweep repeats this over a grid of inference accuracies and averages over
trials.

Reproducibility: every trial draws from generators seeded with
(master seed, trial index, stream); results are therefore independent of
execution order and worker count. Perturbation draws are shared across
accuracies within a trial (one uniform per candidate), which couples the
sweep monotonically and reduces comparison noise.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (
    Candidate,
    Distribution,
    Ranking,
    SubgroupLabel,
    empirical_distribution,
    sort_by_score,
)
from .detconstsort import check_feasibility, detconstsort
from .metrics import AttentionModel, GroupStats, MetricsRecord, evaluate_ranking
from .noise import ConfusionMatrix, perturb_labels, uniform_accuracy_matrix

METRIC_NAMES = ("ndkl", "abr", "dtbr", "dibr", "ndcg", "marc")

DEFAULT_ACCURACIES = tuple(round(0.1 * i, 1) for i in range(1, 11))

_BUILTIN_MASSES: dict[str, dict[str, float]] = {
    "A": {"White": 1 / 3, "Black": 1 / 3, "Asian": 1 / 3},
    "B": {"White": 0.2, "Black": 0.3, "Asian": 0.5},
    "C": {"White": 0.1, "Black": 0.3, "Asian": 0.6},
    "D": {"White": 0.1, "Black": 0.2, "Asian": 0.7},
    "E": {"White": 0.25, "Black": 0.25, "Asian": 0.25, "Hispanic": 0.25},
    "F": {"White": 0.1, "Black": 0.2, "Asian": 0.6, "Hispanic": 0.1},
}


@dataclass(frozen=True)
class PopulationSpec:
    """A named target distribution plus the per-group cohort size."""

    name: str
    distribution: Distribution
    n_per_group: int = 1000

    def __post_init__(self):
        if self.n_per_group < 1:
            raise ValueError(f"n_per_group must be >= 1, got {self.n_per_group}")

    @classmethod
    def builtin(cls, name: str, n_per_group: int = 1000) -> "PopulationSpec":
        key = name.upper()
        if key not in _BUILTIN_MASSES:
            raise KeyError(f"unknown distribution {name!r}; choose from "
                           f"{sorted(_BUILTIN_MASSES)} or build a custom spec")
        mass = {SubgroupLabel([g]): p for g, p in _BUILTIN_MASSES[key].items()}
        return cls(name=key, distribution=Distribution(mass), n_per_group=n_per_group)

    @property
    def total(self) -> int:
        return self.n_per_group * len(self.distribution)


@dataclass(frozen=True)
class SweepConfig:
    """Grid definition for an accuracy sweep.

    ``accuracies`` entries may be floats (uniform-error matrices are
    built on the fly) or explicit ConfusionMatrix noise models.
    """

    spec: PopulationSpec
    accuracies: tuple = DEFAULT_ACCURACIES
    trials: int = 100
    k: int = 300
    attention_p: float = 0.015
    master_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 1 <= self.k <= self.spec.total:
            raise ValueError(f"k must be in [1, {self.spec.total}], got {self.k}")
        object.__setattr__(self, "accuracies", tuple(self.accuracies))

    def model(self) -> AttentionModel:
        return AttentionModel(kind="geometric", p=self.attention_p, k_max=self.k)


@dataclass(frozen=True)
class TrialResult:
    baseline: MetricsRecord
    fair: MetricsRecord
    feasible_true: bool


def _seed_parts(trial_seed) -> list[int]:
    if isinstance(trial_seed, (tuple, list)):
        return [int(s) for s in trial_seed]
    return [int(trial_seed)]


def generate_population(spec: PopulationSpec, trial_seed) -> list[Candidate]:
    """n_per_group candidates per group with i.i.d. uniform [0, 1] scores."""
    rng = trial_seed if isinstance(trial_seed, np.random.Generator) \
        else np.random.default_rng(_seed_parts(trial_seed))
    labels = spec.distribution.labels()
    scores = rng.uniform(0.0, 1.0, size=spec.n_per_group * len(labels))
    out: list[Candidate] = []
    pos = 0
    for g in labels:
        tag = g.canonical.replace(" ", "_")
        for i in range(spec.n_per_group):
            out.append(Candidate(id=f"{tag}-{i:05d}", score=float(scores[pos]),
                                 true_label=g))
            pos += 1
    return out


def _noise_matrix(spec: PopulationSpec, accuracy_or_matrix) -> ConfusionMatrix:
    if isinstance(accuracy_or_matrix, ConfusionMatrix):
        return accuracy_or_matrix
    labels = [g.canonical for g in spec.distribution.labels()]
    return uniform_accuracy_matrix(float(accuracy_or_matrix), labels)


def _fair_trial(ranking: Ranking, target: Distribution, cm: ConfusionMatrix,
                k: int, model: AttentionModel, noise_rng, seed
                ) -> tuple[MetricsRecord, bool]:
    perturbed = perturb_labels(ranking.items, cm, noise_rng)
    noisy = Ranking(tuple(perturbed), source="original")
    fair_ranking = detconstsort(noisy, target, k, which_label="inferred")
    record = evaluate_ranking(fair_ranking, target, model,
                              which_label="true", original=ranking, seed=seed)
    ok, _ = check_feasibility(fair_ranking, target, k, which_label="true")
    return record, ok


def run_trial(spec: PopulationSpec, accuracy_or_matrix, k: int,
              model: AttentionModel, trial_seed) -> TrialResult:
    """One simulation trial: returns (baseline, fair) metric records.

    The baseline record measures the unconstrained score-sorted top-k;
    the fair record measures the re-ranked list built from perturbed
    labels, evaluated on the true labels.
    """
    parts = _seed_parts(trial_seed)
    pop = generate_population(spec, np.random.default_rng(parts + [0]))
    ranking = sort_by_score(pop)
    baseline = evaluate_ranking(ranking.top(k), spec.distribution, model,
                                which_label="true", seed=tuple(parts))
    cm = _noise_matrix(spec, accuracy_or_matrix)
    fair, feasible = _fair_trial(ranking, spec.distribution, cm, k, model,
                                 np.random.default_rng(parts + [1]), tuple(parts))
    return TrialResult(baseline=baseline, fair=fair, feasible_true=feasible)


@dataclass
class SweepResult:
    """Per-trial metric values for one distribution's accuracy sweep.

    fair[metric] has shape (trials, n_accuracies); baseline[metric] has
    shape (trials,). feasible_true flags whether each fair list satisfied
    the prefix floors on ground-truth labels.
    """

    config: SweepConfig
    fair: dict[str, np.ndarray]
    baseline: dict[str, np.ndarray]
    feasible_true: np.ndarray

    def fair_means(self) -> dict[str, np.ndarray]:
        return {m: v.mean(axis=0) for m, v in self.fair.items()}

    def baseline_means(self) -> dict[str, float]:
        return {m: float(v.mean()) for m, v in self.baseline.items()}


def _sweep_chunk(config: SweepConfig, trial_indices: Sequence[int]
                 ) -> tuple[dict, dict, np.ndarray]:
    model = config.model()
    n_acc = len(config.accuracies)
    fair = {m: np.empty((len(trial_indices), n_acc)) for m in METRIC_NAMES}
    base = {m: np.empty(len(trial_indices)) for m in METRIC_NAMES}
    feas = np.empty((len(trial_indices), n_acc), dtype=bool)
    matrices = [_noise_matrix(config.spec, a) for a in config.accuracies]
    for row, t in enumerate(trial_indices):
        parts = [config.master_seed, t]
        pop = generate_population(config.spec, np.random.default_rng(parts + [0]))
        ranking = sort_by_score(pop)
        brec = evaluate_ranking(ranking.top(config.k), config.spec.distribution,
                                model, which_label="true", seed=(config.master_seed, t))
        for m in METRIC_NAMES:
            base[m][row] = getattr(brec, m)
        for j, cm in enumerate(matrices):
            # Fresh generator per accuracy with the same seed: identical
            # uniforms across the grid give common-random-number coupling.
            rng = np.random.default_rng(parts + [1])
            frec, ok = _fair_trial(ranking, config.spec.distribution, cm, config.k,
                                   model, rng, (config.master_seed, t))
            for m in METRIC_NAMES:
                fair[m][row, j] = getattr(frec, m)
            feas[row, j] = ok
    return fair, base, feas


def _worker_count() -> int:
    raw = os.environ.get("FAIRRANK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def sweep(config: SweepConfig, workers: int | None = None) -> SweepResult:
    """Run the accuracy grid for one distribution.

    Trials are independent; with workers > 1 they are sharded across
    processes and re-joined by trial index, so results are bit-identical
    for any worker count.
    """
    if workers is None:
        workers = _worker_count()
    trials = list(range(config.trials))
    n_acc = len(config.accuracies)
    fair = {m: np.empty((config.trials, n_acc)) for m in METRIC_NAMES}
    base = {m: np.empty(config.trials) for m in METRIC_NAMES}
    feas = np.empty((config.trials, n_acc), dtype=bool)

    if workers <= 1 or config.trials == 1:
        chunks = [trials]
    else:
        size = -(-len(trials) // workers)
        chunks = [trials[i:i + size] for i in range(0, len(trials), size)]

    def _store(chunk, result):
        cf, cb, cfe = result
        idx = np.asarray(chunk)
        for m in METRIC_NAMES:
            fair[m][idx] = cf[m]
            base[m][idx] = cb[m]
        feas[idx] = cfe

    if len(chunks) == 1:
        _store(chunks[0], _sweep_chunk(config, chunks[0]))
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            for chunk, result in zip(chunks, pool.map(_sweep_chunk, [config] * len(chunks), chunks)):
                _store(chunk, result)
    return SweepResult(config=config, fair=fair, baseline=base, feasible_true=feas)


def _median_records(records: list[MetricsRecord], k: int) -> MetricsRecord:
    """Field-wise median across trial records, including per-group stats."""
    groups = sorted({g for r in records for g in r.group_stats})
    agg_stats: dict[SubgroupLabel, GroupStats] = {}
    for g in groups:
        present = [r.group_stats[g] for r in records if g in r.group_stats]
        agg_stats[g] = GroupStats(
            eta=float(np.median([s.eta for s in present])),
            u_mean=float(np.median([s.u_mean for s in present])),
            theta=float(np.median([s.theta for s in present])),
            gamma=float(np.median([s.gamma for s in present])),
            skew_at_k=float(np.median([s.skew_at_k for s in present])),
            count=int(np.median([s.count for s in present])),
            theta_degenerate=any(s.theta_degenerate for s in present),
        )
    values = {m: float(np.median([getattr(r, m) for r in records])) for m in METRIC_NAMES}
    return MetricsRecord(group_stats=agg_stats, k=k, seed=None, **values)


@dataclass
class CaseStudyResult:
    """Named metric rows: deterministic baseline/oracle plus per-matrix medians."""

    reference: Distribution
    rows: dict[str, MetricsRecord]
    oracle_feasible: bool


def case_study(candidates: Sequence[Candidate],
               matrices: Mapping[str, ConfusionMatrix],
               trials: int = 100, k: int = 300,
               model: AttentionModel | None = None,
               master_seed: int = 0) -> CaseStudyResult:
    """Evaluate a real candidate list under each noise model.

    Rows: "Baseline" measures the original top-k as-is; "Oracle" re-ranks
    with ground-truth labels (both deterministic, so they are constant
    across trials); every entry of ``matrices`` contributes a row of
    median metrics over ``trials`` perturb-and-re-rank repetitions. The
    re-ranking target and the metric reference are both the list's own
    empirical label distribution, and metrics are always computed on
    ground-truth labels.
    """
    if model is None:
        model = AttentionModel(k_max=k)
    reference = empirical_distribution(list(candidates), which="true")
    ranking = sort_by_score(candidates)
    rows: dict[str, MetricsRecord] = {}
    rows["Baseline"] = evaluate_ranking(ranking.top(k), reference, model,
                                        which_label="true")
    oracle_ranking = detconstsort(ranking, reference, k, which_label="true")
    rows["Oracle"] = evaluate_ranking(oracle_ranking, reference, model,
                                      which_label="true", original=ranking)
    oracle_ok, _ = check_feasibility(oracle_ranking, reference, k, which_label="true")
    for m_idx, name in enumerate(matrices):
        cm = matrices[name]
        records = []
        for t in range(trials):
            rng = np.random.default_rng([master_seed, t, 2 + m_idx])
            rec, _ = _fair_trial(ranking, reference, cm, k, model, rng,
                                 (master_seed, t))
            records.append(rec)
        rows[name] = _median_records(records, k)
    return CaseStudyResult(reference=reference, rows=rows, oracle_feasible=oracle_ok)
