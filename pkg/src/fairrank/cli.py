"""Command-line front end.

Subcommands:

* ``simulate``  - accuracy sweeps over synthetic populations; writes one
  accuracy-by-distribution grid per metric plus a baseline summary and a
  long-format CSV for plotting.
* ``rerank``    - fairness-constrained re-ranking of a candidate CSV.
* ``casestudy`` - baseline/oracle/per-noise-model median tables for a
  real dataset.

Every subcommand accepts ``--config FILE`` (a flat JSON object whose
keys match the long option names); explicit command-line options win
over config-file values. All randomness honors ``--seed``, and the
``FAIRRANK_THREADS`` environment variable caps simulation workers.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import Distribution, Ranking, SubgroupLabel, empirical_distribution, sort_by_score
from .datasets import (
    SweepTable,
    load_candidates_csv,
    write_candidates_csv,
    write_metrics_csv,
    write_metrics_markdown,
    write_sweep_csv,
    write_sweep_markdown,
)
from .detconstsort import detconstsort
from .errors import FairrankError
from .metrics import AttentionModel, evaluate_ranking, rank_change_metrics
from .noise import (
    BUILTIN_MATRICES,
    compose_matrices,
    identity_matrix,
    load_builtin_matrix,
    load_matrix_file,
)
from .simulation import (
    METRIC_NAMES,
    DEFAULT_ACCURACIES,
    PopulationSpec,
    SweepConfig,
    case_study,
    sweep,
)

DEFAULTS = {
    "dist": "A,B,C,D,E,F",
    "accuracies": ",".join(str(a) for a in DEFAULT_ACCURACIES),
    "trials": 100,
    "k": 300,
    "p": 0.015,
    "seed": 0,
    "n_per_group": 1000,
    "out": "out",
    "format": "both",
    "attributes": "race,gender",
    "target": "empirical",
    "matrix": None,
    "gender_matrix": None,
    "alias": ["Latinx=Hispanic"],
    "input": None,
}


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from the config file, then from defaults."""
    config = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
    for key, value in config.items():
        dest = key.replace("-", "_")
        if getattr(args, dest, None) is None:
            setattr(args, dest, value)
    for key, value in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def _parse_float_list(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _parse_str_list(text) -> tuple[str, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(str(v) for v in text)
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def _parse_alias(pairs) -> dict[str, str]:
    mapping = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ValueError(f"alias must look like FROM=TO, got {pair!r}")
        src, dst = pair.split("=", 1)
        mapping[src.strip()] = dst.strip()
    return mapping


def _parse_target(text, candidates) -> Distribution:
    if text == "empirical":
        return empirical_distribution(list(candidates), which="true")
    mass = {}
    for pair in str(text).split(","):
        if "=" not in pair:
            raise ValueError(f"target entries must look like LABEL=P, got {pair!r}")
        label, p = pair.rsplit("=", 1)
        mass[SubgroupLabel(label.strip().split(" "))] = float(p)
    return Distribution(mass)


def _formats(fmt: str) -> tuple[bool, bool]:
    if fmt not in ("csv", "md", "both"):
        raise ValueError(f"format must be csv, md or both, got {fmt!r}")
    return fmt in ("csv", "both"), fmt in ("md", "both")


def _align_matrix(cm, needed_labels, alias):
    """Rename matrix labels via the alias map and check coverage."""
    if alias:
        cm = cm.relabel(alias)
    missing = [l for l in needed_labels if l not in cm.labels]
    if missing:
        raise ValueError(f"matrix does not cover labels {missing}; "
                         f"matrix labels are {list(cm.labels)}")
    return cm


def _resolve_race_matrix(name_or_path: str):
    if name_or_path.lower() in BUILTIN_MATRICES:
        return name_or_path.lower(), load_builtin_matrix(name_or_path)
    return Path(name_or_path).stem, load_matrix_file(name_or_path)


def cmd_simulate(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    want_csv, want_md = _formats(args.format)
    dists = _parse_str_list(args.dist)
    alias = _parse_alias(args.alias)

    if args.matrix:
        _, matrix = _resolve_race_matrix(args.matrix)
        row_labels = (args.matrix,)
    else:
        matrix = None
        accuracies = _parse_float_list(args.accuracies)
        row_labels = tuple(f"{a:g}" for a in accuracies)

    fair_cols: dict[str, dict[str, np.ndarray]] = {m: {} for m in METRIC_NAMES}
    base_rows: dict[str, dict[str, float]] = {}
    long_rows = []
    for name in dists:
        spec = PopulationSpec.builtin(name, n_per_group=int(args.n_per_group))
        if matrix is not None:
            labels = [g.canonical for g in spec.distribution.labels()]
            levels = (_align_matrix(matrix, labels, alias),)
        else:
            levels = accuracies
        config = SweepConfig(spec=spec, accuracies=levels, trials=int(args.trials),
                             k=int(args.k), attention_p=float(args.p),
                             master_seed=int(args.seed))
        result = sweep(config)
        means = result.fair_means()
        for m in METRIC_NAMES:
            fair_cols[m][name] = means[m]
        base_rows[name] = result.baseline_means()
        for i, row in enumerate(row_labels):
            for m in METRIC_NAMES:
                long_rows.append((name, row, m, means[m][i], base_rows[name][m]))

    written = []
    for m in METRIC_NAMES:
        values = np.column_stack([fair_cols[m][d] for d in dists])
        table = SweepTable(metric=m, row_labels=row_labels, columns=tuple(dists),
                           values=values)
        if want_csv:
            path = out_dir / f"{m}.csv"
            write_sweep_csv(table, path)
            written.append(path)
        if want_md:
            path = out_dir / f"{m}.md"
            write_sweep_markdown(table, path)
            written.append(path)

    base_table = SweepTable(
        metric="baseline", row_labels=tuple(dists), columns=tuple(METRIC_NAMES),
        values=np.array([[base_rows[d][m] for m in METRIC_NAMES] for d in dists]))
    if want_csv:
        path = out_dir / "baseline.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            import csv as _csv
            w = _csv.writer(fh)
            w.writerow(["distribution", *METRIC_NAMES])
            for d, row in zip(base_table.row_labels, base_table.values):
                w.writerow([d, *[f"{v:.6f}" for v in row]])
        written.append(path)

    long_path = out_dir / "sweep_long.csv"
    with open(long_path, "w", encoding="utf-8", newline="") as fh:
        import csv as _csv
        w = _csv.writer(fh)
        w.writerow(["distribution", "accuracy", "metric", "fair_mean", "baseline_mean"])
        for row in long_rows:
            w.writerow([row[0], row[1], row[2], f"{row[3]:.6f}", f"{row[4]:.6f}"])
    written.append(long_path)

    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_rerank(args: argparse.Namespace) -> int:
    if not args.input:
        raise ValueError("rerank requires --input")
    attrs = _parse_str_list(args.attributes)
    loaded = load_candidates_csv(args.input, attrs)
    ranking = Ranking(loaded.candidates, source="original")
    target = _parse_target(args.target, loaded.candidates)
    k = int(args.k)
    model = AttentionModel(p=float(args.p), k_max=k)

    fair = detconstsort(ranking, target, k, which_label="true")
    boosts, _, _ = rank_change_metrics(ranking, fair)
    before = evaluate_ranking(ranking.top(k), target, model)
    after = evaluate_ranking(fair, target, model, original=ranking)

    out_path = Path(args.out)
    if out_path.suffix != ".csv" and not out_path.suffix:
        out_path.mkdir(parents=True, exist_ok=True)
        out_path = out_path / "reranked.csv"
    write_candidates_csv(fair.items, out_path, attrs, boosts=boosts)

    print(f"wrote {out_path}")
    print(f"{'metric':<8}{'before':>12}{'after':>12}")
    for m in ("ndkl", "abr", "ndcg", "marc"):
        print(f"{m:<8}{getattr(before, m):>12.6f}{getattr(after, m):>12.6f}")
    return 0


def cmd_casestudy(args: argparse.Namespace) -> int:
    if not args.input:
        raise ValueError("casestudy requires --input")
    attrs = _parse_str_list(args.attributes)
    loaded = load_candidates_csv(args.input, attrs)
    alias = _parse_alias(args.alias)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    want_csv, want_md = _formats(args.format)

    race_values = sorted({c.true_label.parts[0] for c in loaded.candidates})
    matrices = {}
    names = _parse_str_list(args.matrix) if args.matrix else BUILTIN_MATRICES
    gender_cm = None
    if len(attrs) > 1:
        gender_values = sorted({c.true_label.parts[1] for c in loaded.candidates})
        gender_cm = load_matrix_file(args.gender_matrix) if args.gender_matrix \
            else identity_matrix(gender_values)
    for name in names:
        label, race_cm = _resolve_race_matrix(name)
        race_cm = _align_matrix(race_cm, race_values, alias)
        matrices[label] = compose_matrices(race_cm, gender_cm) if gender_cm else race_cm

    result = case_study(loaded.candidates, matrices, trials=int(args.trials),
                        k=int(args.k), model=AttentionModel(p=float(args.p),
                                                            k_max=int(args.k)),
                        master_seed=int(args.seed))
    written = []
    for kind in ("skew", "attention", "treatment", "impact"):
        if want_csv:
            path = out_dir / f"{kind}.csv"
            write_metrics_csv(result.rows, path, kind)
            written.append(path)
        if want_md:
            path = out_dir / f"{kind}.md"
            write_metrics_markdown(result.rows, path, kind)
            written.append(path)
    for p in written:
        print(f"wrote {p}")
    print(f"oracle feasible: {result.oracle_feasible}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairrank",
                                     description="Fair re-ranking and uncertainty "
                                                 "simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; explicit flags win")
        p.add_argument("--seed", type=int, help="master random seed (default 0)")
        p.add_argument("--trials", type=int, help="trials per cell (default 100)")
        p.add_argument("--k", type=int, help="re-ranked list length (default 300)")
        p.add_argument("--p", type=float, help="first-rank attention share (default 0.015)")
        p.add_argument("--out", help="output file or directory (default ./out)")
        p.add_argument("--format", choices=["csv", "md", "both"],
                       help="table formats to write (default both)")

    sim = sub.add_parser("simulate", help="run accuracy sweeps on synthetic populations")
    common(sim)
    sim.add_argument("--dist", help="comma-separated distribution names (default A..F)")
    sim.add_argument("--accuracies", help="comma-separated accuracy grid "
                                          "(default 0.1..1.0 by 0.1)")
    sim.add_argument("--matrix", help="use one named/builtin matrix instead of "
                                      "an accuracy grid")
    sim.add_argument("--n-per-group", type=int, dest="n_per_group",
                     help="cohort size per group (default 1000)")
    sim.add_argument("--alias", action="append",
                     help="matrix label rename FROM=TO (repeatable)")
    sim.set_defaults(func=cmd_simulate)

    rr = sub.add_parser("rerank", help="re-rank a candidate CSV under group floors")
    common(rr)
    rr.add_argument("--input", help="candidate CSV path")
    rr.add_argument("--attributes", help="attribute columns (default race,gender)")
    rr.add_argument("--target", help="target mass 'LABEL=P,...' or 'empirical'")
    rr.set_defaults(func=cmd_rerank)

    cs = sub.add_parser("casestudy", help="baseline/oracle/noise-model tables "
                                          "for a dataset")
    common(cs)
    cs.add_argument("--input", help="candidate CSV path")
    cs.add_argument("--attributes", help="attribute columns (default race,gender)")
    cs.add_argument("--matrix", help="comma-separated matrix names or paths "
                                     "(default: all builtin)")
    cs.add_argument("--gender-matrix", dest="gender_matrix",
                    help="JSON matrix for the second attribute (default identity)")
    cs.add_argument("--alias", action="append",
                    help="matrix label rename FROM=TO (repeatable)")
    cs.set_defaults(func=cmd_casestudy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args)
        return args.func(args)
    except (FairrankError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
