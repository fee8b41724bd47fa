import json

import numpy as np
import pytest

from fairrank import (
    BUILTIN_MATRICES,
    Candidate,
    ConfusionMatrix,
    SubgroupLabel,
    compose_matrices,
    identity_matrix,
    load_builtin_matrix,
    load_matrix_file,
    perturb_labels,
    uniform_accuracy_matrix,
)
from fairrank.errors import InvalidMatrix, MissingLabel, UnknownMatrix

RACE = ("Asian", "Black", "Latinx", "White")


class TestBuiltinMatrices:
    def test_all_load_and_are_row_stochastic(self):
        for name in BUILTIN_MATRICES:
            cm = load_builtin_matrix(name)
            assert cm.labels == RACE
            for true in cm.labels:
                assert sum(cm.rows[true].values()) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("name,true,pred,value", [
        ("bisg", "White", "White", 0.9079204295826214),
        ("deepface", "Latinx", "Latinx", 0.32065217391304346),
        ("nameprism", "Black", "Black", 0.030497450377013607),
        ("ethcnn", "White", "White", 0.9429138309589981),
        ("ethnicolr", "Black", "White", 0.7951945766647549),
    ])
    def test_pinned_cells(self, name, true, pred, value):
        cm = load_builtin_matrix(name)
        assert cm.probability(true, pred) == value

    def test_unknown_name(self):
        with pytest.raises(UnknownMatrix):
            load_builtin_matrix("census")

    def test_case_insensitive(self):
        assert load_builtin_matrix("BISG").labels == RACE


class TestUniformAccuracy:
    def test_identity_at_one(self):
        cm = uniform_accuracy_matrix(1.0, ["a", "b", "c"])
        for t in cm.labels:
            for p in cm.labels:
                assert cm.probability(t, p) == (1.0 if p == t else 0.0)

    def test_four_label_seventy(self):
        cm = uniform_accuracy_matrix(0.7, ["a", "b", "c", "d"])
        assert cm.probability("a", "a") == pytest.approx(0.7)
        assert cm.probability("a", "b") == pytest.approx(0.1)

    def test_three_label_ten_percent(self):
        cm = uniform_accuracy_matrix(0.1, ["a", "b", "c"])
        assert cm.probability("b", "b") == pytest.approx(0.1)
        assert cm.probability("b", "a") == pytest.approx(0.45)

    def test_single_label_requires_full_accuracy(self):
        with pytest.raises(InvalidMatrix):
            uniform_accuracy_matrix(0.9, ["only"])
        cm = uniform_accuracy_matrix(1.0, ["only"])
        assert cm.probability("only", "only") == 1.0

    def test_range_validation(self):
        with pytest.raises(InvalidMatrix):
            uniform_accuracy_matrix(1.5, ["a", "b"])


class TestMatrixValidation:
    def test_row_sum_enforced(self):
        with pytest.raises(InvalidMatrix):
            ConfusionMatrix(labels=("a", "b"),
                            rows={"a": {"a": 0.8, "b": 0.1},
                                  "b": {"a": 0.0, "b": 1.0}})

    def test_label_sets_must_match(self):
        with pytest.raises(InvalidMatrix):
            ConfusionMatrix(labels=("a", "b"),
                            rows={"a": {"a": 1.0}, "b": {"a": 0.0, "b": 1.0}})

    def test_negative_entries(self):
        with pytest.raises(InvalidMatrix):
            ConfusionMatrix(labels=("a", "b"),
                            rows={"a": {"a": 1.2, "b": -0.2},
                                  "b": {"a": 0.0, "b": 1.0}})


class TestCompose:
    def test_identity_times_identity(self):
        a = identity_matrix(["r1", "r2"])
        b = identity_matrix(["g1", "g2"])
        cm = compose_matrices(a, b)
        for t in cm.labels:
            for p in cm.labels:
                assert cm.probability(t, p) == (1.0 if t == p else 0.0)

    def test_two_by_two_products(self):
        a = ConfusionMatrix(("r1", "r2"), {"r1": {"r1": 0.9, "r2": 0.1},
                                           "r2": {"r1": 0.1, "r2": 0.9}})
        b = ConfusionMatrix(("g1", "g2"), {"g1": {"g1": 0.8, "g2": 0.2},
                                           "g2": {"g1": 0.2, "g2": 0.8}})
        cm = compose_matrices(a, b)
        row = cm.rows["r1 g1"]
        assert row["r1 g1"] == pytest.approx(0.72)
        assert row["r1 g2"] == pytest.approx(0.18)
        assert row["r2 g1"] == pytest.approx(0.08)
        assert row["r2 g2"] == pytest.approx(0.02)

    def test_composition_is_row_stochastic(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            raw_a = rng.dirichlet(np.ones(3), size=3)
            raw_b = rng.dirichlet(np.ones(2), size=2)
            a = ConfusionMatrix(tuple("abc"), {t: dict(zip("abc", row))
                                               for t, row in zip("abc", raw_a)})
            b = ConfusionMatrix(tuple("xy"), {t: dict(zip("xy", row))
                                              for t, row in zip("xy", raw_b)})
            cm = compose_matrices(a, b)
            for t in cm.labels:
                assert sum(cm.rows[t].values()) == pytest.approx(1.0, abs=1e-9)


class TestRelabel:
    def test_rename(self):
        cm = load_builtin_matrix("bisg").relabel({"Latinx": "Hispanic"})
        assert "Hispanic" in cm.labels
        assert "Latinx" not in cm.labels
        assert cm.probability("Hispanic", "Hispanic") == 0.6781609195402298


class TestFileFormat:
    def test_roundtrip(self, tmp_path):
        cm = load_builtin_matrix("deepface")
        path = tmp_path / "m.json"
        path.write_text(json.dumps(cm.to_dict()), encoding="utf-8")
        again = load_matrix_file(path)
        assert again == cm


def people(labels, n_each=1):
    out = []
    for i, name in enumerate(labels):
        for j in range(n_each):
            out.append(Candidate(f"{name}-{i}-{j}", 0.5, SubgroupLabel([name])))
    return out


class TestPerturbLabels:
    def test_identity_is_noop(self):
        cands = people(RACE, n_each=20)
        out = perturb_labels(cands, identity_matrix(RACE), rng_seed=1)
        assert all(c.inferred_label == c.true_label for c in out)

    def test_zero_accuracy_two_labels_flips_everyone(self):
        cands = people(["a", "b"], n_each=25)
        cm = uniform_accuracy_matrix(0.0, ["a", "b"])
        out = perturb_labels(cands, cm, rng_seed=2)
        assert all(c.inferred_label != c.true_label for c in out)

    def test_deterministic_under_seed(self):
        cands = people(RACE, n_each=10)
        cm = load_builtin_matrix("deepface")
        a = perturb_labels(cands, cm, rng_seed=42)
        b = perturb_labels(cands, cm, rng_seed=42)
        assert [c.inferred_label for c in a] == [c.inferred_label for c in b]

    def test_different_seeds_differ(self):
        cands = people(RACE, n_each=50)
        cm = uniform_accuracy_matrix(0.5, RACE)
        a = perturb_labels(cands, cm, rng_seed=1)
        b = perturb_labels(cands, cm, rng_seed=2)
        assert [c.inferred_label for c in a] != [c.inferred_label for c in b]

    def test_bisg_white_row_monte_carlo(self):
        cands = [Candidate(f"w{i}", 0.5, SubgroupLabel(["White"])) for i in range(10000)]
        out = perturb_labels(cands, load_builtin_matrix("bisg"), rng_seed=7)
        frac = sum(1 for c in out if c.inferred_label == SubgroupLabel(["White"])) / 10000
        assert frac == pytest.approx(0.9079, abs=0.01)

    def test_row_convergence_three_sigma(self):
        # every cell of every row matches its probability within 3 binomial sigma
        cm = load_builtin_matrix("ethnicolr")
        n = 10000
        for true in cm.labels:
            cands = [Candidate(f"{true}-{i}", 0.5, SubgroupLabel([true]))
                     for i in range(n)]
            out = perturb_labels(cands, cm, rng_seed=11)
            for pred in cm.labels:
                p = cm.probability(true, pred)
                got = sum(1 for c in out
                          if c.inferred_label == SubgroupLabel([pred])) / n
                tol = 3.0 * (p * (1 - p) / n) ** 0.5
                assert abs(got - p) <= max(tol, 1e-12), (true, pred)

    def test_missing_label(self):
        cands = people(["Martian"])
        with pytest.raises(MissingLabel):
            perturb_labels(cands, load_builtin_matrix("bisg"), rng_seed=1)

    def test_preserves_order_ids_scores(self):
        cands = people(RACE, n_each=3)
        out = perturb_labels(cands, uniform_accuracy_matrix(0.3, RACE), rng_seed=5)
        assert [c.id for c in out] == [c.id for c in cands]
        assert [c.score for c in out] == [c.score for c in cands]
        assert [c.true_label for c in out] == [c.true_label for c in cands]

    def test_composite_labels_roundtrip(self):
        race = uniform_accuracy_matrix(0.5, ["R1", "R2"])
        gender = identity_matrix(["Men", "Women"])
        cm = compose_matrices(race, gender)
        cands = [Candidate("a", 0.5, SubgroupLabel(["R1", "Men"])),
                 Candidate("b", 0.4, SubgroupLabel(["R2", "Women"]))]
        out = perturb_labels(cands, cm, rng_seed=3)
        for c in out:
            assert c.inferred_label.parts[1] == c.true_label.parts[1]  # gender kept
            assert c.inferred_label.parts[0] in ("R1", "R2")
