import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adhcal import metrics as M

from .oracles_bruteforce import (brute_accuracy, brute_auroc, brute_bins, brute_ece,
                                 brute_entropy, brute_nll, random_records)


def rec(conf, truth):
    return M.PredictionRecords(np.array(conf, dtype=float), np.array(truth))


class TestBinning:
    def test_single_record_max_component(self):
        b = M.bin_records(rec([[0.9, 0.1]], [0]), 10, "max_component")
        # (0.8, 0.9] is the ninth bin
        assert b.counts[8] == 1 and b.counts.sum() == 1
        assert b.mean_confidence[8] == 0.9
        assert b.accuracy[8] == 1.0

    def test_single_record_all_components(self):
        b = M.bin_records(rec([[0.9, 0.1]], [0]), 10, "all_components")
        assert b.counts[8] == 1 and b.accuracy[8] == 1.0
        assert b.counts[0] == 1 and b.accuracy[0] == 0.0
        assert b.mean_confidence[0] == 0.1

    def test_one_goes_to_last_bin_and_zero_to_first(self):
        b = M.bin_values([0.0, 1.0], [0, 1], 15)
        assert b.counts[0] == 1 and b.counts[14] == 1

    def test_edges_are_right_closed(self):
        e = M.bin_edges(10)
        idx = M.bin_index(e, 10)
        np.testing.assert_array_equal(idx, [0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9])

    def test_against_brute_force(self):
        rng = np.random.default_rng(0)
        r = random_records(rng, 500, 4)
        for pop in M.POPULATIONS:
            b = M.bin_records(r, 15, pop)
            counts, confs, accs = brute_bins(r, 15, pop)
            np.testing.assert_array_equal(b.counts, counts)
            np.testing.assert_allclose(b.mean_confidence, confs, rtol=0, atol=1e-12)
            np.testing.assert_allclose(b.accuracy, accs, rtol=0, atol=1e-12)

    def test_bin_means_inside_bins(self):
        rng = np.random.default_rng(1)
        b = M.bin_records(random_records(rng, 300, 3), 12, "all_components")
        e = b.edges
        nz = b.counts > 0
        assert b.counts.sum() == 900
        assert ((b.mean_confidence[nz] > e[:-1][nz]) | (e[:-1][nz] == 0)).all()
        assert (b.mean_confidence[nz] <= e[1:][nz]).all()

    def test_merge_equals_joint(self):
        rng = np.random.default_rng(2)
        r = random_records(rng, 200, 3)
        a = M.PredictionRecords(r.confidence[:90], r.truth[:90])
        c = M.PredictionRecords(r.confidence[90:], r.truth[90:])
        merged = M.bin_records(a).merge(M.bin_records(c))
        joint = M.bin_records(r)
        np.testing.assert_array_equal(merged.counts, joint.counts)
        assert M.ece(merged) == pytest.approx(M.ece(joint), abs=1e-14)

    def test_empty_records(self):
        with pytest.raises(ValueError):
            M.PredictionRecords(np.zeros((0, 3)), np.zeros(0, dtype=int))

    def test_not_on_simplex(self):
        with pytest.raises(ValueError):
            rec([[0.5, 0.6]], [0])


class TestECE:
    def test_perfect(self):
        assert M.ece_records(rec([[1.0, 0.0]] * 4, [0] * 4)) == 0.0

    def test_maximal(self):
        assert M.ece_records(rec([[1.0, 0.0]] * 4, [1] * 4)) == 1.0

    def test_hand_computed(self):
        # L=2. Top confidences 0.9 (right), 0.8 (wrong) -> bin (0.5, 1]:
        # conf 0.85, acc 0.5. Top confidences 0.5 (right), 0.5 (wrong) -> bin [0, 0.5]:
        # conf 0.5, acc 0.5. ECE = 2/4 * 0.35 + 2/4 * 0 = 0.175.
        r = rec([[0.9, 0.1], [0.2, 0.8], [0.5, 0.5], [0.5, 0.5]], [0, 0, 0, 1])
        assert M.ece_records(r, 2) == pytest.approx(0.175, abs=1e-15)

    def test_against_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            r = random_records(rng, int(rng.integers(1, 60)), int(rng.integers(2, 6)))
            for pop in M.POPULATIONS:
                assert abs(M.ece_records(r, 15, pop) - brute_ece(r, 15, pop)) <= 1e-12

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1))
    def test_bounds_and_permutation(self, seed):
        rng = np.random.default_rng(seed)
        r = random_records(rng, 40, 3)
        e = M.ece_records(r)
        assert 0.0 <= e <= 1.0
        perm = rng.permutation(40)
        e2 = M.ece_records(M.PredictionRecords(r.confidence[perm], r.truth[perm]))
        assert e2 == pytest.approx(e, abs=1e-14)

    def test_zero_when_bins_are_calibrated(self):
        # bin (0.6, 0.7]: ten records at 0.7 with seven correct
        conf = [[0.7, 0.3]] * 10
        truth = [0] * 7 + [1] * 3
        assert M.ece_records(rec(conf, truth), 10) == pytest.approx(0.0, abs=1e-15)


class TestECE2:
    def test_calibrated(self):
        assert M.ece2([0.3, 0.6, 0.9], [0.2, 0.3, 0.5], [0.3, 0.6, 0.9]) == 0.0

    def test_worst(self):
        assert M.ece2([1.0], [1.0], [0.0]) == 1.0

    def test_three_point_extended_precision(self):
        p, f, a = [0.35, 0.62, 0.97], [0.2, 0.45, 0.35], [0.1, 0.7, 0.85]
        mpmath.mp.dps = 40
        ref = mpmath.sqrt(mpmath.fsum(mpmath.mpf(fi) * (mpmath.mpf(ai) - mpmath.mpf(pi)) ** 2
                                      for pi, fi, ai in zip(p, f, a)))
        assert abs(M.ece2(p, f, a) - float(ref)) <= 1e-12

    def test_rejects_bad_accuracy(self):
        with pytest.raises(ValueError):
            M.ece2([0.5], [1.0], [1.5])


class TestEntropyNLLAccuracy:
    def test_uniform_entropy(self):
        assert M.confidence_entropy(rec([[0.25] * 4] * 3, [0, 1, 2])) == pytest.approx(math.log(4))

    def test_one_hot_entropy(self):
        assert M.confidence_entropy(rec(np.eye(3), [0, 1, 2])) == 0.0

    def test_perfect_nll_accuracy(self):
        r = rec(np.eye(3), [0, 1, 2])
        assert M.nll(r) == 0.0
        assert M.accuracy(r) == 1.0

    def test_uniform_nll(self):
        assert M.nll(rec([[0.2] * 5] * 2, [0, 3])) == pytest.approx(math.log(5))

    def test_hand_records(self):
        conf = [[0.7, 0.2, 0.1], [0.1, 0.6, 0.3], [0.3, 0.3, 0.4], [0.5, 0.25, 0.25],
                [0.2, 0.2, 0.6]]
        truth = [0, 2, 2, 1, 0]
        r = rec(conf, truth)
        expected_nll = -(math.log(0.7) + math.log(0.3) + math.log(0.4) + math.log(0.25)
                         + math.log(0.2)) / 5
        assert M.nll(r) == pytest.approx(expected_nll, abs=1e-15)
        # predicted 0, 1, 2, 0, 2 -> records 0 and 2 correct
        assert M.accuracy(r) == pytest.approx(0.4)

    def test_zero_probability_is_clamped_and_flagged(self):
        value, flagged = M.nll(rec([[1.0, 0.0]], [1]), return_flag=True)
        assert flagged
        assert value == pytest.approx(-math.log(1e-300))

    def test_against_brute_force(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            r = random_records(rng, int(rng.integers(1, 40)), int(rng.integers(2, 7)))
            assert abs(M.confidence_entropy(r) - brute_entropy(r)) <= 1e-12
            assert abs(M.nll(r) - brute_nll(r)) <= 1e-12
            assert M.accuracy(r) == brute_accuracy(r)

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 8))
    def test_entropy_at_most_log_n(self, seed, n):
        r = random_records(np.random.default_rng(seed), 20, n)
        assert M.confidence_entropy(r) <= math.log(n) + 1e-12


class TestAUROC:
    def test_perfect_separation(self):
        assert M.auroc([0.9] * 5, [0.1] * 7) == 1.0

    def test_identical_multisets(self):
        assert M.auroc([0.2, 0.5, 0.5, 0.9], [0.9, 0.5, 0.2, 0.5]) == 0.5

    def test_pairwise_oracle_exact(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            # coarse grid forces ties
            a = np.round(rng.uniform(size=50), 1)
            b = np.round(rng.uniform(size=50) * 0.9, 1)
            assert M.auroc(a, b) == brute_auroc(a, b)

    @settings(max_examples=200)
    @given(st.lists(st.integers(0, 20), min_size=1, max_size=30),
           st.lists(st.integers(0, 20), min_size=1, max_size=30))
    def test_antisymmetry(self, a, b):
        assert M.auroc(a, b) + M.auroc(b, a) == 1.0

    def test_empty(self):
        with pytest.raises(ValueError):
            M.auroc([], [0.5])


class TestExports:
    def test_single_bin(self):
        rows = M.reliability_export(M.bin_records(rec([[0.6, 0.4]], [0]), 1))
        assert len(rows) == 1
        assert rows[0]["bin_low"] == 0.0 and rows[0]["bin_high"] == 1.0

    @pytest.mark.parametrize("L", [1, 2, 7, 15, 30])
    def test_row_count(self, L):
        rng = np.random.default_rng(L)
        rows = M.reliability_export(M.bin_records(random_records(rng, 10, 3), L))
        assert len(rows) == L
        assert [tuple(r) for r in rows][0] == M.RELIABILITY_COLUMNS

    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        rows = M.reliability_export(M.bin_records(random_records(rng, 100, 4), 15))
        path = tmp_path / "rel.csv"
        path.write_text(M.rows_to_csv(rows))
        back = M.read_csv_rows(path)
        assert len(back) == len(rows)
        for r, s in zip(rows, back):
            for k in M.RELIABILITY_COLUMNS:
                assert abs(r[k] - s[k]) <= 1e-12

    def test_jsonl_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        r = random_records(rng, 30, 3)
        path = tmp_path / "records.jsonl"
        path.write_text(M.records_to_jsonl(r))
        back = M.read_records_jsonl(path)
        np.testing.assert_array_equal(back.confidence, r.confidence)
        np.testing.assert_array_equal(back.truth, r.truth)

    def test_confidence_histogram_fractions(self):
        rng = np.random.default_rng(8)
        rows = M.confidence_histogram(random_records(rng, 64, 3), 10)
        assert sum(r["count"] for r in rows) == 64
        assert sum(r["fraction"] for r in rows) == pytest.approx(1.0)


def test_max_and_all_component_agree_on_one_hot_pairs():
    # one-hot 2-class confidences: the max component carries every correct entry and the
    # non-max component lands in bin 0 with accuracy 0, so both populations have zero gap,
    # checked here with the brute-force binning rather than algebra
    for truth in itertools.product([0, 1], repeat=4):
        conf = np.eye(2)[list(truth)]
        r = M.PredictionRecords(conf, np.array(truth))
        for pop in M.POPULATIONS:
            assert brute_ece(r, 15, pop) == M.ece_records(r, 15, pop) == 0.0
