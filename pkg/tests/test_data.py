import gzip

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adhcal import data as D


class TestMixture:
    def test_deterministic(self):
        a = D.gen_gaussian_mixture(3, 20, 4, 0.5, seed=7)
        b = D.gen_gaussian_mixture(3, 20, 4, 0.5, seed=7)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_balanced_labels(self):
        d = D.gen_gaussian_mixture(4, 25, 2, 1.0, seed=0)
        np.testing.assert_array_equal(np.bincount(d.labels), [25] * 4)

    def test_separable_limit(self):
        # tiny spread: nearest-center (a linear rule) is perfect
        d = D.gen_gaussian_mixture(5, 40, 3, 1e-4, seed=1)
        mu = D.mixture_centers(5, 3, seed=1)
        dist = ((d.features[:, None, :] - mu[None]) ** 2).sum(axis=2)
        assert (np.argmin(dist, axis=1) == d.labels).all()

    def test_class_means(self):
        d = D.gen_gaussian_mixture(2, 5000, 3, 0.3, seed=2)
        mu = D.mixture_centers(2, 3, seed=2)
        for c in range(2):
            # standard error is 0.3 / sqrt(5000) ~ 0.004
            np.testing.assert_allclose(d.features[d.labels == c].mean(axis=0), mu[c], atol=0.02)

    def test_bad_arguments(self):
        with pytest.raises(D.ConfigError):
            D.gen_gaussian_mixture(0, 10, 2, 1.0, seed=0)
        with pytest.raises(D.ConfigError):
            D.gen_gaussian_mixture(2, 10, 2, 0.0, seed=0)

    def test_dataset_is_immutable(self):
        d = D.gen_gaussian_mixture(2, 3, 2, 1.0, seed=0)
        with pytest.raises(ValueError):
            d.features[0, 0] = 1.0

    def test_dataset_validation(self):
        with pytest.raises(ValueError):
            D.LabeledDataset(np.zeros((2, 2)), np.array([0, 3]), 3)
        with pytest.raises(ValueError):
            D.LabeledDataset(np.array([[np.nan]]), np.array([0]), 1)


class TestSplit:
    def test_exact_sizes(self):
        d = D.gen_gaussian_mixture(2, 50, 2, 1.0, seed=0)
        tr, ca, te = D.split(d, D.SplitSpec(0.8, 0.1, 0.1, seed=3))
        assert (len(tr), len(ca), len(te)) == (80, 10, 10)

    def test_reference_sizes(self):
        assert D.split_sizes(4500, D.SplitSpec(4 / 9, 1 / 9, 4 / 9)) == (2000, 500, 2000)

    @settings(max_examples=100)
    @given(st.integers(3, 400), st.floats(0.05, 0.9), st.floats(0.05, 0.9), st.integers(0, 10**6))
    def test_partition(self, m, a, b, seed):
        if a + b >= 0.95:
            return
        spec = D.SplitSpec(a, b, 1.0 - a - b, seed)
        try:
            parts = D.split_indices(m, spec)
        except D.ConfigError:
            return
        joined = np.concatenate(parts)
        np.testing.assert_array_equal(np.sort(joined), np.arange(m))
        for p in parts:
            assert (np.diff(p) > 0).all()

    def test_same_seed_same_partition(self):
        spec = D.SplitSpec(0.5, 0.25, 0.25, seed=9)
        for a, b in zip(D.split_indices(40, spec), D.split_indices(40, spec)):
            np.testing.assert_array_equal(a, b)

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(D.ConfigError):
            D.SplitSpec(0.5, 0.3, 0.3)

    def test_too_small(self):
        with pytest.raises(D.ConfigError):
            D.split_sizes(5, D.SplitSpec(0.9, 0.05, 0.05))


class TestCorruption:
    def test_sigma_grid(self):
        assert D.noise_sigma(5) == pytest.approx(5 * D.noise_sigma(1))

    @pytest.mark.parametrize("bad", [0, 6, 2.5])
    def test_severity_range(self, bad):
        with pytest.raises(D.ConfigError):
            D.noise_sigma(bad)

    def test_zero_noise_limit(self):
        d = D.gen_gaussian_mixture(2, 10, 3, 1.0, seed=0)
        c = D.corrupt_gaussian(d, 3, seed=1, scale=0.0)
        np.testing.assert_array_equal(c.features, d.features)

    def test_labels_and_shape_kept_mean_shift_small(self):
        d = D.gen_gaussian_mixture(2, 5000, 2, 1.0, seed=0)
        c = D.corrupt_gaussian(d, 5, seed=1)
        np.testing.assert_array_equal(c.labels, d.labels)
        assert c.features.shape == d.features.shape
        shift = c.features - d.features
        se = shift.std(axis=0) / np.sqrt(len(d))
        assert (np.abs(shift.mean(axis=0)) <= 3 * se).all()

    def test_noise_scale_follows_feature_std(self):
        d = D.gen_gaussian_mixture(2, 5000, 2, 1.0, seed=0)
        c = D.corrupt_gaussian(d, 2, seed=1, feature_std=np.array([1.0, 10.0]))
        np.testing.assert_allclose((c.features - d.features).std(axis=0), [0.2, 2.0], rtol=0.05)


class TestCSV:
    def test_single_row(self, tmp_path):
        p = tmp_path / "one.csv"
        p.write_text("0.5,1.0,2\n")
        d = D.load_csv(p, 3)
        assert len(d) == 1 and d.dim == 2 and d.labels[0] == 2

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(D.ParseError):
            D.load_csv(p, 2)

    @pytest.mark.parametrize("text, row", [
        ("1,2,0\n1,0\n", "row 2"),
        ("1,2,0\n1,x,1\n", "row 2"),
        ("1,2,0\n3,4,5\n", "row 2"),
        ("1,2,0.5\n", "row 1"),
    ])
    def test_errors_name_the_row(self, tmp_path, text, row):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        with pytest.raises(D.ParseError, match=row):
            D.load_csv(p, 3)

    @pytest.mark.parametrize("name", ["d.csv", "d.csv.gz"])
    def test_round_trip(self, tmp_path, name):
        d = D.gen_gaussian_mixture(3, 7, 4, 0.8, seed=5)
        D.save_csv(d, tmp_path / name)
        back = D.load_csv(tmp_path / name, 3)
        np.testing.assert_allclose(back.features, d.features, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(back.labels, d.labels)

    def test_gzip_is_compressed(self, tmp_path):
        d = D.gen_gaussian_mixture(2, 5, 2, 1.0, seed=0)
        D.save_csv(d, tmp_path / "d.csv.gz")
        with gzip.open(tmp_path / "d.csv.gz", "rt") as fh:
            assert fh.readline().count(",") == 2
