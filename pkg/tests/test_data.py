"""CSV ingestion, transforms, splitting, synthetic data, LOO variants."""

import math

import numpy as np
import pytest

from cfstab import data, nn
from cfstab.errors import DataError


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestLoadCsv:
    def test_standardize_population_std(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", "a,label\n1,0\n2,1\n3,0\n")
        ds = data.load_csv(p, [data.ColumnSchema("a", "numeric", "standardize")], "label")
        expected = np.array([-1.0, 0.0, 1.0]) * math.sqrt(3.0 / 2.0)  # mean 2, std sqrt(2/3)
        np.testing.assert_allclose(ds.features[:, 0], expected, atol=1e-12)
        assert ds.transform_params["a"]["mean"] == 2.0

    def test_onehot(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", "c,label\na,0\nb,1\na,0\n")
        ds = data.load_csv(p, [data.ColumnSchema("c", "categorical", "onehot")], "label")
        assert ds.feature_names == ("c=a", "c=b")
        np.testing.assert_array_equal(ds.features[0], [1.0, 0.0])
        np.testing.assert_array_equal(ds.features[1], [0.0, 1.0])
        assert np.all(ds.features.sum(axis=1) == 1.0)

    def test_label_excluded_and_rows_preserved(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", "a,b,label\n1,5,0\n2,6,1\n3,7,1\n4,8,0\n")
        schema = [data.ColumnSchema("a", "numeric", "none"),
                  data.ColumnSchema("b", "numeric", "minmax")]
        ds = data.load_csv(p, schema, "label")
        assert ds.n == 4 and ds.dim == 2
        assert "label" not in ds.feature_names
        np.testing.assert_array_equal(ds.labels, [0, 1, 1, 0])

    def test_missing_column(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", "a,label\n1,0\n")
        with pytest.raises(DataError, match="missing column"):
            data.load_csv(p, [data.ColumnSchema("z", "numeric", "none")], "label")

    def test_non_numeric_cell_reports_row(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", "a,label\n1,0\nxyz,1\n")
        with pytest.raises(DataError, match="row 1"):
            data.load_csv(p, [data.ColumnSchema("a", "numeric", "none")], "label")

    def test_missing_values_dropped(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", "a,label\n1,0\n,1\n3,1\n")
        ds = data.load_csv(p, [data.ColumnSchema("a", "numeric", "none")], "label")
        assert ds.n == 2
        np.testing.assert_array_equal(ds.features[:, 0], [1.0, 3.0])

    def test_unseen_category_with_pinned_vocab(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", "c,label\na,0\nq,1\n")
        schema = [data.ColumnSchema("c", "categorical", "onehot", categories=("a", "b"))]
        with pytest.raises(DataError, match="row 1: unseen category 'q'"):
            data.load_csv(p, schema, "label")

    def test_pinned_vocab_keeps_all_columns(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", "c,label\na,0\na,1\n")
        schema = [data.ColumnSchema("c", "categorical", "onehot", categories=("a", "b"))]
        ds = data.load_csv(p, schema, "label")
        assert ds.feature_names == ("c=a", "c=b")
        assert np.all(ds.features[:, 1] == 0.0)

    def test_string_labels_mapped_sorted(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", "a,label\n1,good\n2,bad\n3,good\n")
        ds = data.load_csv(p, [data.ColumnSchema("a", "numeric", "none")], "label")
        np.testing.assert_array_equal(ds.labels, [1, 0, 1])  # bad=0, good=1
        assert ds.transform_params["__label__"]["categories"] == ["bad", "good"]

    def test_minmax_range(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", "a,label\n-4,0\n0,1\n6,0\n")
        ds = data.load_csv(p, [data.ColumnSchema("a", "numeric", "minmax")], "label")
        assert ds.features[:, 0].min() == 0.0 and ds.features[:, 0].max() == 1.0

    def test_round_trip_inverse(self, tmp_path):
        p = write_csv(tmp_path / "t.csv",
                      "a,b,c,label\n1.5,10,u,0\n-2.25,20,v,1\n0.75,15,u,1\n")
        schema = [data.ColumnSchema("a", "numeric", "standardize"),
                  data.ColumnSchema("b", "numeric", "minmax"),
                  data.ColumnSchema("c", "categorical", "onehot")]
        ds = data.load_csv(p, schema, "label")
        cols = data.inverse_transform(ds)
        np.testing.assert_allclose(cols[0], [1.5, -2.25, 0.75], atol=1e-9)
        np.testing.assert_allclose(cols[1], [10.0, 20.0, 15.0], atol=1e-9)
        assert cols[2] == ["u", "v", "u"]


class TestSplit:
    def test_sizes_disjoint_exhaustive(self):
        ds = data.synth_2d("blobs", 10, 0.1, seed=0)
        tr, te = data.split(ds, 0.7, seed=1)
        assert tr.n == 7 and te.n == 3
        all_rows = {tuple(r) for r in ds.features}
        split_rows = [tuple(r) for r in tr.features] + [tuple(r) for r in te.features]
        assert len(split_rows) == 10
        assert set(split_rows) == all_rows

    def test_same_seed_identical(self):
        ds = data.synth_2d("blobs", 50, 0.2, seed=0)
        a1, b1 = data.split(ds, 0.6, seed=9)
        a2, b2 = data.split(ds, 0.6, seed=9)
        assert a1.fingerprint == a2.fingerprint
        assert b1.fingerprint == b2.fingerprint

    def test_label_balance_drift(self):
        ds = data.synth_2d("blobs", 1000, 0.3, seed=2)
        source_frac = ds.labels.mean()
        for seed in range(100):
            tr, _ = data.split(ds, 0.7, seed=seed)
            assert abs(tr.labels.mean() - source_frac) <= 0.10

    def test_degenerate_split(self):
        ds = data.synth_2d("blobs", 4, 0.1, seed=0)
        with pytest.raises(DataError):
            data.split(ds, 0.01, seed=0)


class TestSynth2d:
    def test_zero_noise_exact_centers(self):
        ds = data.synth_2d("blobs", 10, 0.0, seed=3)
        for row, lab in zip(ds.features, ds.labels):
            center = (-1.0, -1.0) if lab == 0 else (1.0, 1.0)
            assert tuple(row) == center

    def test_balance(self):
        ds = data.synth_2d("blobs", 200, 0.3, seed=4)
        assert int((ds.labels == 0).sum()) == 100
        assert int((ds.labels == 1).sum()) == 100

    def test_linear_classifier_accuracy(self):
        ds = data.synth_2d("blobs", 400, 0.3, seed=5)
        cfg = nn.TrainConfig(seed=6, epochs=60, batch_size=32)
        net = nn.train(nn.init_network(nn.NetworkSpec((2, 1)), 6), ds, cfg)
        acc = float((nn.predict_batch(net, ds.features) == ds.labels).mean())
        assert acc >= 0.9

    def test_rings_kind_and_determinism(self):
        a = data.synth_2d("rings", 100, 0.05, seed=7)
        b = data.synth_2d("rings", 100, 0.05, seed=7)
        assert a.fingerprint == b.fingerprint
        r0 = np.linalg.norm(a.features[a.labels == 0], axis=1)
        r1 = np.linalg.norm(a.features[a.labels == 1], axis=1)
        assert r0.mean() < r1.mean()

    def test_too_small(self):
        with pytest.raises(DataError):
            data.synth_2d("blobs", 3, 0.1, seed=0)


class TestLeaveOneOut:
    def test_single_variant(self):
        ds = data.synth_2d("blobs", 20, 0.2, seed=8)
        variants = data.leave_one_out_variants(ds, 1, seed=0)
        assert len(variants) == 1
        assert variants[0][1].n == 19

    def test_each_differs_in_one_row(self):
        ds = data.synth_2d("blobs", 30, 0.2, seed=9)
        variants = data.leave_one_out_variants(ds, 10, seed=1)
        for removed, variant in variants:
            assert variant.n == ds.n - 1
            kept = [i for i in range(ds.n) if i != removed]
            np.testing.assert_array_equal(variant.features, ds.features[kept])
            np.testing.assert_array_equal(variant.labels, ds.labels[kept])

    def test_pool_without_replacement(self):
        ds = data.synth_2d("blobs", 30, 0.2, seed=9)
        variants = data.leave_one_out_variants(ds, 12, seed=2)
        removed = [r for r, _ in variants]
        assert len(removed) == 12
        assert len(set(removed)) == 12

    def test_pool_too_large(self):
        ds = data.synth_2d("blobs", 8, 0.2, seed=9)
        with pytest.raises(DataError):
            data.leave_one_out_variants(ds, 9, seed=0)


class TestFingerprint:
    def test_cell_change(self):
        ds = data.synth_2d("blobs", 10, 0.2, seed=1)
        feats = ds.features.copy()
        feats[0, 0] += 1e-12
        other = data.Dataset(feats, ds.labels, ds.schema, ds.transform_params, ds.feature_names)
        assert other.fingerprint != ds.fingerprint

    def test_order_change(self):
        ds = data.synth_2d("blobs", 10, 0.2, seed=1)
        idx = np.arange(ds.n)[::-1]
        assert ds.take(idx).fingerprint != ds.fingerprint

    def test_schema_change(self):
        ds = data.synth_2d("blobs", 10, 0.2, seed=1)
        schema = (data.ColumnSchema("x0", "numeric", "none"),
                  data.ColumnSchema("renamed", "numeric", "none"))
        other = data.Dataset(ds.features, ds.labels, schema, ds.transform_params,
                             ds.feature_names)
        assert other.fingerprint != ds.fingerprint

    def test_stable_for_equal_content(self):
        a = data.synth_2d("blobs", 10, 0.2, seed=1)
        b = data.synth_2d("blobs", 10, 0.2, seed=1)
        assert a.fingerprint == b.fingerprint
