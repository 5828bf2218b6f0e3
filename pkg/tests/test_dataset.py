import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernelsubset.dataset import (
    Dataset,
    DatasetError,
    SubsetMask,
    build_pair_structure,
    is_standardized,
    load_csv,
    pair_structure_from_arrays,
    save_csv,
    standardize,
)

from conftest import random_dataset


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_three_rows(self, tmp_path):
        ds = load_csv(write(tmp_path, "x1,x2,y\n0,1,1\n2,1,1\n4,3,-1\n"))
        assert (ds.n, ds.p) == (3, 2)
        assert ds.feature_names == ("x1", "x2")
        assert ds.y.tolist() == [1, 1, -1]
        assert not ds.standardized

    def test_plus_sign_label(self, tmp_path):
        ds = load_csv(write(tmp_path, "a,y\n0,+1\n1,-1\n"))
        assert ds.y.tolist() == [1, -1]

    def test_single_class(self, tmp_path):
        with pytest.raises(DatasetError, match="class"):
            load_csv(write(tmp_path, "a,y\n0,1\n1,1\n"))

    def test_header_only(self, tmp_path):
        with pytest.raises(DatasetError, match="no data rows"):
            load_csv(write(tmp_path, "a,b,y\n"))

    def test_non_numeric_reports_position(self, tmp_path):
        with pytest.raises(DatasetError, match=r"row 3, column 'b'"):
            load_csv(write(tmp_path, "a,b,y\n0,1,1\n0,zz,-1\n"))

    def test_bad_label(self, tmp_path):
        with pytest.raises(DatasetError, match="label"):
            load_csv(write(tmp_path, "a,y\n0,1\n1,2\n"))

    @pytest.mark.parametrize("cell", ["", "?", "NA"])
    def test_missing_value(self, tmp_path, cell):
        with pytest.raises(DatasetError, match="missing"):
            load_csv(write(tmp_path, f"a,b,y\n0,1,1\n{cell},1,-1\n"))

    def test_label_column_must_be_last(self, tmp_path):
        with pytest.raises(DatasetError, match="'y'"):
            load_csv(write(tmp_path, "y,a\n1,0\n-1,1\n"))

    def test_roundtrip(self, tmp_path, rng):
        ds = random_dataset(rng, 7, 3)
        save_csv(ds, tmp_path / "r.csv")
        back = load_csv(tmp_path / "r.csv")
        np.testing.assert_array_equal(back.x, ds.x)
        np.testing.assert_array_equal(back.y, ds.y)


class TestStandardize:
    def test_population_variance(self):
        ds = standardize(Dataset(np.array([[1.0], [2.0], [3.0]]), [1, -1, 1]))
        np.testing.assert_allclose(ds.x[:, 0], [-1.224745, 0.0, 1.224745], atol=1e-6)
        assert ds.standardized

    def test_constant_column_dropped(self, caplog):
        x = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]])
        ds = standardize(Dataset(x, [1, -1, 1], ("c", "v")))
        assert ds.p == 1
        assert ds.feature_names == ("v",)
        assert ds.dropped == ("c",)
        assert "constant" in caplog.text

    def test_all_constant(self):
        with pytest.raises(DatasetError, match="constant"):
            standardize(Dataset(np.ones((4, 2)), [1, -1, 1, -1]))

    def test_idempotent(self, rng):
        ds = random_dataset(rng, 12, 4)
        again = standardize(ds)
        np.testing.assert_allclose(again.x, ds.x, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 30), st.integers(1, 6))
    def test_moments(self, seed, n, p):
        rng = np.random.default_rng(seed)
        x = rng.normal(3.0, 5.0, size=(n, p))
        y = np.array([1, -1] * n)[:n]
        ds = standardize(Dataset(x, y))
        assert is_standardized(ds.x)
        np.testing.assert_allclose(ds.x.sum(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose((ds.x**2).sum(axis=0) / n, 1.0, atol=1e-9)


class TestPairStructure:
    def test_psi_and_pair_sets(self):
        x = np.array([[-1.0], [0.0], [1.0]])
        ps = pair_structure_from_arrays(x, [1, 1, -1])
        np.testing.assert_allclose(ps.psi, [0.5, 0.5, -1.0])
        # one-based in the docs: H+ = {(1,2)}, H- = {(1,3),(2,3)}
        assert ps.H_plus == [(0, 1)]
        assert ps.H_minus == [(0, 2), (1, 2)]
        assert ps.H == [(0, 1), (0, 2), (1, 2)]

    def test_two_points(self):
        ps = pair_structure_from_arrays(np.array([[0.0], [1.0]]), [1, -1])
        np.testing.assert_allclose(ps.psi, [1.0, -1.0])
        assert ps.H == ps.H_minus == [(0, 1)]

    def test_dist(self):
        ps = pair_structure_from_arrays(np.array([[0.0, 1.0], [2.0, 1.0]]), [1, -1])
        np.testing.assert_allclose(ps.dist[0], [4.0, 0.0])

    def test_requires_standardized(self):
        with pytest.raises(DatasetError, match="standardized"):
            build_pair_structure(Dataset(np.array([[0.0], [1.0]]), [1, -1]))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.sampled_from([-1, 1]), min_size=2, max_size=40))
    def test_invariants(self, labels):
        if len(set(labels)) < 2:
            with pytest.raises(DatasetError):
                pair_structure_from_arrays(np.zeros((len(labels), 1)), labels)
            return
        n = len(labels)
        x = np.arange(n, dtype=float)[:, None]
        ps = pair_structure_from_arrays(x, labels)
        assert abs(ps.psi.sum()) <= 1e-12
        assert len(ps.H_plus) + len(ps.H_minus) == n * (n - 1) // 2
        assert not set(ps.H_plus) & set(ps.H_minus)
        assert np.all(ps.dist >= 0)
        assert all(i < h for i, h in ps.H)
        assert ps.H == sorted(ps.H)

    def test_row_permutation_multiset(self, rng):
        ds = random_dataset(rng, 9, 3)
        perm = rng.permutation(ds.n)
        a = build_pair_structure(ds)
        b = build_pair_structure(standardize(ds.select_rows(perm)))

        def key(ps):
            return sorted((round(pr, 12), tuple(np.round(d, 9))) for pr, d in zip(ps.prod, ps.dist))

        assert key(a) == key(b)


class TestSubsetMask:
    def test_budget(self):
        with pytest.raises(ValueError):
            SubsetMask((1, 1, 0), 1)
        m = SubsetMask((1, 0, 1), 2)
        assert m.indices == (0, 2) and m.size == 2

    def test_theta_bounds(self):
        with pytest.raises(ValueError):
            SubsetMask((0, 0), 3)
