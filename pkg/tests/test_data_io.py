import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_model
from glrl.data_io import (
    Dataset,
    encode_observed,
    kfold,
    load_id_maps,
    load_model,
    load_ratings,
    load_signed_edges,
    merge,
    save_model,
    split,
    write_triples,
)
from glrl.errors import ColdStartError, DataError
from glrl.sparse_core import LowRankModel, ObservedMatrix


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def entry_set(obs):
    return sorted(zip(obs.rows.tolist(), obs.cols.tolist(), obs.values.tolist()))


def synthetic(n_entries, seed=0):
    rng = np.random.default_rng(seed)
    m, n = 30, 40
    flat = rng.choice(m * n, size=n_entries, replace=False)
    obs = ObservedMatrix(m, n, flat // n, flat % n, rng.integers(1, 6, n_entries).astype(float))
    return Dataset(obs, "ratings", np.arange(m), np.arange(n))


class TestRatings:
    def test_three_lines(self, tmp_path):
        p = write(tmp_path, "r.tsv", "0\t0\t5\n1\t1\t3\n0\t1\t1\n")
        d = load_ratings(p)
        assert d.shape == (2, 2) and d.observed.nnz == 3
        np.testing.assert_array_equal(d.observed.to_dense(), [[5, 1], [0, 3]])

    def test_colon_format_with_timestamps(self, tmp_path):
        p = write(tmp_path, "r.dat", "10::7::4::978300760\n10::9::2::978300761\n3::7::5::1\n")
        d = load_ratings(p, "ml-colon")
        assert d.shape == (2, 2)
        np.testing.assert_array_equal(d.row_ids, [3, 10])
        np.testing.assert_array_equal(d.col_ids, [7, 9])

    def test_string_ids(self, tmp_path):
        p = write(tmp_path, "r.tsv", "alice\tx\t4\nbob\ty\t2\nalice\ty\t3\n")
        d = load_ratings(p)
        assert d.row_ids.tolist() == ["alice", "bob"]

    def test_duplicate_reports_line(self, tmp_path):
        p = write(tmp_path, "r.tsv", "1\t1\t5\n2\t1\t4\n1\t1\t3\n")
        with pytest.raises(DataError, match="line 3"):
            load_ratings(p)

    def test_malformed_line(self, tmp_path):
        p = write(tmp_path, "r.tsv", "1\t1\t5\n2\t1\n")
        with pytest.raises(DataError, match=":2:"):
            load_ratings(p)
        p = write(tmp_path, "s.tsv", "1\t1\tfive\n")
        with pytest.raises(DataError, match=":1:"):
            load_ratings(p)

    def test_out_of_range(self, tmp_path):
        with pytest.raises(DataError, match="outside"):
            load_ratings(write(tmp_path, "r.tsv", "1\t1\t7\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataError, match="no ratings"):
            load_ratings(write(tmp_path, "r.tsv", "\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_ratings(tmp_path / "absent.tsv")

    def test_movielens_100k(self, ml100k_path):
        d = load_ratings(ml100k_path)
        assert d.shape == (943, 1682)
        assert d.observed.nnz == 100_000
        assert set(np.unique(d.observed.values)) == {1.0, 2.0, 3.0, 4.0, 5.0}


class TestSignedEdges:
    def test_degree_one_user_removed(self, tmp_path):
        p = write(tmp_path, "e.txt", "# toy\n1 1 1\n2 3 -1\n")
        d = load_signed_edges(p)
        assert d.observed.nnz == 1
        assert d.row_ids.tolist() == [1] and d.col_ids.tolist() == [1]

    def test_iterated_filter(self, tmp_path):
        # removing user 4 leaves user 3 with a single edge, which then goes too
        p = write(tmp_path, "e.txt", "1 2 1\n2 1 -1\n1 3 1\n3 4 1\n")
        d = load_signed_edges(p)
        assert d.observed.nnz == 2
        assert sorted(d.row_ids.tolist()) == [1, 2]

    def test_fixpoint_property(self, tmp_path):
        rng = np.random.default_rng(0)
        lines = {(int(a), int(b)) for a, b in rng.integers(0, 40, (80, 2))}
        text = "".join(f"{a}\t{b}\t{rng.choice([-1, 1])}\n" for a, b in lines)
        d = load_signed_edges(write(tmp_path, "e.txt", text))
        raw_r, raw_c = d.decode(d.observed.rows, d.observed.cols)
        users, counts = np.unique(np.concatenate([raw_r, raw_c]), return_counts=True)
        assert counts.min() >= 2

    def test_zero_one_flag(self, tmp_path):
        p = write(tmp_path, "e.txt", "1 2 0\n2 1 1\n")
        with pytest.raises(DataError, match="sign"):
            load_signed_edges(p)
        d = load_signed_edges(p, zero_one=True)
        assert sorted(d.observed.values.tolist()) == [-1.0, 1.0]

    def test_bad_sign(self, tmp_path):
        with pytest.raises(DataError, match=":1:"):
            load_signed_edges(write(tmp_path, "e.txt", "1 2 3\n"))

    def test_nothing_survives(self, tmp_path):
        with pytest.raises(DataError):
            load_signed_edges(write(tmp_path, "e.txt", "1 2 1\n"))


class TestSplits:
    def test_half_split(self):
        train, test = split(synthetic(1000), 0.5, seed=3)
        assert train.nnz == 500 and test.nnz == 500

    def test_two_entries(self):
        train, test = split(synthetic(2), 0.5)
        assert train.nnz == 1 and test.nnz == 1

    def test_movielens_half(self, ml100k_path):
        train, test = split(load_ratings(ml100k_path), 0.5, seed=0)
        assert abs(train.nnz - 50_000) <= 1 and abs(test.nnz - 50_000) <= 1

    def test_seed_determinism(self):
        d = synthetic(200)
        a, b, c = split(d, 0.5, 1), split(d, 0.5, 1), split(d, 0.5, 2)
        assert entry_set(a[0]) == entry_set(b[0])
        assert entry_set(a[0]) != entry_set(c[0])

    def test_rejects_bad_fraction(self):
        with pytest.raises(DataError):
            split(synthetic(10), 1.0)
        with pytest.raises(DataError):
            split(synthetic(1), 0.5)

    def test_kfold_sizes_and_union(self):
        d = synthetic(100)
        folds = kfold(d, 10, seed=4)
        assert [t.nnz for _, t in folds] == [10] * 10
        union = sorted(e for _, t in folds for e in entry_set(t))
        assert union == entry_set(d.observed)
        for train, test in folds:
            assert not set(entry_set(train)) & set(entry_set(test))
            assert train.nnz + test.nnz == 100

    def test_kfold_deterministic(self):
        d = synthetic(50)
        assert [entry_set(t) for _, t in kfold(d, 5, 1)] == [entry_set(t) for _, t in kfold(d, 5, 1)]

    def test_kfold_too_few(self):
        with pytest.raises(DataError):
            kfold(synthetic(5), 10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 300), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
    def test_split_merge_round_trip(self, n, frac, seed):
        d = synthetic(n, seed % 1000)
        train, test = split(d, frac, seed)
        assert abs(train.nnz - frac * n) <= 1 or train.nnz in (1, n - 1)
        assert entry_set(merge(train, test)) == entry_set(d.observed)


class TestIds:
    def test_round_trip(self, tmp_path):
        p = write(tmp_path, "r.tsv", "u9\ti2\t4\nu3\ti2\t2\nu9\ti7\t3\n")
        d = load_ratings(p)
        raw_r, raw_c = d.decode(d.observed.rows, d.observed.cols)
        ri, ci = d.encode(raw_r.tolist(), raw_c.tolist())
        np.testing.assert_array_equal(ri, d.observed.rows)
        np.testing.assert_array_equal(ci, d.observed.cols)

    def test_cold_ids(self, tmp_path):
        d = load_ratings(write(tmp_path, "r.tsv", "1\t1\t4\n2\t2\t2\n"))
        ri, _ = d.encode([1, 99], [1, 1])
        assert ri.tolist() == [0, -1]
        with pytest.raises(ColdStartError):
            encode_observed(d, [1, 99], [1, 1], [3.0, 3.0])

    def test_write_triples_reloads(self, tmp_path):
        d = load_ratings(write(tmp_path, "r.tsv", "5\t1\t4\n2\t8\t2\n5\t8\t1\n"))
        out = tmp_path / "out.tsv"
        write_triples(out, d)
        again = load_ratings(out)
        assert entry_set(again.observed) == entry_set(d.observed)


class TestModelFile:
    def test_round_trip(self, tmp_path, rng):
        model = random_model(rng, 7, 5, 4)
        path = tmp_path / "m.glrl"
        save_model(path, model, np.arange(7), np.array(list("abcde")))
        back = load_model(path)
        np.testing.assert_array_equal(back.theta, model.theta)
        np.testing.assert_array_equal(back.U, model.U)
        np.testing.assert_array_equal(back.V, model.V)
        rows, cols = load_id_maps(path)
        assert rows.tolist() == list(range(7)) and cols.tolist() == list("abcde")

    def test_layout(self, tmp_path):
        model = LowRankModel(2, 1, [3.0], np.array([[0.6], [0.8]]), np.array([[1.0]]))
        path = tmp_path / "m.glrl"
        save_model(path, model)
        buf = path.read_bytes()
        assert buf[:8] == b"GLRLMDL\x00" and buf[8] == 1
        assert np.frombuffer(buf[9:33], "<u8").tolist() == [2, 1, 1]
        assert np.frombuffer(buf[33:], "<f8").tolist() == [3.0, 0.6, 0.8, 1.0]
        assert load_id_maps(path) == (None, None)

    def test_empty_model(self, tmp_path):
        path = tmp_path / "z.glrl"
        save_model(path, LowRankModel.zeros(3, 4))
        back = load_model(path)
        assert back.shape == (3, 4) and back.n_terms == 0

    def test_corrupt(self, tmp_path, rng):
        path = tmp_path / "m.glrl"
        save_model(path, random_model(rng, 3, 3, 2))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DataError, match="truncated"):
            load_model(path)
        path.write_bytes(b"NOTAMODEL" + bytes(40))
        with pytest.raises(DataError, match="magic"):
            load_model(path)

    def test_sidecar_is_json(self, tmp_path, rng):
        path = tmp_path / "m.glrl"
        save_model(path, random_model(rng, 2, 2, 1), [10, 20], [1, 2])
        assert json.loads((tmp_path / "m.glrl.ids.json").read_text())["row_ids"] == [10, 20]
