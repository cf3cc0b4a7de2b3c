import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imbalgat import graphio
from imbalgat.graphio import DatasetError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_content_two_line_fixture(tmp_path):
    p = write(tmp_path / "t.content", "a\t1\t0\t1\tX\nb\t0\t1\t1\tY\n")
    feats, labels, ids, classes = graphio.parse_content(p)
    np.testing.assert_array_equal(feats, [[1, 0, 1], [0, 1, 1]])
    assert labels.tolist() == [0, 1]
    assert ids == {"a": 0, "b": 1}
    assert classes == ["X", "Y"]


def test_parse_content_first_appearance_ids(tmp_path):
    p = write(tmp_path / "t.content", "a\t1\tZ\nb\t0\tA\nc\t1\tZ\n")
    _, labels, _, classes = graphio.parse_content(p)
    assert classes == ["Z", "A"] and labels.tolist() == [0, 1, 0]


@pytest.mark.parametrize("text,msg", [
    ("a\t1\t0\tX\nb\t1\tY\n", "features, expected"),
    ("a\t1\tX\na\t0\tY\n", "duplicate"),
    ("", "empty"),
])
def test_parse_content_errors(tmp_path, text, msg):
    with pytest.raises(DatasetError, match=msg):
        graphio.parse_content(write(tmp_path / "t.content", text))


def test_parse_cites_skips_unknown_ids(tmp_path):
    p = write(tmp_path / "t.cites", "a\tb\nb\tghost\n")
    res = graphio.parse_cites(p, {"a": 0, "b": 1})
    assert res.edges == [(0, 1)] and res.skipped == 1 and res.lines == 2


def test_parse_cites_malformed_line_reports_line_number(tmp_path):
    p = write(tmp_path / "t.cites", "a\tb\na b c\n")
    with pytest.raises(DatasetError, match=":2:"):
        graphio.parse_cites(p, {"a": 0, "b": 1})


def csr_rows(ds):
    return {v: ds.segment(v).tolist() for v in range(ds.num_nodes)}


def test_build_graph_single_edge():
    ds = graphio.build_graph(np.ones((3, 1)), [0, 0, 0], [(0, 1)])
    assert csr_rows(ds) == {0: [0, 1], 1: [0, 1], 2: [2]}


def test_build_graph_duplicate_edges_and_self_citations():
    a = graphio.build_graph(np.ones((3, 1)), [0, 0, 0], [(0, 1)])
    b = graphio.build_graph(np.ones((3, 1)), [0, 0, 0], [(0, 1), (0, 1), (1, 0), (2, 2)])
    assert csr_rows(a) == csr_rows(b)
    assert b.raw_edge_count == 1


def test_row_normalization_keeps_zero_rows():
    ds = graphio.build_graph(np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]), [0, 1], [])
    np.testing.assert_allclose(ds.features, [[0.5, 0.5, 0.0], [0.0, 0.0, 0.0]])


@given(st.integers(1, 12), st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), max_size=40),
       st.randoms(use_true_random=False))
def test_csr_invariants_and_permutation_stability(n, raw_edges, rnd):
    edges = [(u % n, v % n) for u, v in raw_edges]
    ds = graphio.build_graph(np.ones((n, 2)), [0] * n, edges)
    shuffled = list(edges)
    rnd.shuffle(shuffled)
    ds2 = graphio.build_graph(np.ones((n, 2)), [0] * n, shuffled)
    assert np.array_equal(ds.row_offsets, ds2.row_offsets)
    assert np.array_equal(ds.col_indices, ds2.col_indices)
    pairs = set(zip(ds.slot_rows.tolist(), ds.col_indices.tolist()))
    for v in range(n):
        seg = ds.segment(v).tolist()
        assert seg.count(v) == 1
        assert seg == sorted(seg)
    assert all((u, v) in pairs for v, u in pairs)


def test_nnz_matches_set_oracle(small_dataset_dir, small_ds):
    # recount from the raw text with plain sets
    ids = [line.split("\t")[0] for line in (small_dataset_dir / "small.content").read_text().splitlines()]
    known = set(ids)
    und = set()
    for line in (small_dataset_dir / "small.cites").read_text().splitlines():
        a, b = line.split()
        if a in known and b in known and a != b:
            und.add(frozenset((a, b)))
    assert small_ds.num_slots == 2 * len(und) + len(ids)
    assert small_ds.raw_edge_count == len(und)


def test_cache_round_trip_bit_identical(small_ds, tmp_path):
    path = tmp_path / "x.igat"
    graphio.save_cache(small_ds, path)
    assert path.read_bytes()[:5] == b"IGAT1"
    back = graphio.load_cache(path)
    for key in ("features", "labels", "row_offsets", "col_indices"):
        assert getattr(back, key).tobytes() == getattr(small_ds, key).tobytes()
    assert back.class_names == small_ds.class_names and back.fingerprint == small_ds.fingerprint


def test_cache_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad.igat"
    p.write_bytes(b"NOPE!" + b"\0" * 20)
    with pytest.raises(DatasetError, match="magic"):
        graphio.load_cache(p)


def test_load_dataset_via_cache_env(small_dataset_dir, tmp_path, monkeypatch):
    monkeypatch.setenv(graphio.CACHE_ENV, str(tmp_path / "cache"))
    first = graphio.load_dataset(small_dataset_dir)
    assert len(list((tmp_path / "cache").glob("*.igat"))) == 1
    second = graphio.load_dataset(small_dataset_dir)
    assert first.features.tobytes() == second.features.tobytes()
    assert first.fingerprint == second.fingerprint


def test_missing_cites_names_path(tmp_path):
    write(tmp_path / "d.content", "a\t1\tX\n")
    with pytest.raises(DatasetError, match="d.cites"):
        graphio.load_dataset(tmp_path)


# --- splits ---------------------------------------------------------------------------------


def test_standard_split_counts_and_disjointness(small_ds):
    sp = graphio.make_split(small_ds, per_class=10, val_size=40, test_size=80)
    assert (len(sp.train_idx), len(sp.val_idx), len(sp.test_idx)) == (40, 40, 80)
    tr, va, te = set(sp.train_idx), set(sp.val_idx), set(sp.test_idx)
    assert not (tr & va) and not (tr & te) and not (va & te)
    assert max(tr | va | te) < small_ds.num_nodes
    # first per_class of each class in file order
    for c in range(small_ds.num_classes):
        first = np.flatnonzero(small_ds.labels == c)[:10]
        assert set(first) <= tr


def test_test_set_is_last_non_train_nodes(small_ds):
    sp = graphio.make_split(small_ds, per_class=10, val_size=40, test_size=80)
    rest = [v for v in range(small_ds.num_nodes) if v not in set(sp.train_idx)]
    assert sp.test_idx.tolist() == rest[-80:]
    assert sp.val_idx.tolist() == rest[:40]


def test_imbalanced_split_keeps_ceil_ratio(small_ds):
    sp = graphio.make_split(small_ds, "imbalanced", ratio=0.5, minority_classes=[3], per_class=10,
                            val_size=40, test_size=80)
    counts = small_ds.class_counts(sp.train_idx)
    assert counts.tolist() == [10, 10, 10, math.ceil(10 * 0.5)]


def test_split_is_deterministic(small_ds):
    a = graphio.make_split(small_ds, per_class=10, val_size=40, test_size=80, seed=1)
    b = graphio.make_split(small_ds, per_class=10, val_size=40, test_size=80, seed=1)
    assert all(np.array_equal(x, y) for x, y in zip((a.train_idx, a.val_idx, a.test_idx),
                                                     (b.train_idx, b.val_idx, b.test_idx)))


def test_split_rejects_small_class(small_ds):
    with pytest.raises(DatasetError, match="fewer than"):
        graphio.make_split(small_ds, per_class=30)


# --- minority masks -------------------------------------------------------------------------


def test_empty_minority_mask(small_ds, small_split):
    m = graphio.minority_mask(small_ds, small_split, [])
    assert m.empty and m.minority_rows.size == 0


def test_minority_mask_rows_and_slots(small_ds, small_split):
    m = graphio.minority_mask(small_ds, small_split, [1, 3])
    assert len(m.minority_rows) == 20
    assert set(m.minority_rows) <= set(small_split.train_idx)
    assert set(small_ds.labels[m.minority_rows]) <= {1, 3}
    # degree-sum oracle (segments include the self-loop)
    deg = {v: 1 + sum(1 for u in small_ds.segment(v) if u != v) for v in m.minority_rows}
    assert len(m.edge_slots) == sum(deg.values())
    owners = set(small_ds.slot_rows[m.edge_slots].tolist())
    assert owners == set(m.minority_rows.tolist())


def test_minority_mask_out_of_range(small_ds, small_split):
    with pytest.raises(ValueError):
        graphio.minority_mask(small_ds, small_split, [9])


def test_table_order_for_known_dataset():
    names = ["Theory", "Case_Based", "Neural_Networks", "Rule_Learning", "Genetic_Algorithms",
             "Probabilistic_Methods", "Reinforcement_Learning"]
    ds = graphio.build_graph(np.ones((7, 1)), list(range(7)), [], class_names=names, name="cora")
    order = [ds.class_names[c] for c in ds.table_label_order()]
    assert order == graphio.TABLE_LABEL_ORDER["cora"]
    minority = {ds.class_names[c] for c in graphio.default_minority_classes(ds)}
    assert minority == {"Reinforcement_Learning", "Theory", "Case_Based", "Rule_Learning"}
    assert graphio.resolve_classes(ds, ["L1", "Theory", 0]) == sorted({6, 0})


def test_unknown_dataset_falls_back_to_lexicographic(small_ds):
    order = small_ds.table_label_order()
    assert [small_ds.class_names[c] for c in order] == sorted(small_ds.class_names)
    assert graphio.default_minority_classes(small_ds) == []
