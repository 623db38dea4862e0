from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setsgrl.errors import ParseError, ValidationError
from setsgrl.graph import (
    Query,
    add_edges,
    from_edges,
    load_attrs,
    load_edge_list,
    load_queries,
    mask_edges,
    neighbors,
    write_edge_list,
    write_queries,
)


def _load(text: str, **kwargs):
    return load_edge_list(io.StringIO(text), **kwargs)


def test_triangle_is_symmetric_and_sorted() -> None:
    g = _load("0 1\n1 2\n2 0\n")
    assert g.n == 3
    assert g.num_arcs == 6
    assert neighbors(g, 0).tolist() == [1, 2]
    assert neighbors(g, 2).tolist() == [0, 1]


def test_self_loop_dropped_and_duplicates_collapsed() -> None:
    g = _load("# comment\n0 0\n0 1\n1 0\n0 1\n")
    assert g.n == 2
    assert g.num_arcs == 2
    assert g.degree(0) == 1


def test_header_keeps_isolated_trailing_nodes() -> None:
    g = _load("n=5\n0 1\n")
    assert g.n == 5
    assert g.degree(4) == 0
    assert neighbors(g, 4).size == 0


def test_duplicate_rejected_without_dedup() -> None:
    with pytest.raises(ValidationError):
        _load("0 1\n1 0\n", dedup=False)


def test_malformed_line_reports_line_number() -> None:
    with pytest.raises(ParseError) as err:
        _load("0 1\n1 x\n")
    assert err.value.line_number == 2


def test_negative_id_rejected() -> None:
    with pytest.raises(ValidationError):
        _load("0 -1\n")


def test_remap_compacts_sparse_ids() -> None:
    g = _load("10 20\n20 30\n", remap=True)
    assert g.n == 3
    assert g.id_map.tolist() == [10, 20, 30]
    assert neighbors(g, 1).tolist() == [0, 2]


def test_write_then_load_keeps_edges(path4) -> None:
    sink = io.StringIO()
    write_edge_list(path4, sink)
    again = _load(sink.getvalue())
    assert again.n == path4.n
    np.testing.assert_array_equal(again.edges(), path4.edges())


def test_neighbor_out_of_range(path4) -> None:
    with pytest.raises(ValidationError):
        neighbors(path4, 4)


def test_mask_removes_both_arcs(path4) -> None:
    masked = mask_edges(path4, [(2, 1)])
    assert masked.num_arcs == path4.num_arcs - 2
    assert not masked.has_edge(1, 2)
    assert not masked.has_edge(2, 1)
    assert masked.has_edge(0, 1)


def test_mask_absent_pair_is_error(path4) -> None:
    with pytest.raises(ValidationError):
        mask_edges(path4, [(0, 3)])


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=25),
    data=st.data(),
)
def test_mask_then_add_restores_graph(n: int, data) -> None:
    pairs = data.draw(
        st.lists(
            st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1]),
            max_size=60,
        )
    )
    g = from_edges(n, pairs)
    edges = g.edges()
    if edges.shape[0] == 0:
        return
    idx = data.draw(st.lists(st.integers(0, edges.shape[0] - 1), unique=True, max_size=10))
    hidden = edges[idx]
    restored = add_edges(mask_edges(g, hidden), hidden)
    np.testing.assert_array_equal(restored.adj_offsets, g.adj_offsets)
    np.testing.assert_array_equal(restored.adj_targets, g.adj_targets)


def test_gather_neighbors_concatenates_rows(star5) -> None:
    got = star5.gather_neighbors(np.array([1, 0, 2]))
    assert got.tolist() == [0, 1, 2, 3, 4, 0]


def test_attrs_rows_must_match_node_count(tmp_path) -> None:
    path = tmp_path / "attrs.txt"
    path.write_text("1 2\n3 4\n", encoding="utf-8")
    assert load_attrs(path, 2).shape == (2, 2)
    with pytest.raises(ValidationError):
        load_attrs(path, 3)


def test_standardized_attrs_have_zero_mean(tmp_path) -> None:
    path = tmp_path / "attrs.txt"
    path.write_text("1 10\n2 20\n3 30\n", encoding="utf-8")
    values = load_attrs(path, 3, standardize=True)
    np.testing.assert_allclose(values.mean(axis=0), 0.0, atol=1e-12)


def test_query_file_with_labels() -> None:
    arity, queries, labels = load_queries(io.StringIO("arity=3\n0 1 2 1\n3 4 5 0\n"))
    assert arity == 3
    assert [q.nodes for q in queries] == [(0, 1, 2), (3, 4, 5)]
    assert labels == [1, 0]


def test_query_file_round_trip() -> None:
    sink = io.StringIO()
    queries = [Query((0, 1)), Query((2, 5))]
    write_queries(sink, queries)
    arity, again, labels = load_queries(io.StringIO(sink.getvalue()))
    assert arity == 2 and again == queries and labels is None


@pytest.mark.parametrize(
    "text",
    ["0 1\n", "arity=2\n0 1 2 3\n", "arity=2\n0 0\n", "arity=2\n0 1 1\n2 3\n"],
)
def test_bad_query_files(text: str) -> None:
    with pytest.raises(ParseError):
        load_queries(io.StringIO(text))


def test_query_rejects_repeated_node() -> None:
    with pytest.raises(ValidationError):
        Query((1, 1))
