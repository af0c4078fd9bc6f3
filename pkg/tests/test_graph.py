from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dimerflow.errors import GraphError
from dimerflow.graph import (BUILTINS, Edge, GraphSpec, Site, TrimerParams, builtin, parse_graph,
                             serialize_graph, validate, with_overrides)

from conftest import random_graphs

DIAMOND_DOC = {
    "sites": [{"id": k, "energy": 0.0} for k in (1, 2, 3, 4)],
    "edges": [{"a": 1, "b": 2, "J": 1.0, "label": "a"}, {"a": 2, "b": 3, "J": 1.0, "label": "b"},
              {"a": 3, "b": 4, "J": 1.0, "label": "c"}, {"a": 4, "b": 1, "J": 1.0, "label": "d"},
              {"a": 2, "b": 4, "J": 1.0, "label": "e"}],
    "gamma": 0.0,
    "initial": {"1": [1.0, 0.0]},
}


def doc(**changes):
    d = json.loads(json.dumps(DIAMOND_DOC))
    d.update(changes)
    return json.dumps(d)


def test_parse_diamond_document():
    spec = parse_graph(doc())
    assert len(spec.edges) == 5
    g = validate(spec)
    assert (g.N, g.M) == (4, 5)
    assert list(g.degree) == [2, 3, 2, 3]
    assert g.edge_labels == ("a", "b", "c", "d", "e")


def test_builtin_diamond_matches_document():
    g1 = validate(parse_graph(doc()))
    g2 = validate(builtin("diamond"))
    assert np.array_equal(g1.H, g2.H)


def test_default_initial_is_lowest_site():
    text = json.dumps({"sites": [{"id": 7, "energy": 0}, {"id": 3, "energy": 0}],
                       "edges": [{"a": 3, "b": 7, "J": 1}]})
    spec = parse_graph(text)
    assert spec.initial == {3: 1.0 + 0.0j}
    assert spec.gamma == 0.0
    g = validate(spec)
    assert g.ids == (3, 7)
    assert np.array_equal(g.initial, [1.0, 0.0])
    assert list(g.degree) == [1, 1]


@pytest.mark.parametrize("text, where", [
    ("{", "line 1"),
    (doc(extra=1), "<root>"),
    (doc(edges=[{"a": 1, "b": 1, "J": 1.0}]), "edges[0]"),
    (doc(edges=[{"a": 1, "b": 2, "J": "strong"}]), "edges[0].J"),
    (doc(edges=[{"a": 1, "b": 2, "J": 1.0, "weight": 2}]), "edges[0]"),
    (doc(edges=[{"a": 1, "b": 9, "J": 1.0}]), "edges[0]"),
    (doc(edges=[{"a": 1, "b": 2, "J": 1.0}, {"a": 2, "b": 1, "J": 2.0}]), "edges[1]"),
    (doc(gamma=-0.1), "gamma"),
    (doc(gamma=[0.1, 0.2]), "gamma"),
    (doc(initial={"1": [0.0, 0.0]}), "initial"),
    (doc(initial={"x": [1.0, 0.0]}), "initial"),
    (doc(sites=[{"id": 1, "energy": 0}, {"id": 1, "energy": 0}], edges=[]), "sites[1]"),
    (doc(sites=[{"id": 1, "energy": 0, "gamma": 0.1}], edges=[]), "sites[0]"),
])
def test_invalid_documents_report_location(text, where):
    with pytest.raises(GraphError) as info:
        validate(parse_graph(text))
    assert where in str(info.value)


def test_self_loop_message():
    with pytest.raises(GraphError, match="self-loop"):
        validate(parse_graph(doc(edges=[{"a": 1, "b": 1, "J": 1.0}])))


def test_isolated_site_rejected_only_for_decomposition():
    spec = GraphSpec((Site(1), Site(2), Site(3)), (Edge(1, 2, 1.0),), 0.0, {1: 1.0})
    assert validate(spec).isolated == (2,)
    with pytest.raises(GraphError, match="isolated"):
        validate(spec, decomposition=True)


def test_degrees_of_canonical_graphs():
    assert list(validate(builtin("complete", n=3)).degree) == [2, 2, 2]
    assert list(validate(builtin("path", n=2)).degree) == [1, 1]
    assert validate(builtin("path", n=2)).M == 1
    assert list(validate(builtin("star", n=5)).degree) == [4, 1, 1, 1, 1]
    assert list(validate(builtin("cycle", n=6)).degree) == [2] * 6


def test_trimer_builtin_couplings():
    g = validate(builtin("trimer", beta=1, alpha=0, J=1))
    assert [J for _, _, J in g.edges] == [2.0, 0.0, 0.0]
    g = validate(builtin("trimer", beta=0, alpha=1, J=1))
    assert [J for _, _, J in g.edges] == [1.0, 1.0, 1.0]
    assert np.array_equal(g.initial, [1, 0, 0])


@given(st.floats(-3, 3), st.floats(0, 3), st.floats(0.1, 3))
def test_trimer_params_derived_couplings(beta, alpha, J):
    p = TrimerParams(beta, alpha, J)
    assert p.Ja == (1 + beta) * J and p.Jc == (1 - beta) * J and p.Jb == alpha * J
    assert abs(p.Ja + p.Jc - 2 * J) <= 1e-15 * max(1.0, abs(p.Ja) + abs(p.Jc))


@pytest.mark.parametrize("name, params", [("nope", {}), ("path", {"n": 1}), ("diamond", {"n": 3}),
                                          ("cycle", {"n": 2}), ("trimer", {"gamma": -1})])
def test_builtin_errors(name, params):
    with pytest.raises(GraphError):
        builtin(name, **params)


def test_every_builtin_validates():
    for name in BUILTINS:
        g = validate(builtin(name), decomposition=True)
        assert g.degree.sum() == 2 * g.M


def test_with_overrides():
    g = validate(builtin("diamond"))
    h = with_overrides(g, gamma=0.5, initial=np.array([0, 1j, 0, 0]))
    assert h.gamma == 0.5
    assert np.array_equal(h.initial, [0, 1j, 0, 0])
    with pytest.raises(GraphError):
        with_overrides(g, initial=np.ones(3))


def test_serializer_is_byte_stable():
    spec = builtin("diamond", J_e=0.25)
    text = serialize_graph(spec)
    assert serialize_graph(parse_graph(text)) == text
    assert "2.5000000000000000e-01" in text


@given(random_graphs())
def test_graph_invariants(g):
    assert g.degree.sum() == 2 * g.M
    assert np.array_equal(g.H, g.H.T)
    for i in range(g.N):
        assert len(g.incident(i)) == g.degree[i]
    assert all(g.ids.index(g.ids[i]) == i for i in range(g.N))


@given(random_graphs())
def test_round_trip_is_identity(g):
    again = parse_graph(serialize_graph(g.spec))
    assert again == g.spec
    assert serialize_graph(again) == serialize_graph(g.spec)
