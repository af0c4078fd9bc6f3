from __future__ import annotations

import csv
import io

import numpy as np
import pytest
from hypothesis import given

from dimerflow.decomposition import enumerate_subsystems
from dimerflow.flowcharts import CHART_COLUMNS, chart, chi_vector, u_vector, write_chart_csv
from dimerflow.graph import builtin, validate
from dimerflow.modes import build_modes

from conftest import random_graphs

# Reflection of the diamond through the 1-3 axis: sites 2 <-> 4,
# edges a <-> d, b <-> c, e fixed (dense indices).
SITE_MIRROR = {0: 0, 1: 3, 2: 2, 3: 1}
EDGE_MIRROR = {0: 3, 1: 2, 2: 1, 3: 0, 4: 4}


def test_entry_count_and_order(diamond):
    entries = chart(diamond)
    assert len(entries) == 40
    keys = [(e.mode, e.site) for e in entries]
    assert keys == sorted(keys)
    assert {e.edge for e in entries} == set("abcde")


def test_inner_product_identity(diamond):
    modes = build_modes(diamond)
    for en in chart(diamond, modes=modes):
        i = diamond.ids.index(en.site)
        e = diamond.edge_labels.index(en.edge)
        slot = enumerate_subsystems(diamond)[e].slot_of(i)
        assert abs(en.inner - modes.local[en.mode, e, slot]) < 1e-8
        assert abs(diamond.degree[i] * en.inner - modes.C[i, en.mode]) < 1e-8


@given(random_graphs(n_max=6))
def test_inner_product_identity_random(g):
    modes = build_modes(g)
    for en in chart(g, modes=modes):
        if en.singular:
            continue
        i = g.ids.index(en.site)
        assert abs(g.degree[i] * en.inner - modes.C[i, en.mode]) < 1e-8


def test_chi_first_components_obey_junction(diamond):
    entries = chart(diamond)
    sums: dict[tuple[int, int], complex] = {}
    for en in entries:
        sums[en.mode, en.site] = sums.get((en.mode, en.site), 0) + en.chi[0]
    assert max(abs(v) for v in sums.values()) < 1e-9


def test_dark_mode_chi_vanishes(diamond):
    modes = build_modes(diamond)
    k = int(np.argmin(np.abs(modes.lambdas + 1)))
    for en in chart(diamond, modes=modes):
        if en.mode == k:
            assert max(abs(z) for z in en.chi) < 1e-9


def test_u_vectors_shared_by_equivalent_ports(diamond):
    subs = enumerate_subsystems(diamond)
    a, b, c, d, e = subs
    for pole in build_modes(diamond).poles:
        s = pole.s
        # degree-3 site next to a degree-2 site
        deg3 = [u_vector(a, 0, s, 1), u_vector(b, 0, s, 1), u_vector(c, 0, s, 3), u_vector(d, 0, s, 3)]
        # degree-2 site next to a degree-3 site
        deg2 = [u_vector(a, 0, s, 0), u_vector(b, 0, s, 2), u_vector(c, 0, s, 2), u_vector(d, 0, s, 0)]
        for group in (deg3, deg2):
            assert np.allclose(group, group[0], atol=1e-13)
        assert np.allclose(u_vector(e, 0, s, 1), u_vector(e, 0, s, 3), atol=1e-13)
        assert np.allclose(deg3[0], np.array([s, -2j]) / (6 + s * s), atol=1e-13)
        assert np.allclose(deg2[0], np.array([s, -3j]) / (6 + s * s), atol=1e-13)


def test_u_depends_only_on_local_data():
    g0 = validate(builtin("diamond"), decomposition=True)
    g1 = validate(builtin("diamond", J_a=1.5), decomposition=True)
    old = build_modes(g0).poles
    s0, s1 = enumerate_subsystems(g0), enumerate_subsystems(g1)
    for pole in old:
        for e in range(1, 5):
            for site in s0[e].sites:
                assert u_vector(s0[e], 0, pole, site) == u_vector(s1[e], 0, pole, site)


def _mirror_gap(g):
    modes = build_modes(g)
    gap = 0.0
    for k in range(len(modes.poles)):
        for site in range(4):
            for e in g.incident(site):
                a = chi_vector(modes, k, site, e)
                b = chi_vector(modes, k, SITE_MIRROR[site], EDGE_MIRROR[e])
                gap = max(gap, float(np.max(np.abs(np.subtract(a, b)))))
    return gap


def test_chi_mirror_symmetry(diamond):
    assert _mirror_gap(diamond) < 1e-9


def test_chi_mirror_broken_by_asymmetric_coupling():
    assert _mirror_gap(validate(builtin("diamond", J_a=1.5), decomposition=True)) > 1e-3


def test_display_phase(diamond):
    entries = chart(diamond)
    for k in range(4):
        mode = [en for en in entries if en.mode == k]
        shown = [z for en in mode for z in en.displayed()[0]]
        big = max(shown, key=abs)
        assert abs(big.imag) < 1e-12 and big.real > 0
        assert len({en.phase for en in mode}) == 1


def test_local_resonance_marked_singular():
    g = validate(builtin("path", n=2), decomposition=True)
    entries = chart(g)
    assert len(entries) == 4
    assert all(en.singular and np.isnan(en.u[0].real) for en in entries)


def test_csv_export(diamond):
    buf = io.StringIO()
    write_chart_csv(chart(diamond), buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert tuple(rows[0]) == CHART_COLUMNS
    assert len(rows) == 41
    assert rows[1][3] in "abcde" and int(rows[1][2]) == 1
    assert all(len(r) == len(CHART_COLUMNS) for r in rows)


def test_unknown_site_for_edge(diamond):
    modes = build_modes(diamond)
    with pytest.raises(KeyError):
        chi_vector(modes, 0, 2, 0)
