from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dimerflow.decomposition import Decomposition
from dimerflow.efficiency import trimer_modes
from dimerflow.errors import ConsistencyError
from dimerflow.graph import TrimerParams, builtin, validate
from dimerflow.modes import (build_modes, check_modes, determinant, find_poles, flow_residues,
                             modal_vectors, reconstruct)
from dimerflow.spectral import cluster_eigenvalues, modal_coefficients, propagate

from conftest import random_graphs

SQ17 = math.sqrt(17)
DIAMOND_LAMBDAS = [(1 - SQ17) / 2, -1.0, 0.0, (1 + SQ17) / 2]


def junction_sums(g, chi):
    dec = Decomposition(g)
    out = np.zeros((chi.shape[0], g.N), dtype=complex)
    for e, site in dec.slots:
        out[:, site] += chi[:, 2 * e + dec.subsystems[e].slot_of(site)]
    return out


def test_diamond_poles(diamond):
    poles = find_poles(diamond)
    assert np.allclose([p.lam for p in poles], DIAMOND_LAMBDAS, atol=1e-12)
    assert np.allclose([p.s for p in poles], [-1j * lam for lam in DIAMOND_LAMBDAS], atol=1e-12)
    assert all(p.multiplicity == 1 and p.probe_ratio < 0.1 for p in poles)


def test_poles_shift_with_gamma(diamond):
    poles = find_poles(diamond, 0.4)
    assert np.allclose([p.s for p in poles], [-1j * lam - 0.2 for lam in DIAMOND_LAMBDAS], atol=1e-12)


@pytest.mark.parametrize("lam", DIAMOND_LAMBDAS)
def test_determinant_dips_at_poles(diamond, lam):
    s = -1j * lam
    assert abs(determinant(diamond, s + 1e-6)) * 10 <= abs(determinant(diamond, s + 1e-2))


def test_determinant_between_poles(diamond):
    s = -0.5j * (DIAMOND_LAMBDAS[0] + DIAMOND_LAMBDAS[1])
    assert abs(determinant(diamond, s)) > 1e-3


def test_two_site_determinant_is_constant():
    # Only junction rows: the matrix is the identity and the poles sit on the
    # local resonances of the single subsystem.
    g = validate(builtin("path", n=2, J=0.8), decomposition=True)
    for s in (0.3, 1 + 2j, -0.8j + 1e-3):
        assert determinant(g, s) == 1.0
    poles = find_poles(g)
    assert np.allclose([p.lam for p in poles], [-0.8, 0.8])
    assert all(p.local_singular == (0,) for p in poles)


def test_symmetric_trimer_is_degenerate():
    g = validate(TrimerParams(0.0, 1.0).spec(), decomposition=True)
    poles = find_poles(g)
    # exp(-i lambda t) convention: the doubly degenerate level sits at -J
    assert [p.multiplicity for p in poles] == [2, 1]
    assert np.allclose([p.lam for p in poles], [-1.0, 2.0], atol=1e-12)


@given(st.floats(-2, 2), st.floats(0, 2))
def test_trimer_eigenvalues_sum_to_zero(beta, alpha):
    g = validate(TrimerParams(beta, alpha).spec(), decomposition=True)
    poles = find_poles(g, check=False)
    assert abs(sum(p.lam * p.multiplicity for p in poles)) < 1e-12 * max(1, g.norm)


def test_dark_mode(diamond):
    modes = build_modes(diamond)
    k = int(np.argmin(np.abs(modes.lambdas + 1)))
    assert np.max(np.abs(modes.chi[k])) < 1e-9
    assert np.max(np.abs(modes.C[:, k])) < 1e-9


def test_diamond_zero_mode_third_site(diamond):
    # lambda = 0 eigenvector is (1, 0, -1, 0)/sqrt 2, so C_3 = -1/2 there.
    modes = build_modes(diamond)
    k = int(np.argmin(np.abs(modes.lambdas)))
    assert abs(modes.C[2, k] + 0.5) < 1e-9
    assert abs(modes.C[1, k]) < 1e-9 and abs(modes.C[3, k]) < 1e-9


def test_trimer_residues_match_closed_form():
    for beta, alpha in ((0.5, 1.0), (-0.3, 0.4), (1.2, 1.7)):
        p = TrimerParams(beta, alpha)
        tm = trimer_modes(p)
        modes = build_modes(validate(p.spec(), decomposition=True))
        for m, lam in enumerate(tm.lambdas):
            k = int(np.argmin(np.abs(modes.lambdas - lam)))
            assert abs(modes.lambdas[k] - lam) < 1e-12
            assert np.allclose(modes.chi[k, [0, 2, 4]], tm.flows[:, m], atol=1e-9)
            others = np.delete(tm.lambdas, m)
            den = (lam - others[0]) * (lam - others[1])
            assert abs(modes.C[0, k] - (lam**2 - p.Jb**2) / den) < 1e-9


def test_single_pole_helpers_agree(diamond):
    modes = build_modes(diamond, 0.3, np.array([0.6, 0.8j, 0, 0]))
    for k, pole in enumerate(modes.poles):
        chi = flow_residues(diamond, pole, 0.3, np.array([0.6, 0.8j, 0, 0]))
        assert np.allclose(chi, modes.chi[k], atol=1e-12)
        C = modal_vectors(diamond, pole, chi, 0.3, np.array([0.6, 0.8j, 0, 0]))
        assert np.allclose(C, modes.C[:, k], atol=1e-9)


def test_near_degenerate_warning(caplog):
    g = validate(TrimerParams(1e-7, 1.0).spec(), decomposition=True)
    with caplog.at_level(logging.WARNING):
        modes = build_modes(g)
    assert modes.warnings and "near-degenerate" in caplog.text
    t = np.linspace(0, 20, 201)
    assert np.max(np.abs(reconstruct(g, t, modes=modes) - propagate(g, t))) < 1e-8


@pytest.mark.parametrize("name, params", [("complete", {"n": 4}), ("star", {"n": 5}),
                                          ("cycle", {"n": 6}), ("path", {"n": 2}),
                                          ("trimer", {"beta": 1.0, "alpha": 0.0}),
                                          ("trimer", {})])
def test_special_graphs_reconstruct(name, params):
    g = validate(builtin(name, **params), decomposition=True)
    modes = build_modes(g)
    check_modes(modes)
    t = np.linspace(0, 20, 201)
    assert np.max(np.abs(reconstruct(g, t, modes=modes) - propagate(g, t))) < 1e-8


def test_rabi_from_modes():
    g = validate(builtin("path", n=2, J=1.3), decomposition=True)
    t = np.linspace(0, 5, 21)
    c = reconstruct(g, t)
    assert np.allclose(c[:, 1], -1j * np.sin(1.3 * t), atol=1e-12)
    assert np.allclose(c[0], g.initial, atol=1e-12)


@given(random_graphs())
def test_pole_eigenvalue_bijection(g):
    poles = find_poles(g)
    got = np.sort(np.repeat([1j * p.s for p in poles],
                            [p.multiplicity for p in poles]).real)
    assert np.allclose(got, np.linalg.eigvalsh(g.H), atol=1e-9)


@given(random_graphs(), st.floats(0.0, 1.5))
def test_residue_invariants(g, gamma):
    modes = build_modes(g, gamma)
    check_modes(modes)
    assert np.max(np.abs(modes.C.sum(axis=1) - g.initial)) < 1e-9
    assert modes.matching_error < 1e-8
    assert np.max(np.abs(junction_sums(g, modes.chi))) < 1e-9


@given(random_graphs())
def test_coefficients_match_oracle(g):
    modes = build_modes(g)
    table = modal_coefficients(g)
    groups = cluster_eigenvalues(table.eigenvalues, g.norm)
    assert len(groups) == len(modes.poles)
    for k, grp in enumerate(groups):
        assert np.allclose(modes.C[:, k], table.coefficients[:, grp].sum(axis=1), atol=1e-8)


@given(random_graphs(), st.floats(0.0, 1.0))
def test_reconstruction_matches_oracle(g, gamma):
    t = np.linspace(0, 20, 401)
    dev = np.abs(reconstruct(g, t, gamma) - propagate(g, t, gamma))
    assert dev.max() < 1e-8


def test_corrupted_matrix_is_detected(diamond):
    def corrupt(A):
        A[:, 0, 0] += 0.5

    with pytest.raises(ConsistencyError):
        build_modes(diamond, tamper=corrupt)
