"""Poles, contour residues and modal reconstruction from the flow system.

Pole locations come from the Hamiltonian spectrum (``s = -i lambda - gamma/2``)
and are confirmed against the matching matrix, which must turn singular
there.  Residues are taken with the trapezoid rule on a circle around each
pole cluster.  Local resonances of the subsystem propagators are removable
singularities of both the flows and the subsystem amplitudes, so the
circle may enclose them; it only has to keep its nodes clear of them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .decomposition import Decomposition
from .errors import ConsistencyError, ContourError
from .graph import ValidatedGraph
from .spectral import DEGENERACY_RTOL, cluster_eigenvalues

log = logging.getLogger(__name__)

BASE_NODES = 64
MAX_NODES = 4096
RESIDUE_TOL = 1e-9
MIN_RADIUS = 1e-8
NEAR_DEGENERATE = 1e-4
PROBE_RATIO = 0.1


@dataclass(frozen=True)
class Pole:
    s: complex
    lam: float
    multiplicity: int
    members: tuple[int, ...]  # indices into the ascending spectrum
    local_singular: tuple[int, ...] = ()  # subsystems resonant exactly at the pole
    probe_ratio: float = float("nan")  # sigma_min(M) near / far; nan when skipped


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Modal description built from the decomposition.

    ``chi[k]`` is the flow residue vector (slot order), ``local[k]`` the
    residues of the subsystem amplitudes ``(M, 2)`` and ``C[:, k]`` the
    full-system coefficient of each site.
    """

    graph: ValidatedGraph
    gamma: float
    initial: np.ndarray
    poles: tuple[Pole, ...]
    chi: np.ndarray
    local: np.ndarray
    C: np.ndarray
    radii: np.ndarray
    nodes: np.ndarray
    matching_error: float
    warnings: tuple[str, ...] = ()

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.poles])

    @property
    def s_poles(self) -> np.ndarray:
        return np.array([p.s for p in self.poles])


def _scale(graph: ValidatedGraph) -> float:
    return max(graph.norm, 1.0)


def _contour_radius(center: complex, others: np.ndarray, resonances: np.ndarray, cap: float,
                    coincide: float) -> float:
    r = cap
    if len(others):
        r = min(r, 0.5 * float(np.min(np.abs(others - center))))
    d = np.abs(resonances - center)
    d = d[d > coincide]
    while r >= MIN_RADIUS:
        if np.all(np.abs(d - r) >= 0.25 * r):
            return r
        r *= 0.8
    raise ContourError(f"no admissible contour of radius >= {MIN_RADIUS:g} around s={center}")


def _coincident(dec: Decomposition, s: complex, tol: float) -> tuple[int, ...]:
    hits = []
    for sub in dec.subsystems:
        if min(abs(r - s) for r in sub.resonances(dec.gamma)) <= tol:
            hits.append(sub.index)
    return tuple(hits)


def _sigma_min(dec: Decomposition, pts: np.ndarray) -> float:
    A, _, _ = dec.systems(pts)
    return float(np.max(np.linalg.svd(A, compute_uv=False)[:, -1]))


def _layout(graph: ValidatedGraph, gamma: float, dec: Decomposition):
    """Pole clusters, their contour radii and coincidence flags."""
    lams = np.linalg.eigvalsh(graph.H)
    scale = _scale(graph)
    groups = cluster_eigenvalues(lams, graph.norm)
    centers = np.array([-1j * lams[g].mean() - 0.5 * gamma for g in groups])
    resonances = dec.resonances()
    coincide = DEGENERACY_RTOL * scale
    cap = 0.1 * (1.0 + graph.norm)
    radii = []
    for k, c in enumerate(centers):
        others = np.delete(centers, k)
        radii.append(_contour_radius(c, others, resonances, cap, coincide))
    warnings = []
    cl = np.array([lams[g].mean() for g in groups])
    for a, b in zip(cl[:-1], cl[1:]):
        if b - a < NEAR_DEGENERATE * scale:
            warnings.append(f"near-degenerate eigenvalues {a:.12g} and {b:.12g} kept as separate poles")
    return lams, groups, centers, np.array(radii), coincide, tuple(warnings)


def find_poles(graph: ValidatedGraph, gamma: float | None = None, check: bool = True,
               _dec: Decomposition | None = None) -> list[Pole]:
    """Pole clusters of the flow functions, each confirmed on the matching matrix.

    A pole that coincides with a subsystem resonance is flagged in
    ``local_singular`` and not probed, since the matrix entries themselves
    blow up there.
    """
    dec = _dec or Decomposition(graph, gamma)
    gamma = dec.gamma
    lams, groups, centers, radii, coincide, _ = _layout(graph, gamma, dec)
    resonances = dec.resonances()
    poles = []
    for g, c, r in zip(groups, centers, radii):
        flagged = _coincident(dec, c, coincide)
        ratio = float("nan")
        if check and not flagged:
            d = np.abs(resonances - c)
            far = 0.5 * min(r, float(np.min(d)) if len(d) else r)
            ring = np.exp(0.5j * np.pi * np.arange(4) + 0.25j * np.pi)
            big = _sigma_min(dec, c + far * ring)
            small = _sigma_min(dec, c + 1e-3 * far * ring)
            ratio = small / big if big > 0 else float("inf")
            if not ratio < PROBE_RATIO:
                raise ConsistencyError(
                    f"method inconsistency: matching matrix is not singular at the pole "
                    f"lambda={lams[g].mean():.12g} (sigma_min ratio {ratio:.3g})")
        poles.append(Pole(complex(c), float(lams[g].mean()), len(g), tuple(g), flagged, ratio))
    return poles


def _trapezoid(dec: Decomposition, center: complex, radius: float, tol: float):
    """Residues of the flows and subsystem amplitudes inside one circle."""
    n = BASE_NODES
    theta = 2 * np.pi * np.arange(2 * n) / (2 * n)
    w = np.exp(1j * theta)
    f, amp = dec.flows_and_amplitudes(center + radius * w)
    while True:
        fine_f = radius * np.einsum("k,kj->j", w, f) / len(w)
        fine_a = radius * np.einsum("k,kmi->mi", w, amp) / len(w)
        coarse_f = radius * np.einsum("k,kj->j", w[::2], f[::2]) / (len(w) // 2)
        coarse_a = radius * np.einsum("k,kmi->mi", w[::2], amp[::2]) / (len(w) // 2)
        change = max(np.max(np.abs(fine_f - coarse_f), initial=0.0),
                     np.max(np.abs(fine_a - coarse_a), initial=0.0))
        if not np.isfinite(change):
            raise ContourError(f"non-finite values on the contour around s={center}")
        if change < tol:
            return fine_f, fine_a, len(w)
        if len(w) >= MAX_NODES:
            raise ContourError(
                f"trapezoid rule did not converge around s={center} (change {change:.3g})")
        m = 2 * len(w)
        theta_new = 2 * np.pi * (np.arange(len(w)) + 0.5) / m
        w_new = np.exp(1j * theta_new)
        f_new, a_new = dec.flows_and_amplitudes(center + radius * w_new)
        w = np.stack([w, w_new], axis=1).reshape(-1)
        f = np.stack([f, f_new], axis=1).reshape(m, -1)
        amp = np.stack([amp, a_new], axis=1).reshape((m,) + amp.shape[1:])


def build_modes(graph: ValidatedGraph, gamma: float | None = None,
                initial: np.ndarray | None = None, check: bool = True,
                tamper=None) -> ModeSet:
    dec = Decomposition(graph, gamma, initial, tamper=tamper)
    _, _, _, radii, _, warnings = _layout(graph, dec.gamma, dec)
    poles = find_poles(graph, dec.gamma, check=check, _dec=dec)
    tol = RESIDUE_TOL * max(1.0, float(np.linalg.norm(dec.initial)))
    chis, locals_, nodes = [], [], []
    for p, r in zip(poles, radii):
        chi, loc, used = _trapezoid(dec, p.s, r, tol)
        chis.append(chi)
        locals_.append(loc)
        nodes.append(used)
    chi = np.array(chis)
    local = np.array(locals_)
    C, mismatch = _site_coefficients(dec, local)
    for w in warnings:
        log.warning(w)
    return ModeSet(graph, dec.gamma, dec.initial, tuple(poles), chi, local, C,
                   np.asarray(radii), np.asarray(nodes), mismatch, warnings)


def _site_coefficients(dec: Decomposition, local: np.ndarray) -> tuple[np.ndarray, float]:
    """Full-system coefficients from the first incident subsystem of each site."""
    graph = dec.graph
    C = np.zeros((graph.N, local.shape[0]), dtype=complex)
    mismatch = 0.0
    for site in range(graph.N):
        vals = [graph.degree[site] * local[:, e, dec.subsystems[e].slot_of(site)]
                for e in graph.incident(site)]
        C[site] = vals[0]
        for v in vals[1:]:
            mismatch = max(mismatch, float(np.max(np.abs(v - vals[0]))))
    return C, mismatch


def flow_residues(graph: ValidatedGraph, pole: Pole, gamma: float | None = None,
                  initial: np.ndarray | None = None) -> np.ndarray:
    """Residue of every flow at ``pole`` (length ``2M``, slot order)."""
    dec = Decomposition(graph, gamma, initial)
    lams, groups, centers, radii, _, _ = _layout(graph, dec.gamma, dec)
    k = int(np.argmin(np.abs(centers - pole.s)))
    tol = RESIDUE_TOL * max(1.0, float(np.linalg.norm(dec.initial)))
    return _trapezoid(dec, centers[k], radii[k], tol)[0]


def modal_vectors(graph: ValidatedGraph, pole: Pole, chi: np.ndarray | None = None,
                  gamma: float | None = None, initial: np.ndarray | None = None) -> np.ndarray:
    """Site coefficients of one pole.

    With ``chi`` given and no local resonance at the pole, each subsystem's
    coefficient is its propagator at the pole applied to its flow residues;
    otherwise the subsystem amplitudes are integrated on the contour.
    """
    dec = Decomposition(graph, gamma, initial)
    if chi is not None and not pole.local_singular:
        U = dec.propagators(pole.s)[0]
        local = np.einsum("mij,mj->mi", U, np.asarray(chi).reshape(-1, 2))
    else:
        lams, groups, centers, radii, _, _ = _layout(graph, dec.gamma, dec)
        k = int(np.argmin(np.abs(centers - pole.s)))
        tol = RESIDUE_TOL * max(1.0, float(np.linalg.norm(dec.initial)))
        local = _trapezoid(dec, centers[k], radii[k], tol)[1]
    return _site_coefficients(dec, local[None])[0][:, 0]


def reconstruct(graph: ValidatedGraph, times, gamma: float | None = None,
                initial: np.ndarray | None = None, modes: ModeSet | None = None) -> np.ndarray:
    """Amplitudes ``(len(times), N)`` summed over the decomposition's modes."""
    modes = modes or build_modes(graph, gamma, initial)
    times = np.asarray(times, dtype=float)
    phase = np.exp(np.outer(times, modes.s_poles))
    return phase @ modes.C.T


def determinant(graph: ValidatedGraph, s: complex, gamma: float | None = None) -> complex:
    A, _, _ = Decomposition(graph, gamma).systems(s)
    return complex(np.linalg.det(A[0]))


def check_modes(modes: ModeSet, tol_match: float = 1e-8, tol_junction: float = 1e-9,
                tol_complete: float = 1e-9) -> None:
    """Raise ``ConsistencyError`` if a residue-level invariant fails."""
    g = modes.graph
    scale = max(1.0, float(np.linalg.norm(modes.initial)))
    if modes.matching_error > tol_match * scale:
        raise ConsistencyError(f"subsystem coefficients disagree by {modes.matching_error:.3g}")
    dec_slots = [(e, site) for e, (a, b, _) in enumerate(g.edges) for site in (a, b)]
    for site in range(g.N):
        idx = [k for k, (_, st) in enumerate(dec_slots) if st == site]
        worst = float(np.max(np.abs(modes.chi[:, idx].sum(axis=1))))
        if worst > tol_junction * scale:
            raise ConsistencyError(f"junction sum of residues at site {g.ids[site]} is {worst:.3g}")
    err = float(np.max(np.abs(modes.C.sum(axis=1) - modes.initial)))
    if err > tol_complete * scale:
        raise ConsistencyError(f"modal coefficients do not sum to the initial state ({err:.3g})")
