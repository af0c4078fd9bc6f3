"""Dimerized subsystems and the flow (matching + junction) linear system.

Every edge becomes a two-site subsystem whose off-diagonal couplings are
scaled by the neighbours' degrees.  The unknowns are the Laplace-domain
flows at the two ports of each subsystem; they are fixed by one junction
row per site (flows at a site sum to zero) and ``n_i - 1`` matching rows
per site (the site's amplitude is the same in every subsystem holding it).

Slot ``2*e`` is the first site of edge ``e`` and slot ``2*e + 1`` the
second, in edge order.  Matching rows for a site compare its first
incident subsystem (lowest edge index) with each of the others; all
matching rows come first, grouped by site, then the junction rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GraphError, ResonanceError, SingularSystemError
from .graph import ValidatedGraph

RESONANCE_RTOL = 1e-12
SINGULAR_COND = 1e12


@dataclass(frozen=True)
class Subsystem:
    index: int
    label: str
    sites: tuple[int, int]
    site_ids: tuple[int, int]
    energies: tuple[float, float]
    degrees: tuple[int, int]
    J: float

    @property
    def H(self) -> np.ndarray:
        (ei, ej), (ni, nj) = self.energies, self.degrees
        return np.array([[ei, nj * self.J], [ni * self.J, ej]])

    @property
    def delta(self) -> float:
        return 0.5 * (self.energies[0] - self.energies[1])

    @property
    def eps_bar(self) -> float:
        return 0.5 * (self.energies[0] + self.energies[1])

    @property
    def omega2(self) -> float:
        return self.delta**2 + self.degrees[0] * self.degrees[1] * self.J**2

    @property
    def omega(self) -> float:
        return float(np.sqrt(self.omega2))

    def slot_of(self, site: int) -> int:
        """0 if dense ``site`` is the first port, 1 if second."""
        if site == self.sites[0]:
            return 0
        if site == self.sites[1]:
            return 1
        raise KeyError(f"site {site} is not in subsystem {self.label}")

    def resonances(self, gamma: float) -> tuple[complex, complex]:
        """Points where the local propagator blows up."""
        base = -1j * self.eps_bar - 0.5 * gamma
        return base + 1j * self.omega, base - 1j * self.omega


@dataclass(frozen=True)
class RowInfo:
    kind: str  # "matching" | "junction"
    site: int  # dense index
    edges: tuple[int, ...]  # (S, T) for matching rows; incident edges for junctions


@dataclass(frozen=True, eq=False)
class MatchingSystem:
    s: complex
    matrix: np.ndarray
    rhs: np.ndarray
    rows: tuple[RowInfo, ...]
    slots: tuple[tuple[int, int], ...]  # (edge, dense site) per unknown

    @property
    def n_matching(self) -> int:
        return sum(r.kind == "matching" for r in self.rows)

    @property
    def n_junction(self) -> int:
        return sum(r.kind == "junction" for r in self.rows)


def require_decomposable(graph: ValidatedGraph) -> None:
    if graph.M == 0:
        raise GraphError("graph has no edges to decompose")
    if graph.isolated:
        bad = [graph.ids[i] for i in graph.isolated]
        raise GraphError(f"isolated site(s) {bad} cannot be decomposed")


def enumerate_subsystems(graph: ValidatedGraph) -> list[Subsystem]:
    require_decomposable(graph)
    n = graph.degree
    out = []
    for e, (i, j, J) in enumerate(graph.edges):
        out.append(Subsystem(
            index=e,
            label=graph.edge_labels[e],
            sites=(i, j),
            site_ids=(graph.ids[i], graph.ids[j]),
            energies=(float(graph.energies[i]), float(graph.energies[j])),
            degrees=(int(n[i]), int(n[j])),
            J=J,
        ))
    return out


def local_propagator(sub: Subsystem, gamma: float, s: complex) -> np.ndarray:
    """Laplace-domain 2x2 propagator of one subsystem at ``s``."""
    sbar = s + 1j * sub.eps_bar + 0.5 * gamma
    den = sub.omega2 + sbar * sbar
    if abs(den) < RESONANCE_RTOL * max(1.0, sub.omega2):
        raise ResonanceError(f"s={s} is a local resonance of subsystem {sub.label}")
    ni, nj = sub.degrees
    return np.array([
        [sbar - 1j * sub.delta, -1j * nj * sub.J],
        [-1j * ni * sub.J, sbar + 1j * sub.delta],
    ]) / den


def symmetrize(sub: Subsystem) -> tuple[np.ndarray, np.ndarray]:
    """Similarity ``D H D^-1`` with ``D = diag(sqrt(n_i), sqrt(n_j))``.

    Returns the symmetric matrix and ``D``.
    """
    D = np.diag(np.sqrt(np.asarray(sub.degrees, dtype=float)))
    if np.all(D.diagonal() == D[0, 0]):
        return sub.H.copy(), np.eye(2)
    Hs = D @ sub.H @ np.linalg.inv(D)
    off = np.sqrt(sub.degrees[0] * sub.degrees[1]) * sub.J
    Hs[0, 1] = Hs[1, 0] = off  # exact symmetry, not up to rounding
    return Hs, D


class Decomposition:
    """Batched evaluator of the flow system for one graph.

    ``tamper`` is a test hook: it receives the assembled batch of matrices
    (shape ``(K, 2M, 2M)``) and may modify it in place.
    """

    def __init__(self, graph: ValidatedGraph, gamma: float | None = None,
                 initial: np.ndarray | None = None,
                 tamper: Callable[[np.ndarray], None] | None = None):
        self.graph = graph
        self.gamma = graph.gamma if gamma is None else float(gamma)
        self.initial = graph.initial if initial is None else np.asarray(initial, dtype=complex)
        self.subsystems = enumerate_subsystems(graph)
        self.tamper = tamper
        M = graph.M
        self.slots = tuple((e, site) for e, sub in enumerate(self.subsystems) for site in sub.sites)

        n = graph.degree
        self._eps_bar = np.array([s.eps_bar for s in self.subsystems])
        self._delta = np.array([s.delta for s in self.subsystems])
        self._omega2 = np.array([s.omega2 for s in self.subsystems])
        self._off = np.array([[s.degrees[1] * s.J, s.degrees[0] * s.J] for s in self.subsystems])
        self.c0_local = np.array([[self.initial[i] / n[i], self.initial[j] / n[j]]
                                  for i, j, _ in graph.edges], dtype=complex)

        rows: list[RowInfo] = []
        match: list[tuple[int, int, int, int]] = []  # (S, sigma, T, tau)
        for site in range(graph.N):
            inc = graph.incident(site)
            anchor = inc[0]
            for other in inc[1:]:
                rows.append(RowInfo("matching", site, (anchor, other)))
                match.append((anchor, self.subsystems[anchor].slot_of(site),
                              other, self.subsystems[other].slot_of(site)))
        junction = np.zeros((graph.N, 2 * M))
        for site in range(graph.N):
            inc = tuple(graph.incident(site))
            rows.append(RowInfo("junction", site, inc))
            for e in inc:
                junction[site, 2 * e + self.subsystems[e].slot_of(site)] = 1.0
        self.rows = tuple(rows)
        self._match = np.array(match, dtype=int).reshape(-1, 4)
        self._junction = junction
        assert len(rows) == 2 * M

    # ------------------------------------------------------------------ pieces

    def resonances(self) -> np.ndarray:
        return np.array([r for sub in self.subsystems for r in sub.resonances(self.gamma)])

    def propagators(self, s) -> np.ndarray:
        """Local propagators, shape ``(K, M, 2, 2)`` for ``K`` points."""
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        sbar = s[:, None] + 1j * self._eps_bar[None, :] + 0.5 * self.gamma
        den = self._omega2[None, :] + sbar * sbar
        bad = np.abs(den) < RESONANCE_RTOL * np.maximum(1.0, self._omega2)[None, :]
        if np.any(bad):
            k, e = np.argwhere(bad)[0]
            raise ResonanceError(
                f"s={s[k]} is a local resonance of subsystem {self.subsystems[e].label}")
        U = np.empty(s.shape + (self.graph.M, 2, 2), dtype=complex)
        U[..., 0, 0] = sbar - 1j * self._delta
        U[..., 1, 1] = sbar + 1j * self._delta
        U[..., 0, 1] = -1j * self._off[:, 0]
        U[..., 1, 0] = -1j * self._off[:, 1]
        return U / den[..., None, None]

    def systems(self, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Matrices ``(K, 2M, 2M)``, right-hand sides ``(K, 2M)`` and propagators."""
        U = self.propagators(s)
        K, M = U.shape[0], self.graph.M
        A = np.zeros((K, 2 * M, 2 * M), dtype=complex)
        b = np.zeros((K, 2 * M), dtype=complex)
        if len(self._match):
            S, sig, T, tau = self._match.T
            r = np.arange(len(S))
            A[:, r, 2 * S] = U[:, S, sig, 0]
            A[:, r, 2 * S + 1] = U[:, S, sig, 1]
            A[:, r, 2 * T] = -U[:, T, tau, 0]
            A[:, r, 2 * T + 1] = -U[:, T, tau, 1]
            own = np.einsum("krj,rj->kr", U[:, S, sig, :], self.c0_local[S])
            theirs = np.einsum("krj,rj->kr", U[:, T, tau, :], self.c0_local[T])
            b[:, r] = theirs - own
        A[:, len(self._match):, :] = self._junction
        if self.tamper is not None:
            self.tamper(A)
        return A, b, U

    def flows(self, s) -> np.ndarray:
        """Flows at each point, shape ``(K, 2M)``; no conditioning checks."""
        A, b, _ = self.systems(s)
        return np.linalg.solve(A, b[..., None])[..., 0]

    def flows_and_amplitudes(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Flows ``(K, 2M)`` and subsystem amplitudes ``(K, M, 2)``."""
        A, b, U = self.systems(s)
        f = np.linalg.solve(A, b[..., None])[..., 0]
        local = f.reshape(f.shape[0], -1, 2) + self.c0_local[None]
        return f, np.einsum("kmij,kmj->kmi", U, local)

    def system(self, s: complex) -> MatchingSystem:
        A, b, _ = self.systems(s)
        return MatchingSystem(complex(s), A[0], b[0], self.rows, self.slots)

    def solve(self, s: complex) -> np.ndarray:
        """Checked single-point solve."""
        sys_ = self.system(s)
        cond = np.linalg.cond(sys_.matrix)
        if not np.isfinite(cond) or cond > SINGULAR_COND:
            raise SingularSystemError(
                f"matching matrix is singular at s={s} (condition {cond:.3g}); s is at or near a pole",
                condition=cond)
        f = np.linalg.solve(sys_.matrix, sys_.rhs)
        resid = np.linalg.norm(sys_.matrix @ f - sys_.rhs)
        if resid > 1e-10 * np.linalg.norm(sys_.rhs):
            raise SingularSystemError(
                f"residual {resid:.3g} too large at s={s} (condition {cond:.3g})", condition=cond)
        return f


# ------------------------------------------------------------ functional API

def assemble(graph: ValidatedGraph, s: complex, gamma: float | None = None,
             initial: np.ndarray | None = None) -> MatchingSystem:
    return Decomposition(graph, gamma, initial).system(s)


def solve_flows(graph: ValidatedGraph, s: complex, gamma: float | None = None,
                initial: np.ndarray | None = None) -> np.ndarray:
    """Flow vector ``f(s)`` of length ``2M`` in slot order."""
    return Decomposition(graph, gamma, initial).solve(s)


def subsystem_amplitudes(graph: ValidatedGraph, s: complex, gamma: float | None = None,
                         initial: np.ndarray | None = None) -> np.ndarray:
    """Per-subsystem amplitudes ``U(s) [f(s) + c(0)/n]``, shape ``(M, 2)``."""
    dec = Decomposition(graph, gamma, initial)
    f = dec.solve(s)
    U = dec.propagators(s)[0]
    local = f.reshape(-1, 2) + dec.c0_local
    return np.einsum("mij,mj->mi", U, local)
