"""Per-mode vector charts: local response ``u`` against flow residue ``chi``.

For site ``i`` on edge ``S`` and pole ``k``, ``u`` is the row of the local
propagator at the pole belonging to ``i`` (own element first) and ``chi``
the flow residues of ``S`` (own port first).  Their plain (unconjugated)
dot product is the subsystem coefficient ``C_k^(S)`` at ``i``; multiply by
the degree of ``i`` for the full-system coefficient.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .decomposition import Subsystem, enumerate_subsystems, local_propagator
from .errors import ResonanceError
from .graph import ValidatedGraph, fmt_float
from .modes import ModeSet, Pole, build_modes

CHART_COLUMNS = ("mode_index", "lambda", "site", "edge", "u1_re", "u1_im", "u2_re", "u2_im",
                 "chi1_re", "chi1_im", "chi2_re", "chi2_im", "C_re", "C_im", "phase_re", "phase_im")

_NAN2 = (complex(np.nan, np.nan), complex(np.nan, np.nan))


@dataclass(frozen=True)
class ChartEntry:
    mode: int
    lam: float
    site: int  # site id
    edge: str  # edge label
    u: tuple[complex, complex]
    chi: tuple[complex, complex]
    inner: complex
    phase: complex
    singular: bool = False

    def displayed(self) -> tuple[tuple[complex, complex], tuple[complex, complex]]:
        """``u`` and ``chi`` with the mode's display phase divided out."""
        return (tuple(z / self.phase for z in self.u), tuple(z / self.phase for z in self.chi))


def u_vector(sub: Subsystem, gamma: float, pole: Pole | complex, site: int) -> tuple[complex, complex]:
    """Local-response pair for dense ``site``.

    Raises ``ResonanceError`` when the pole is a resonance of ``sub``.
    """
    s = pole.s if isinstance(pole, Pole) else complex(pole)
    U = local_propagator(sub, gamma, s)
    k = sub.slot_of(site)
    return complex(U[k, k]), complex(U[k, 1 - k])


def chi_vector(modes: ModeSet, k: int, site: int, edge: int) -> tuple[complex, complex]:
    """Flow residues of ``edge`` at pole ``k``, dense ``site`` first."""
    own = _slot(modes.graph, edge, site)
    chi = modes.chi[k, 2 * edge:2 * edge + 2]
    return complex(chi[own]), complex(chi[1 - own])


def _slot(graph: ValidatedGraph, edge: int, site: int) -> int:
    a, b, _ = graph.edges[edge]
    if site == a:
        return 0
    if site == b:
        return 1
    raise KeyError(f"site {site} not on edge {edge}")


def chart(graph: ValidatedGraph, gamma: float | None = None, initial: np.ndarray | None = None,
          modes: ModeSet | None = None) -> list[ChartEntry]:
    """All (mode, site, incident edge) entries, ordered by mode, site, edge."""
    modes = modes or build_modes(graph, gamma, initial)
    subs = enumerate_subsystems(graph)
    entries: list[ChartEntry] = []
    for k, pole in enumerate(modes.poles):
        rows = []
        for site in range(graph.N):
            for e in graph.incident(site):
                chi = chi_vector(modes, k, site, e)
                try:
                    u = u_vector(subs[e], modes.gamma, pole, site)
                    singular = False
                except ResonanceError:
                    u, singular = _NAN2, True
                inner = u[0] * chi[0] + u[1] * chi[1]
                rows.append((site, e, u, chi, inner, singular))
        finite = [z for r in rows if not r[5] for z in r[2]]
        phase = 1.0 + 0.0j
        if finite:
            big = max(finite, key=abs)
            if abs(big) > 0:
                phase = big / abs(big)
        for site, e, u, chi, inner, singular in rows:
            entries.append(ChartEntry(k, pole.lam, graph.ids[site], graph.edge_labels[e],
                                      u, chi, inner, phase, singular))
    return entries


def write_chart_csv(entries: list[ChartEntry], path_or_file) -> None:
    def cells(z: complex) -> list[str]:
        return [fmt_float(z.real), fmt_float(z.imag)]

    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CHART_COLUMNS)
        for en in entries:
            w.writerow([en.mode, fmt_float(en.lam), en.site, en.edge, *cells(en.u[0]), *cells(en.u[1]),
                        *cells(en.chi[0]), *cells(en.chi[1]), *cells(en.inner), *cells(en.phase)])
    finally:
        if own:
            fh.close()
