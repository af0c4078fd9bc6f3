"""Trapping efficiency from modal data, trimer closed forms and sweeps.

With uniform trapping rate ``gamma`` every amplitude decays as
``exp(-gamma t / 2)`` and the efficiency of site ``i`` is
``gamma * integral |c_i|^2 dt`` over the initial norm.  Written over
modes it splits into a non-interfering part ``sum_m |C_m|^2`` and an
interfering part from mode pairs, damped by ``1 + ((l_m - l_n)/gamma)^2``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumError, GraphError
from .graph import TrimerParams, ValidatedGraph, fmt_float, validate
from .modes import ModeSet, build_modes
from .spectral import modal_coefficients

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("beta", "alpha", "eta2", "noninterf", "interf", "c2m1_sq", "c2m2_sq", "c2m3_sq")
TRIMER_GAP_RTOL = 1e-9

__all__ = ["EfficiencyReport", "SweepGrid", "TrimerModes", "TrimerParams", "efficiency",
           "split_efficiency", "sweep", "trimer_efficiency", "trimer_modes", "write_sweep_csv"]


@dataclass(frozen=True, eq=False)
class EfficiencyReport:
    gamma: float
    site_ids: tuple[int, ...]
    lambdas: np.ndarray  # per mode (degenerate modes merged)
    coefficients: np.ndarray  # (N, K), normalised initial state
    eta: np.ndarray
    noninterfering: np.ndarray
    interfering: np.ndarray
    partial: np.ndarray  # (N, K): |C_i^(m)|^2

    def site(self, site_id: int) -> float:
        return float(self.eta[self.site_ids.index(site_id)])


def split_efficiency(lambdas, C, gamma: float):
    """Non-interfering part, interfering part and per-mode ``|C|^2``.

    ``lambdas`` is ``(..., K)``, ``C`` is ``(..., N, K)`` or ``(..., K)``
    and already merged over degenerate modes.  For complex coefficients
    the pair term keeps the ``Im`` contribution of the exact time
    integral; it vanishes for real coefficients.
    """
    if not gamma > 0:
        raise ValueError("efficiency needs gamma > 0")
    lam = np.asarray(lambdas, dtype=float)
    C = np.asarray(C)
    if C.ndim == lam.ndim + 1:
        lam = lam[..., None, :]
    partial = np.abs(C) ** 2
    x = (lam[..., :, None] - lam[..., None, :]) / gamma
    cross = np.conj(C)[..., :, None] * C[..., None, :]
    pair = (cross.real - x * cross.imag) / (1.0 + x * x)
    K = C.shape[-1]
    upper = np.triu(np.ones((K, K), dtype=bool), 1)
    interf = 2.0 * np.sum(np.where(upper, pair, 0.0), axis=(-2, -1))
    return partial.sum(axis=-1), interf, partial


def _merge(lams: np.ndarray, C: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray]:
    from .spectral import cluster_eigenvalues

    groups = cluster_eigenvalues(lams, scale)
    return (np.array([lams[g].mean() for g in groups]),
            np.stack([C[:, g].sum(axis=1) for g in groups], axis=1))


def efficiency(graph: ValidatedGraph, gamma: float | None = None, initial: np.ndarray | None = None,
               method: str = "modes", modes: ModeSet | None = None) -> EfficiencyReport:
    """Efficiency per site; ``method`` is ``"modes"`` (decomposition) or ``"oracle"``."""
    gamma = graph.gamma if gamma is None else float(gamma)
    if not gamma > 0:
        raise ValueError("efficiency needs gamma > 0")
    c0 = graph.initial if initial is None else np.asarray(initial, dtype=complex)
    norm = float(np.linalg.norm(c0))
    if method == "modes":
        modes = modes or build_modes(graph, gamma, c0)
        lams, C = modes.lambdas, modes.C
    elif method == "oracle":
        table = modal_coefficients(graph, c0)
        lams, C = _merge(table.eigenvalues, table.coefficients, graph.norm)
    else:
        raise ValueError(f"unknown method {method!r}")
    C = C / norm
    non, inter, partial = split_efficiency(lams, C, gamma)
    return EfficiencyReport(gamma, graph.ids, lams, C, non + inter, non, inter, partial)


# ---------------------------------------------------------------------- trimer

@dataclass(frozen=True, eq=False)
class TrimerModes:
    """Closed-form modal data of the trimer with the excitation on site 1.

    ``lambdas`` are Hamiltonian eigenvalues (amplitudes evolve as
    ``exp(-i lambda t)``), in the order ``2k cos(t/3)``,
    ``-2k cos((t-pi)/3)``, ``-2k cos((t+pi)/3)``.  ``C[i, m]`` are site
    coefficients, ``flows[r, m]`` the residues of the three loop flows
    ``f_1 = f_1^(a)``, ``f_2 = f_2^(b)``, ``f_3 = f_3^(c)``.  When
    ``degenerate`` is set the data come from the contour path and the
    mode axis holds merged modes instead.
    """

    params: TrimerParams
    lambdas: np.ndarray
    kappa: float
    theta: float
    C: np.ndarray
    flows: np.ndarray
    degenerate: bool = False


def _closed_form(Ja, Jb, Jc):
    """Vectorised trimer spectrum and coefficients; returns a dict of arrays."""
    Ja, Jb, Jc = (np.asarray(x, dtype=float) for x in (Ja, Jb, Jc))
    kappa = np.sqrt((Ja**2 + Jb**2 + Jc**2) / 3.0)
    prod = Ja * Jb * Jc
    theta = np.arctan2(np.sqrt(np.maximum(kappa**6 - prod**2, 0.0)), prod)
    lam = 2.0 * kappa[..., None] * np.stack(
        [np.cos(theta / 3), -np.cos((theta - np.pi) / 3), -np.cos((theta + np.pi) / 3)], axis=-1)
    l1 = lam
    l2 = np.roll(lam, -1, axis=-1)
    l3 = np.roll(lam, -2, axis=-1)
    den = (l1 - l2) * (l1 - l3)
    gap = np.min(np.abs(l1 - l2), axis=-1)
    degenerate = ~(gap > TRIMER_GAP_RTOL * kappa)
    safe = np.where(degenerate[..., None], 1.0, den)
    a, b, c = Ja[..., None], Jb[..., None], Jc[..., None]
    C = np.stack([(lam**2 - b**2) / safe, (a * lam + b * c) / safe, (c * lam + a * b) / safe], axis=-2)
    flows = np.stack([
        0.5j * (a**2 - c**2) * lam / safe,
        -0.5j * (a * (lam**2 - 2 * b**2) - b * c * lam) / safe,
        0.5j * (c * (lam**2 - 2 * b**2) - a * b * lam) / safe,
    ], axis=-2)
    return dict(kappa=kappa, theta=theta, lam=lam, C=C, flows=flows, degenerate=degenerate)


def trimer_modes(p: TrimerParams, allow_fallback: bool = True) -> TrimerModes:
    if p.Ja == 0 and p.Jb == 0 and p.Jc == 0:
        raise GraphError("trimer couplings are all zero")
    cf = _closed_form(p.Ja, p.Jb, p.Jc)
    kappa, theta = float(cf["kappa"]), float(cf["theta"])
    if not cf["degenerate"]:
        return TrimerModes(p, cf["lam"], kappa, theta, cf["C"], cf["flows"])
    if not allow_fallback:
        raise DegenerateSpectrumError(
            f"trimer spectrum is degenerate at beta={p.beta}, alpha={p.alpha}")
    modes = build_modes(validate(p.spec()), p.gamma)
    flows = np.stack([modes.chi[:, 0], modes.chi[:, 2], modes.chi[:, 4]])
    return TrimerModes(p, modes.lambdas, kappa, theta, modes.C, flows, degenerate=True)


def trimer_efficiency(p: TrimerParams) -> EfficiencyReport:
    """Efficiencies of the trimer from the closed forms (contour path if degenerate)."""
    tm = trimer_modes(p)
    non, inter, partial = split_efficiency(tm.lambdas, tm.C, p.gamma)
    report = EfficiencyReport(p.gamma, (1, 2, 3), tm.lambdas, tm.C, non + inter, non, inter, partial)
    if tm.degenerate:
        _note_symmetric(p, float(report.eta[1]))
    return report


def _note_symmetric(p: TrimerParams, eta2: float) -> None:
    if math.isclose(abs(p.Ja), abs(p.Jb)) and math.isclose(abs(p.Jb), abs(p.Jc)):
        log.warning(
            "symmetric trimer (beta=%g, alpha=%g, gamma=%g): eta_2 = %.9f from the modal sum "
            "(gamma -> 0 limit 2/9); an equal three-way split (1/3) does not hold",
            p.beta, p.alpha, p.gamma, eta2)


# ----------------------------------------------------------------------- sweep

@dataclass(frozen=True, eq=False)
class SweepGrid:
    betas: np.ndarray
    alphas: np.ndarray
    gamma: float
    J: float
    eta2: np.ndarray  # (nb, na)
    noninterfering: np.ndarray
    interfering: np.ndarray
    partial: np.ndarray  # (nb, na, 3)
    degenerate: np.ndarray  # (nb, na) bool

    def argmax(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.eta2)), self.eta2.shape)
        return float(self.betas[i]), float(self.alphas[j])


def sweep(beta_range=(-2.0, 2.0), alpha_range=(0.0, 2.0), resolution=(201, 201),
          gamma: float = 0.01, J: float = 1.0) -> SweepGrid:
    """``eta_2`` over a (beta, alpha) grid; degenerate cells use the contour path."""
    nb, na = resolution
    if nb < 2 or na < 2:
        raise ValueError("resolution must be at least 2 per axis")
    if not gamma > 0:
        raise ValueError("sweep needs gamma > 0")
    betas = np.linspace(*beta_range, nb)
    alphas = np.linspace(*alpha_range, na)
    bb, aa = np.meshgrid(betas, alphas, indexing="ij")
    cf = _closed_form((1 + bb) * J, aa * J, (1 - bb) * J)
    C2 = cf["C"][..., 1, :]
    non, inter, partial = split_efficiency(cf["lam"], C2, gamma)
    degenerate = cf["degenerate"]
    for i, j in np.argwhere(degenerate):
        p = TrimerParams(float(betas[i]), float(alphas[j]), J, gamma)
        tm = trimer_modes(p)
        n_, i_, part = split_efficiency(tm.lambdas, tm.C[1], gamma)
        non[i, j], inter[i, j] = n_, i_
        partial[i, j] = _spread(cf["lam"][i, j], tm.lambdas, part)
        _note_symmetric(p, float(n_ + i_))
    return SweepGrid(betas, alphas, gamma, J, non + inter, non, inter, partial, degenerate)


def _spread(slots: np.ndarray, merged: np.ndarray, part: np.ndarray) -> np.ndarray:
    """Put merged-mode contributions on the first closed-form slot of each cluster."""
    out = np.zeros(len(slots))
    for lam, value in zip(merged, part):
        k = int(np.argmin(np.abs(slots - lam)))
        out[k] += value
    return out


def write_sweep_csv(grid: SweepGrid, path_or_file) -> None:
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for i, b in enumerate(grid.betas):
            for j, a in enumerate(grid.alphas):
                w.writerow([fmt_float(b), fmt_float(a), fmt_float(grid.eta2[i, j]),
                            fmt_float(grid.noninterfering[i, j]), fmt_float(grid.interfering[i, j]),
                            *(fmt_float(v) for v in grid.partial[i, j])])
    finally:
        if own:
            fh.close()
