"""Reference dynamics from a dense Hermitian eigendecomposition.

Everything the decomposition produces is checked against this module, so it
deliberately shares no code path with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .graph import ValidatedGraph

DEGENERACY_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns


@dataclass(frozen=True, eq=False)
class ModalTable:
    """``c_i(t) = sum_k C[i, k] exp(-i lambda_k t - gamma t / 2)``."""

    eigenvalues: np.ndarray
    coefficients: np.ndarray

    def clustered(self, scale: float) -> tuple[np.ndarray, np.ndarray]:
        """Merge degenerate columns; returns (cluster means, summed coefficients)."""
        groups = cluster_eigenvalues(self.eigenvalues, scale)
        lams = np.array([self.eigenvalues[g].mean() for g in groups])
        C = np.stack([self.coefficients[:, g].sum(axis=1) for g in groups], axis=1)
        return lams, C


def cluster_eigenvalues(lams: np.ndarray, scale: float, rtol: float = DEGENERACY_RTOL) -> list[list[int]]:
    """Group sorted eigenvalues whose neighbours lie within ``rtol * scale``."""
    order = np.argsort(lams, kind="stable")
    tol = rtol * max(scale, 1e-300)
    groups: list[list[int]] = []
    for k in order:
        if groups and lams[k] - lams[groups[-1][-1]] <= tol:
            groups[-1].append(int(k))
        else:
            groups.append([int(k)])
    return groups


def eigendecompose(graph: ValidatedGraph) -> Spectrum:
    H = graph.H
    try:
        lams, vecs = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    scale = max(np.linalg.norm(H, 2), 1.0)
    if not np.allclose(H @ vecs, vecs * lams, rtol=0, atol=1e-12 * scale):
        raise NumericalError("eigenpairs fail the residual check")
    if not np.allclose(vecs.T @ vecs, np.eye(graph.N), rtol=0, atol=1e-12):
        raise NumericalError("eigenvectors are not orthonormal")
    return Spectrum(lams, vecs)


def modal_coefficients(graph: ValidatedGraph, initial: np.ndarray | None = None,
                       spectrum: Spectrum | None = None) -> ModalTable:
    spectrum = spectrum or eigendecompose(graph)
    c0 = graph.initial if initial is None else np.asarray(initial, dtype=complex)
    V = spectrum.eigenvectors
    overlap = V.T @ c0
    return ModalTable(spectrum.eigenvalues, V * overlap[None, :])


def propagate(graph: ValidatedGraph, times, gamma: float | None = None,
              initial: np.ndarray | None = None) -> np.ndarray:
    """Amplitudes at ``times``, shape ``(len(times), N)``."""
    times = np.asarray(times, dtype=float)
    if not np.all(np.isfinite(times)) or np.any(times < 0):
        raise ValueError("times must be finite and non-negative")
    gamma = graph.gamma if gamma is None else gamma
    table = modal_coefficients(graph, initial)
    phase = np.exp(np.outer(times, -1j * table.eigenvalues) - 0.5 * gamma * times[:, None])
    out = phase @ table.coefficients.T
    # t = 0 is exact by construction
    c0 = graph.initial if initial is None else np.asarray(initial, dtype=complex)
    out[times == 0] = c0
    return out


def resolvent_amplitudes(graph: ValidatedGraph, s: complex, gamma: float | None = None,
                         initial: np.ndarray | None = None) -> np.ndarray:
    """Laplace-domain amplitudes ``(s + i H + gamma/2)^-1 c(0)``."""
    gamma = graph.gamma if gamma is None else gamma
    c0 = graph.initial if initial is None else np.asarray(initial, dtype=complex)
    A = (s + 0.5 * gamma) * np.eye(graph.N) + 1j * graph.H
    return np.linalg.solve(A, c0)


def oracle_efficiency(graph: ValidatedGraph, gamma: float | None = None,
                      initial: np.ndarray | None = None) -> np.ndarray:
    """Trapping efficiency per site from the modal table.

    Uses the closed-form time integral of ``|c_i(t)|^2`` over all mode
    pairs, normalised by the initial norm so that the sites sum to one.
    """
    gamma = graph.gamma if gamma is None else gamma
    if not gamma > 0:
        raise ValueError("efficiency needs gamma > 0")
    table = modal_coefficients(graph, initial)
    lams = table.eigenvalues.copy()
    for group in cluster_eigenvalues(lams, graph.norm):
        lams[group] = lams[group].mean()
    C = table.coefficients
    kernel = gamma / (gamma - 1j * (lams[:, None] - lams[None, :]))
    eta = np.einsum("im,mn,in->i", C.conj(), kernel, C).real
    return eta / np.vdot(C.sum(axis=1), C.sum(axis=1)).real
