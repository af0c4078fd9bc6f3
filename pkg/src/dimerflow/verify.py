"""Randomised invariant suite comparing the decomposition with the direct solver."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .decomposition import Decomposition
from .efficiency import efficiency
from .errors import DimerflowError
from .graph import ValidatedGraph, random_connected_spec, serialize_graph, validate
from .modes import build_modes, reconstruct
from .spectral import propagate

T_MAX = 20.0
T_STEPS = 401
S_SAMPLES = 4
EFFICIENCY_GAMMA = 0.5

TOL = {
    "oracle": 1e-8,
    "junction": 1e-12,
    "matching": 1e-10,
    "leaf": 1e-12,
    "completeness": 1e-9,
    "efficiency_sum": 1e-10,
}


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    value: float
    tol: float
    detail: str = ""

    def line(self) -> str:
        status = "ok" if self.ok else "FAIL"
        text = f"{self.name:<15} {status:<4} {self.value:.3e} (tol {self.tol:.0e})"
        return f"{text}  {self.detail}" if self.detail else text


@dataclass
class GraphResult:
    index: int
    graph: ValidatedGraph
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)


@dataclass
class VerifyReport:
    seed: int
    results: list[GraphResult]
    elapsed: float

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    @property
    def failures(self) -> list[GraphResult]:
        return [r for r in self.results if not r.ok]

    def lines(self) -> list[str]:
        out = [f"seed={self.seed} graphs={len(self.results)}"]
        for r in self.results:
            g = r.graph
            out.append(f"graph {r.index}: N={g.N} M={g.M} {'ok' if r.ok else 'FAIL'}")
            out.extend("  " + c.line() for c in r.checks)
        for r in self.failures:
            out.append(f"offending graph {r.index} (seed {self.seed}):")
            out.append(serialize_graph(r.graph.spec).rstrip("\n"))
        out.append(f"{'PASS' if self.ok else 'FAIL'}: {len(self.results) - len(self.failures)}"
                   f"/{len(self.results)} graphs passed")
        return out


def corrupt_matrix(A: np.ndarray) -> None:
    """Negative-control hook: perturb one entry of the first row of every matrix."""
    A[:, 0, 0] += 0.1


def _sample_s(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.1, 2.0, n) + 1j * rng.uniform(-3.0, 3.0, n)


def check_graph(graph: ValidatedGraph, rng: np.random.Generator,
                tamper: Callable[[np.ndarray], None] | None = None) -> list[Check]:
    checks: list[Check] = []
    scale = max(1.0, float(np.linalg.norm(graph.initial)))
    dec = Decomposition(graph, tamper=tamper)

    s = _sample_s(rng, S_SAMPLES)
    f, amp = dec.flows_and_amplitudes(s)
    jsum = np.abs(np.einsum("nj,kj->kn", dec._junction, f))
    checks.append(Check("junction", bool(jsum.max() <= TOL["junction"] * scale), float(jsum.max()),
                        TOL["junction"]))

    worst, where = 0.0, ""
    for row, (S, sig, T, tau) in zip(dec.rows, dec._match):
        gap = float(np.max(np.abs(amp[:, S, sig] - amp[:, T, tau])))
        if gap > worst:
            worst = gap
            labels = [graph.edge_labels[e] for e in row.edges]
            where = f"worst row: site {graph.ids[row.site]}, edges {labels[0]} / {labels[1]}"
    checks.append(Check("matching", worst <= TOL["matching"] * scale, worst, TOL["matching"], where))

    leaves = [2 * e + dec.subsystems[e].slot_of(i)
              for i in range(graph.N) if graph.degree[i] == 1 for e in graph.incident(i)]
    leaf = float(np.max(np.abs(f[:, leaves]))) if leaves else 0.0
    checks.append(Check("leaf", leaf <= TOL["leaf"] * scale, leaf, TOL["leaf"],
                        f"{len(leaves)} leaf port(s)"))

    try:
        modes = build_modes(graph, check=False, tamper=tamper)
    except (DimerflowError, np.linalg.LinAlgError) as exc:
        checks.append(Check("modes", False, float("nan"), 0.0, str(exc)))
        return checks
    complete = float(np.max(np.abs(modes.C.sum(axis=1) - graph.initial)))
    checks.append(Check("completeness", complete <= TOL["completeness"] * scale, complete,
                        TOL["completeness"]))

    t = np.linspace(0.0, T_MAX, T_STEPS)
    dev = float(np.max(np.abs(reconstruct(graph, t, modes=modes) - propagate(graph, t))))
    checks.append(Check("oracle", dev <= TOL["oracle"] * scale, dev, TOL["oracle"]))

    try:
        m_gamma = build_modes(graph, EFFICIENCY_GAMMA, check=False, tamper=tamper)
        total = float(efficiency(graph, EFFICIENCY_GAMMA, modes=m_gamma).eta.sum())
        err = abs(total - 1.0)
        checks.append(Check("efficiency_sum", err <= TOL["efficiency_sum"], err, TOL["efficiency_sum"]))
    except DimerflowError as exc:
        checks.append(Check("efficiency_sum", False, float("nan"), 0.0, str(exc)))
    return checks


def run_verify(seed: int = 42, count: int = 50,
               tamper: Callable[[np.ndarray], None] | None = None) -> VerifyReport:
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    results = []
    for k in range(count):
        graph = validate(random_connected_spec(rng), decomposition=True)
        results.append(GraphResult(k, graph, check_graph(graph, rng, tamper)))
    return VerifyReport(seed, results, time.perf_counter() - start)
