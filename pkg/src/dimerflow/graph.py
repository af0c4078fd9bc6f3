"""Weighted graphs: data model, parsing, validation and generators."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import GraphError


@dataclass(frozen=True)
class Site:
    id: int
    energy: float = 0.0


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    J: float
    label: str | None = None


@dataclass(frozen=True)
class GraphSpec:
    sites: tuple[Site, ...]
    edges: tuple[Edge, ...]
    gamma: float = 0.0
    initial: Mapping[int, complex] = field(default_factory=dict)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ValidatedGraph:
    """A checked graph with dense indexing by sorted site id.

    ``edges`` holds ``(i, j, J)`` with dense indices, in file order; the
    edge index doubles as the subsystem id.
    """

    spec: GraphSpec
    ids: tuple[int, ...]
    energies: np.ndarray
    edges: tuple[tuple[int, int, float], ...]
    edge_labels: tuple[str, ...]
    degree: np.ndarray
    H: np.ndarray
    initial: np.ndarray
    gamma: float

    @property
    def N(self) -> int:
        return len(self.ids)

    @property
    def M(self) -> int:
        return len(self.edges)

    @property
    def isolated(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.degree == 0))

    @property
    def norm(self) -> float:
        """Spectral norm of H (at least a tiny positive number)."""
        if self.N == 0:
            return 0.0
        return max(float(np.max(np.abs(np.linalg.eigvalsh(self.H)))), 1e-300)

    def index(self, site_id: int) -> int:
        try:
            return self.ids.index(site_id)
        except ValueError:
            raise GraphError(f"unknown site id {site_id}") from None

    def incident(self, i: int) -> list[int]:
        """Edge indices touching dense site ``i``, in edge order."""
        return [e for e, (a, b, _) in enumerate(self.edges) if i in (a, b)]

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.N)]
        for a, b, _ in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj


# --------------------------------------------------------------------- parsing

_TOP_KEYS = {"sites", "edges", "gamma", "initial"}
_SITE_KEYS = {"id", "energy"}
_EDGE_KEYS = {"a", "b", "J", "label"}


def _real(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise GraphError(f"expected a number, got {value!r}", where)
    x = float(value)
    if not math.isfinite(x):
        raise GraphError("value must be finite", where)
    return x


def _int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise GraphError(f"expected an integer, got {value!r}", where)
    return value


def _check_keys(obj: Any, allowed: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise GraphError("expected an object", where)
    if "gamma" in obj and allowed is _SITE_KEYS:
        raise GraphError("per-site decoherence is not supported; use the top-level gamma", where)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise GraphError(f"unknown field(s) {', '.join(unknown)}", where)
    return obj


def spec_from_dict(doc: Any) -> GraphSpec:
    doc = _check_keys(doc, _TOP_KEYS, "<root>")
    if "sites" not in doc:
        raise GraphError("missing 'sites'", "<root>")
    if not isinstance(doc["sites"], list):
        raise GraphError("expected an array", "sites")
    if not isinstance(doc.get("edges", []), list):
        raise GraphError("expected an array", "edges")

    sites = []
    for k, raw in enumerate(doc["sites"]):
        where = f"sites[{k}]"
        raw = _check_keys(raw, _SITE_KEYS, where)
        for key in ("id", "energy"):
            if key not in raw:
                raise GraphError(f"missing '{key}'", where)
        sites.append(Site(_int(raw["id"], f"{where}.id"), _real(raw["energy"], f"{where}.energy")))

    edges = []
    for k, raw in enumerate(doc.get("edges", [])):
        where = f"edges[{k}]"
        raw = _check_keys(raw, _EDGE_KEYS, where)
        for key in ("a", "b", "J"):
            if key not in raw:
                raise GraphError(f"missing '{key}'", where)
        label = raw.get("label")
        if label is not None and not isinstance(label, str):
            raise GraphError("label must be a string", f"{where}.label")
        edges.append(Edge(_int(raw["a"], f"{where}.a"), _int(raw["b"], f"{where}.b"),
                          _real(raw["J"], f"{where}.J"), label))

    gamma = _real(doc.get("gamma", 0.0), "gamma")
    if gamma < 0:
        raise GraphError("gamma must be >= 0", "gamma")

    initial: dict[int, complex] = {}
    raw_init = doc.get("initial")
    if raw_init is not None:
        if not isinstance(raw_init, dict):
            raise GraphError("expected an object mapping site id to [re, im]", "initial")
        for key, val in raw_init.items():
            where = f"initial[{key!r}]"
            try:
                sid = int(key)
            except (TypeError, ValueError):
                raise GraphError("site id key must be an integer", where) from None
            if not isinstance(val, list) or len(val) != 2:
                raise GraphError("expected [re, im]", where)
            initial[sid] = complex(_real(val[0], where + "[0]"), _real(val[1], where + "[1]"))
    elif sites:
        initial = {min(s.id for s in sites): 1.0 + 0.0j}

    return GraphSpec(tuple(sites), tuple(edges), gamma, initial)


def parse_graph(text: str) -> GraphSpec:
    """Parse a JSON graph document (schema in the README)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"malformed document: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from None
    return spec_from_dict(doc)


def load_graph(path: str) -> GraphSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())


# ----------------------------------------------------------------- serializing

def fmt_float(x: float) -> str:
    """17 significant digits, fixed layout."""
    return format(float(x), ".16e")


def serialize_graph(spec: GraphSpec) -> str:
    """Byte-stable JSON: sorted keys, floats with 17 significant digits."""
    sites = [f'    {{"energy": {fmt_float(s.energy)}, "id": {s.id}}}' for s in spec.sites]
    edges = []
    for e in spec.edges:
        label = "" if e.label is None else f', "label": {json.dumps(e.label)}'
        edges.append(f'    {{"J": {fmt_float(e.J)}, "a": {e.a}, "b": {e.b}{label}}}')
    init = [f'    "{k}": [{fmt_float(v.real)}, {fmt_float(v.imag)}]'
            for k, v in sorted(spec.initial.items())]

    def block(items: list[str], open_: str, close: str) -> str:
        if not items:
            return open_ + close
        return open_ + "\n" + ",\n".join(items) + "\n  " + close

    return (
        "{\n"
        f'  "edges": {block(edges, "[", "]")},\n'
        f'  "gamma": {fmt_float(spec.gamma)},\n'
        f'  "initial": {block(init, "{", "}")},\n'
        f'  "sites": {block(sites, "[", "]")}\n'
        "}\n"
    )


# ------------------------------------------------------------------ validation

def validate(spec: GraphSpec, decomposition: bool = False) -> ValidatedGraph:
    """Check invariants and build the dense model.

    With ``decomposition=True`` a graph mixing edges and degree-0 sites is
    rejected, since isolated sites have no subsystem to live in.
    """
    ids = [s.id for s in spec.sites]
    if not ids:
        raise GraphError("graph has no sites", "sites")
    seen: set[int] = set()
    for k, sid in enumerate(ids):
        if sid in seen:
            raise GraphError(f"duplicate site id {sid}", f"sites[{k}]")
        seen.add(sid)
    order = sorted(ids)
    pos = {sid: n for n, sid in enumerate(order)}
    energy = {s.id: s.energy for s in spec.sites}

    edges: list[tuple[int, int, float]] = []
    labels: list[str] = []
    pairs: set[frozenset[int]] = set()
    for k, e in enumerate(spec.edges):
        where = f"edges[{k}]"
        for end in (e.a, e.b):
            if end not in pos:
                raise GraphError(f"endpoint {end} is not a site", where)
        if e.a == e.b:
            raise GraphError(f"self-loop on site {e.a}", where)
        key = frozenset((e.a, e.b))
        if key in pairs:
            raise GraphError(f"duplicate edge ({e.a}, {e.b})", where)
        pairs.add(key)
        if not math.isfinite(e.J):
            raise GraphError("coupling must be finite", where + ".J")
        edges.append((pos[e.a], pos[e.b], float(e.J)))
        labels.append(e.label if e.label is not None else str(k))
    if len(set(labels)) != len(labels):
        raise GraphError("edge labels must be unique", "edges")

    if not (math.isfinite(spec.gamma) and spec.gamma >= 0):
        raise GraphError("gamma must be finite and >= 0", "gamma")

    n = len(order)
    c0 = np.zeros(n, dtype=complex)
    for sid, amp in (spec.initial or {order[0]: 1.0}).items():
        if sid not in pos:
            raise GraphError(f"initial amplitude on unknown site {sid}", "initial")
        amp = complex(amp)
        if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
            raise GraphError("initial amplitude must be finite", f"initial[{sid}]")
        c0[pos[sid]] = amp
    if not np.linalg.norm(c0) > 0:
        raise GraphError("initial state has zero norm", "initial")

    degree = np.zeros(n, dtype=int)
    H = np.diag([energy[sid] for sid in order]).astype(float)
    for a, b, J in edges:
        degree[a] += 1
        degree[b] += 1
        H[a, b] = H[b, a] = J

    if decomposition and edges and np.any(degree == 0):
        bad = [order[i] for i in np.flatnonzero(degree == 0)]
        raise GraphError(f"isolated site(s) {bad} cannot be decomposed", "sites")

    return ValidatedGraph(
        spec=spec,
        ids=tuple(order),
        energies=_readonly(np.array([energy[sid] for sid in order], dtype=float)),
        edges=tuple(edges),
        edge_labels=tuple(labels),
        degree=_readonly(degree),
        H=_readonly(H),
        initial=_readonly(c0),
        gamma=float(spec.gamma),
    )


def with_overrides(graph: ValidatedGraph, gamma: float | None = None,
                   initial: np.ndarray | None = None) -> ValidatedGraph:
    """Re-validate ``graph`` with a different gamma and/or initial vector."""
    spec = graph.spec
    if gamma is not None:
        spec = GraphSpec(spec.sites, spec.edges, float(gamma), spec.initial)
    if initial is not None:
        vec = np.asarray(initial, dtype=complex)
        if vec.shape != (graph.N,):
            raise GraphError(f"initial vector must have length {graph.N}", "initial")
        amps = {sid: complex(v) for sid, v in zip(graph.ids, vec) if v != 0}
        spec = GraphSpec(spec.sites, spec.edges, spec.gamma, amps)
    return validate(spec)


# -------------------------------------------------------------------- builtins

def _uniform_sites(n: int, energy: float = 0.0) -> tuple[Site, ...]:
    return tuple(Site(i, energy) for i in range(1, n + 1))


def _int_param(params: Mapping[str, float], key: str, default: int, least: int, name: str) -> int:
    value = params.get(key, default)
    if float(value) != int(value) or int(value) < least:
        raise GraphError(f"{name} needs integer {key} >= {least}, got {value}")
    return int(value)


def builtin(name: str, **params: float) -> GraphSpec:
    """Canonical graph families.

    ``diamond`` takes ``J`` and optional per-edge ``J_a`` .. ``J_e``;
    ``trimer`` takes ``beta``, ``alpha`` and ``J`` with
    ``J_a = (1+beta) J``, ``J_b = alpha J``, ``J_c = (1-beta) J``;
    ``path``, ``cycle``, ``star`` and ``complete`` take ``n`` and ``J``.
    Every family accepts ``gamma`` and ``energy`` (uniform site energy).
    The initial state is unit amplitude on site 1.
    """
    gamma = float(params.pop("gamma", 0.0))
    energy = float(params.pop("energy", 0.0))
    if gamma < 0:
        raise GraphError("gamma must be >= 0")
    J = float(params.get("J", 1.0))
    known = {"J"}

    if name == "diamond":
        known |= {f"J_{k}" for k in "abcde"}
        pairs = {"a": (1, 2), "b": (2, 3), "c": (3, 4), "d": (4, 1), "e": (2, 4)}
        edges = tuple(Edge(a, b, float(params.get(f"J_{k}", J)), k) for k, (a, b) in pairs.items())
        sites = _uniform_sites(4, energy)
    elif name == "trimer":
        known |= {"beta", "alpha"}
        p = TrimerParams(float(params.get("beta", 0.0)), float(params.get("alpha", 1.0)), J)
        edges = p.spec().edges
        sites = _uniform_sites(3, energy)
    elif name in ("path", "cycle", "star", "complete"):
        known |= {"n"}
        least = {"path": 2, "cycle": 3, "star": 2, "complete": 2}[name]
        n = _int_param(params, "n", max(least, 3 if name != "path" else 2), least, name)
        if name == "path":
            pairs_list = [(k, k + 1) for k in range(1, n)]
        elif name == "cycle":
            pairs_list = [(k, k % n + 1) for k in range(1, n + 1)]
        elif name == "star":
            pairs_list = [(1, k) for k in range(2, n + 1)]
        else:
            pairs_list = [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1)]
        edges = tuple(Edge(a, b, J) for a, b in pairs_list)
        sites = _uniform_sites(n, energy)
    else:
        raise GraphError(f"unknown builtin graph {name!r}")

    extra = sorted(set(params) - known)
    if extra:
        raise GraphError(f"unknown parameter(s) for {name}: {', '.join(extra)}")
    return GraphSpec(sites, edges, gamma, {1: 1.0 + 0.0j})


BUILTINS = ("diamond", "trimer", "path", "cycle", "star", "complete")


@dataclass(frozen=True)
class TrimerParams:
    """Source-trap-trap triangle: ``J_a = (1+beta) J``, ``J_b = alpha J``, ``J_c = (1-beta) J``."""

    beta: float
    alpha: float
    J: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("beta", "alpha", "J", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise GraphError(f"{name} must be finite")
        if self.gamma < 0:
            raise GraphError("gamma must be >= 0")

    @property
    def Ja(self) -> float:
        return (1.0 + self.beta) * self.J

    @property
    def Jb(self) -> float:
        return self.alpha * self.J

    @property
    def Jc(self) -> float:
        return (1.0 - self.beta) * self.J

    def spec(self, energy: float = 0.0) -> GraphSpec:
        edges = (Edge(1, 2, self.Ja, "a"), Edge(2, 3, self.Jb, "b"), Edge(3, 1, self.Jc, "c"))
        return GraphSpec(_uniform_sites(3, energy), edges, self.gamma, {1: 1.0 + 0.0j})


# ---------------------------------------------------------------- random graphs

def random_connected_spec(rng: np.random.Generator, n_min: int = 2, n_max: int = 8,
                          p: float = 0.5, J_range=(0.2, 2.0), eps_range=(-1.0, 1.0),
                          complex_initial: bool = True) -> GraphSpec:
    """Erdos-Renyi G(n, p) conditioned on connectedness by rejection."""
    n = int(rng.integers(n_min, n_max + 1))
    while True:
        pairs = [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1) if rng.random() < p]
        if _connected(n, pairs):
            break
    sites = tuple(Site(k, float(rng.uniform(*eps_range))) for k in range(1, n + 1))
    edges = tuple(Edge(a, b, float(rng.uniform(*J_range))) for a, b in pairs)
    if complex_initial:
        vec = rng.normal(size=n) + 1j * rng.normal(size=n)
        vec /= np.linalg.norm(vec)
        initial = {k + 1: complex(v) for k, v in enumerate(vec)}
    else:
        initial = {int(rng.integers(1, n + 1)): 1.0 + 0.0j}
    return GraphSpec(sites, edges, 0.0, initial)


def _connected(n: int, pairs: list[tuple[int, int]]) -> bool:
    adj: dict[int, set[int]] = {k: set() for k in range(1, n + 1)}
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {1}, [1]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == n
