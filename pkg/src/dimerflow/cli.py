"""Command-line front end: ``dimerflow <command> [graph source] [options]``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from typing import Sequence

import numpy as np

from .decomposition import Decomposition
from .efficiency import efficiency, sweep, trimer_efficiency, write_sweep_csv
from .errors import DimerflowError, GraphError
from .flowcharts import CHART_COLUMNS, chart
from .graph import BUILTINS, TrimerParams, ValidatedGraph, builtin, fmt_float, load_graph, validate, with_overrides
from .modes import build_modes, reconstruct
from .spectral import propagate
from .verify import corrupt_matrix, run_verify

log = logging.getLogger("dimerflow")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class UsageError(GraphError):
    pass


# --------------------------------------------------------------------- tables

class Table:
    """Header plus rows of cells (float, int, str or bool)."""

    def __init__(self, columns: Sequence[str]):
        self.columns = tuple(columns)
        self.rows: list[tuple] = []

    def add(self, *cells) -> None:
        if len(cells) != len(self.columns):
            raise AssertionError("row width mismatch")
        self.rows.append(cells)

    def render(self, fmt: str) -> str:
        return self._csv() if fmt == "csv" else self._json()

    def _csv(self) -> str:
        out = [",".join(self.columns)]
        out.extend(",".join(_csv_cell(c) for c in row) for row in self.rows)
        return "\n".join(out) + "\n"

    def _json(self) -> str:
        items = []
        for row in self.rows:
            pairs = ", ".join(f"{json.dumps(k)}: {_json_cell(v)}" for k, v in zip(self.columns, row))
            items.append("  {" + pairs + "}")
        return "[\n" + ",\n".join(items) + "\n]\n" if items else "[]\n"


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return fmt_float(v)
    if isinstance(v, bool):
        return "1" if v else "0"
    return str(v)


def _json_cell(v) -> str:
    if isinstance(v, float):
        return fmt_float(v) if math.isfinite(v) else "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return json.dumps(str(v))


# -------------------------------------------------------------------- parsing

def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _grid(text: str) -> tuple[int, int]:
    try:
        nb, na = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 201x201, got {text!r}") from None
    if nb < 2 or na < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points per axis")
    return nb, na


def _keyval(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {key!r} is not a number") from None


def _graph_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("graph source")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--graph", metavar="PATH", help="graph file (JSON)")
    src.add_argument("--builtin", choices=BUILTINS, help="built-in graph family")
    g.add_argument("--beta", type=float, help="trimer asymmetry")
    g.add_argument("--alpha", type=float, help="trimer trap-trap coupling")
    g.add_argument("--J", type=float, help="coupling scale")
    g.add_argument("--n", type=int, help="size of path/cycle/star/complete")
    g.add_argument("--set", action="append", type=_keyval, default=[], metavar="KEY=VAL",
                   help="extra builtin parameter, e.g. J_e=0.5")
    g.add_argument("--gamma", type=float, help="override the trapping rate")


def _out_args(p: argparse.ArgumentParser, formats: bool = True) -> None:
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    if formats:
        p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dimerflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="graph and matching-system summary")
    _graph_args(p)
    p.add_argument("--s", type=_complex, help="probe point (default 1 + |H|)")

    p = sub.add_parser("evolve", help="amplitudes from both solvers")
    _graph_args(p)
    p.add_argument("--tmax", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=1001, help="number of time points")
    _out_args(p)

    for name, text in (("poles", "poles and their multiplicities"),
                       ("chart", "u/chi vector chart"),
                       ("efficiency", "trapping efficiency per site")):
        p = sub.add_parser(name, help=text)
        _graph_args(p)
        _out_args(p)

    p = sub.add_parser("flows", help="flow functions at sample points")
    _graph_args(p)
    p.add_argument("--s", type=_complex, action="append", help="sample point, repeatable")
    _out_args(p)

    p = sub.add_parser("sweep", help="trimer efficiency over (beta, alpha)")
    p.add_argument("--grid", type=_grid, default=(201, 201), metavar="NBxNA")
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--beta-range", type=float, nargs=2, default=(-2.0, 2.0), metavar=("LO", "HI"))
    p.add_argument("--alpha-range", type=float, nargs=2, default=(0.0, 2.0), metavar=("LO", "HI"))
    _out_args(p, formats=False)

    p = sub.add_parser("verify", help="randomised invariant suite")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    _out_args(p, formats=False)
    return parser


# -------------------------------------------------------------------- helpers

def load(args: argparse.Namespace) -> ValidatedGraph:
    params: dict[str, float] = {}
    for key in ("beta", "alpha", "J", "n"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    params.update(dict(args.set))
    if args.graph:
        if params:
            raise UsageError(f"--{next(iter(params))} only applies to --builtin")
        spec = load_graph(args.graph)
    elif args.builtin:
        spec = builtin(args.builtin, **params)
    else:
        raise UsageError("one of --graph or --builtin is required")
    graph = validate(spec, decomposition=True)
    if args.gamma is not None:
        if args.gamma < 0:
            raise UsageError("--gamma must be >= 0")
        graph = validate(with_overrides(graph, gamma=args.gamma).spec, decomposition=True)
    return graph


def emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ------------------------------------------------------------------- commands

def cmd_info(args) -> int:
    graph = load(args)
    s = args.s if args.s is not None else complex(1.0 + graph.norm)
    system = Decomposition(graph).system(s)
    A = system.matrix
    nnz = np.count_nonzero(A, axis=1)
    nm = system.n_matching
    lines = [
        f"N={graph.N} M={graph.M} rows={A.shape[0]} ({nm} matching + {system.n_junction} junction)",
        "degrees: " + " ".join(f"{sid}:{int(d)}" for sid, d in zip(graph.ids, graph.degree)),
        f"gamma={graph.gamma:g} |H|={graph.norm:.6g}",
        f"probe s={s:g}: max nonzeros matching={int(nnz[:nm].max()) if nm else 0} "
        f"junction={int(nnz[nm:].max())} cond={np.linalg.cond(A):.3e}",
    ]
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_evolve(args) -> int:
    if not args.tmax > 0:
        raise UsageError("--tmax must be > 0")
    if args.steps < 2:
        raise UsageError("--steps must be >= 2")
    graph = load(args)
    t = np.linspace(0.0, args.tmax, args.steps)
    direct = propagate(graph, t)
    modal = reconstruct(graph, t)
    dev = np.max(np.abs(direct - modal), axis=1)
    norm = np.sum(np.abs(direct) ** 2, axis=1)
    cols = ["t"]
    for sid in graph.ids:
        cols += [f"oracle_{sid}_re", f"oracle_{sid}_im", f"modes_{sid}_re", f"modes_{sid}_im"]
    table = Table(cols + ["deviation", "norm"])
    for k in range(len(t)):
        cells: list = [float(t[k])]
        for i in range(graph.N):
            cells += [float(direct[k, i].real), float(direct[k, i].imag),
                      float(modal[k, i].real), float(modal[k, i].imag)]
        table.add(*cells, float(dev[k]), float(norm[k]))
    emit(table.render(args.format), args.out)
    log.info("max deviation %.3e", dev.max())
    return EXIT_OK


def cmd_poles(args) -> int:
    graph = load(args)
    modes = build_modes(graph)
    table = Table(("index", "lambda", "s_re", "s_im", "multiplicity", "local_singular", "probe_ratio"))
    for k, p in enumerate(modes.poles):
        labels = ";".join(graph.edge_labels[e] for e in p.local_singular)
        table.add(k, float(p.lam), float(p.s.real), float(p.s.imag), p.multiplicity, labels,
                  float(p.probe_ratio))
    emit(table.render(args.format), args.out)
    return EXIT_OK


def cmd_flows(args) -> int:
    graph = load(args)
    points = args.s or [complex(1.0)]
    dec = Decomposition(graph)
    table = Table(("s_re", "s_im", "edge", "site", "f_re", "f_im"))
    for s in points:
        f = dec.solve(s)
        for k, (e, site) in enumerate(dec.slots):
            table.add(float(s.real), float(s.imag), graph.edge_labels[e], graph.ids[site],
                      float(f[k].real), float(f[k].imag))
    emit(table.render(args.format), args.out)
    return EXIT_OK


def cmd_chart(args) -> int:
    graph = load(args)
    table = Table(CHART_COLUMNS)
    for en in chart(graph):
        cells: list = [en.mode, float(en.lam), en.site, en.edge]
        for z in (*en.u, *en.chi, en.inner, en.phase):
            cells += [float(z.real), float(z.imag)]
        table.add(*cells)
    emit(table.render(args.format), args.out)
    return EXIT_OK


def cmd_efficiency(args) -> int:
    graph = load(args)
    if not graph.gamma > 0:
        raise UsageError("efficiency needs gamma > 0 (use --gamma)")
    if args.builtin == "trimer" and not dict(args.set):
        p = TrimerParams(args.beta if args.beta is not None else 0.0,
                         args.alpha if args.alpha is not None else 1.0,
                         args.J if args.J is not None else 1.0, graph.gamma)
        rep = trimer_efficiency(p)
    else:
        rep = efficiency(graph)
    ref = efficiency(graph, method="oracle")
    table = Table(("site", "eta", "noninterf", "interf", "eta_oracle"))
    for i, sid in enumerate(rep.site_ids):
        table.add(sid, float(rep.eta[i]), float(rep.noninterfering[i]), float(rep.interfering[i]),
                  float(ref.eta[i]))
    emit(table.render(args.format), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.gamma > 0:
        raise UsageError("--gamma must be > 0")
    grid = sweep(tuple(args.beta_range), tuple(args.alpha_range), args.grid, args.gamma, args.J)
    if args.out is None:
        write_sweep_csv(grid, sys.stdout)
    else:
        write_sweep_csv(grid, args.out)
    b, a = grid.argmax()
    log.info("max eta2 %.12f at beta=%g alpha=%g", grid.eta2.max(), b, a)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    report = run_verify(args.seed, args.count, tamper=corrupt_matrix if args.corrupt else None)
    emit("\n".join(report.lines()) + "\n", args.out)
    return EXIT_OK if report.ok else EXIT_NUMERIC


COMMANDS = {
    "info": cmd_info, "evolve": cmd_evolve, "poles": cmd_poles, "flows": cmd_flows,
    "chart": cmd_chart, "efficiency": cmd_efficiency, "sweep": cmd_sweep, "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return COMMANDS[args.command](args)
    except GraphError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except (DimerflowError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    finally:
        log.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
