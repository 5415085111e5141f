"""Command-line front end: triangulation files, checks, invariants and moves.

File format (one record per line, ``#`` starts a comment)::

    dim 3
    group cyclic 5 1            # trivial | cyclic p k | zline alpha a
    vertex n
    simplex + n@0 s@0 v@0 v@1   # bare names when the group is trivial
    glue 0 1 3 0 -1             # optional explicit face pairing (t1 i1 t2 i2 shift)
    lift n 0 1.25 0.5 1.75      # coordinates of copy 0 (other copies are checked)
    length n@0 v@1 2.5          # optional squared-length override

Exit codes: 0 success, 1 violated check or failed computation, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys

import numpy as np

from .complex_core import (ComplexError, DeckGroup, Gluing, auto_gluing, build_complex,
                           find_face_gluing)
from .developing import (CoverPlacement, DevelopError, Representation, gauge_basis,
                         read_metric)
from .jacobians import (assemble_A3, assemble_B3, assemble_D4, assemble_Q4, area_sq_response,
                        fd_check, numerical_rank, simplex_deviation_identity)
from .metric import GeometryError, MetricData, deficit_angles
from .pachner import (MOVES, MoveError, Site, apply_move, edge_identity_residuals, find_sites,
                      four_surrounded_edges)
from .torsion import TorsionError, compute_invariant
from .zoo import GeneratorError, gen_lens, gen_s1xs2, gen_sphere3, gen_sphere4

log = logging.getLogger(__name__)
SCHEMA = 1
FD_RTOL = 1e-5


class ParseError(ValueError):
    pass


class TriangulationFile:
    """Parsed file: complex, optional placement, optional length overrides."""

    def __init__(self, complex, placement=None, lengths=None):
        self.complex = complex
        self.placement = placement
        self.lengths = lengths or {}

    def metric(self) -> MetricData | None:
        if self.placement is None:
            return None
        m = read_metric(self.complex, self.placement)
        if self.lengths:
            L = m.L.copy()
            for e, val in self.lengths.items():
                L[e] = val
            m = MetricData(L, m.eps)
        return m


# ---------------------------------------------------------------- emit / parse

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _token(c, label) -> str:
    name = c.vertex_names[label[0]]
    return name if c.group.order == 1 else f"{name}@{label[1]}"


def _group_line(rep: Representation | None, group: DeckGroup) -> str:
    if group.order == 1:
        return "group trivial"
    if group.order is None:
        if rep is None:
            return "group zline 0 1"
        return f"group zline {_fmt(rep.alpha)} {_fmt(rep.a)}"
    k = rep.k if rep is not None else 1
    return f"group cyclic {group.order} {k}"


def emit(c, placement: CoverPlacement | None = None) -> str:
    rep = placement.rep if placement is not None else None
    lines = [f"dim {c.dim}", _group_line(rep, c.group)]
    lines += [f"vertex {n}" for n in c.vertex_names]
    for o, top in zip(c.orient, c.tops):
        lines.append("simplex " + ("+" if o > 0 else "-") + " " + " ".join(_token(c, l) for l in top))
    try:
        default = auto_gluing(c.tops, c.group)
    except ComplexError:
        default = None
    if default is None or any(default[k] != g for k, g in c.gluing.items()):
        for (t, i), g in sorted(c.gluing.items()):
            if (t, i) < (g.top2, g.pos2):
                lines.append(f"glue {t} {i} {g.top2} {g.pos2} {g.shift}")
    if placement is not None:
        for v, name in enumerate(c.vertex_names):
            lines.append(f"lift {name} 0 " + " ".join(_fmt(x) for x in placement.base[v]))
    return "\n".join(lines) + "\n"


def parse(text: str) -> TriangulationFile:
    dim, group_rec = None, ("trivial",)
    names, simplices, glues, lifts, lengths = [], [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head == "dim":
                dim = int(rest[0])
            elif head == "group":
                if rest[0] == "trivial":
                    group_rec = ("trivial",)
                elif rest[0] == "cyclic":
                    group_rec = ("cyclic", int(rest[1]), int(rest[2]))
                elif rest[0] == "zline":
                    group_rec = ("zline", float(rest[1]), float(rest[2]))
                else:
                    raise ValueError(rest[0])
            elif head == "vertex":
                names.append(rest[0])
            elif head == "simplex":
                if rest[0] not in "+-" or len(rest[0]) != 1:
                    raise ValueError("sign must be + or -")
                simplices.append((1 if rest[0] == "+" else -1, rest[1:]))
            elif head == "glue":
                glues.append(tuple(int(x) for x in rest[:5]))
                if len(rest) != 5:
                    raise ValueError("glue needs 5 integers")
            elif head == "lift":
                lifts.append((rest[0], int(rest[1]), [float(x) for x in rest[2:]]))
            elif head == "length":
                lengths.append((rest[0], rest[1], float(rest[2])))
            else:
                raise ValueError(f"unknown record {head!r}")
        except (IndexError, ValueError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    if dim is None or not simplices:
        raise ParseError("file needs a dim line and at least one simplex")
    index = {n: i for i, n in enumerate(names)}
    if len(index) != len(names):
        raise ParseError("duplicate vertex name")

    if group_rec[0] == "trivial":
        group, rep = DeckGroup(1), Representation("trivial", dim)
    elif group_rec[0] == "cyclic":
        group = DeckGroup(group_rec[1])
        rep = Representation("single_axis_cyclic", dim, group_rec[1], group_rec[2])
    else:
        group = DeckGroup(None)
        rep = Representation("cyclic_infinite", dim, alpha=group_rec[1], a=group_rec[2])

    def label(tok):
        name, _, copy = tok.partition("@")
        if name not in index:
            raise ParseError(f"unknown vertex {name!r}")
        try:
            return (index[name], int(copy) if copy else 0)
        except ValueError as exc:
            raise ParseError(f"bad copy index in {tok!r}") from exc

    tops = [(s, tuple(label(t) for t in toks)) for s, toks in simplices]
    try:
        gluing = None
        if glues:
            norm = [tuple((v, group.reduce(j)) for v, j in top) for _, top in tops]
            gluing = {}
            for t1, i1, t2, i2, shift in glues:
                g = find_face_gluing(group, norm, t1, i1, t2, i2, shift=shift)
                if g is None:
                    raise ParseError(f"glue {t1} {i1} {t2} {i2} {shift} does not match labels")
                gluing[(t1, i1)] = g
                inv = [None] * len(g.perm)
                for a, b in enumerate(g.perm):
                    inv[b] = a
                gluing[(t2, i2)] = Gluing(t1, i1, tuple(inv), -shift)
        c = build_complex(dim, tops, names, group, gluing=gluing)
    except (ComplexError, IndexError) as exc:
        raise ParseError(str(exc)) from exc

    placement = None
    if lifts:
        base = np.full((len(names), dim), np.nan)
        extra = []
        for name, copy, coords in lifts:
            if len(coords) != dim:
                raise ParseError(f"lift of {name} has {len(coords)} coordinates")
            v = label(name)[0]
            if copy == 0:
                base[v] = coords
            else:
                extra.append((v, copy, np.array(coords)))
        if np.isnan(base).any():
            raise ParseError("every vertex needs a copy-0 lift")
        placement = CoverPlacement(rep, base)
        for v, copy, x in extra:
            if np.abs(placement.lift((v, copy)) - x).max() > 1e-9 * max(1.0, np.abs(x).max()):
                raise ParseError(f"lift {c.vertex_names[v]}@{copy} is not equivariant")
    overrides = {}
    for a, b, val in lengths:
        target = group.key([label(a), label(b)])
        hits = [e for e in range(c.n_cells(1)) if group.key(c.cell_labels(1, e)) == target]
        if not hits:
            raise ParseError(f"no edge {a} {b}")
        for e in hits:
            overrides[e] = val
    if overrides and placement is None:
        raise ParseError("length overrides need lifts")
    return TriangulationFile(c, placement, overrides)


# ---------------------------------------------------------------- JSON

def _prep(obj):
    if isinstance(obj, dict):
        return {str(k): _prep(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_prep(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _prep(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return f"\x00{_fmt(x)}\x00" if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    """JSON text with every float written with 17 significant digits."""
    text = json.dumps(_prep(obj), indent=1, sort_keys=True)
    return re.sub(r'"\\u0000([^"\\]*)\\u0000"', r"\1", text)


# ---------------------------------------------------------------- suites

def check_report(tf: TriangulationFile, tol: float = 1e-9) -> dict:
    """Zero curvature, chain, rank and identity residuals; ``ok`` summarizes."""
    c = tf.complex
    rep = {"schema": SCHEMA, "dim": c.dim, "counts": list(c.counts()),
           "euler_characteristic": c.euler_characteristic()}
    failures = []
    m = tf.metric()
    if m is None:
        rep["note"] = "no lifts: combinatorial checks only"
        rep["ok"] = True
        return rep
    try:
        omega = deficit_angles(c, m)
    except GeometryError as exc:
        rep.update(ok=False, failures=["realizable"], error=str(exc))
        return rep
    rep["max_abs_omega"] = float(np.abs(omega).max())
    if rep["max_abs_omega"] > tol:
        failures.append("max_abs_omega")
    if tf.lengths or failures:
        rep["ok"] = False
        rep["failures"] = failures
        return rep
    pl = tf.placement
    if c.dim == 3:
        A = assemble_A3(c, m, placement=pl)
        scale = float(np.abs(assemble_A3(c, m, absolute=True, placement=pl)).max())
        basis = gauge_basis(pl)
        B = assemble_B3(c, pl, basis)
        rA = numerical_rank(A, scale=scale)
        rB = numerical_rank(B)
        rep["chain_AB"] = float(np.abs(A @ B).max() / (scale * np.abs(B).max()))
        rep["symmetry_A"] = float(np.abs(A - A.T).max() / scale)
        rep["rank_A"], rep["rank_B"], rep["gauge_size"] = rA[0], rB[0], len(basis)
        rep["n_edges"] = c.n_cells(1)
        rep["sv_gap_A"], rep["sv_gap_B"] = float(rA[2]), float(rB[2])
        for key in ("chain_AB", "symmetry_A"):
            if rep[key] > max(tol, 1e-8):
                failures.append(key)
        if pl.rep.kind != "cyclic_infinite":
            if rB[0] != len(basis) or rA[0] + rB[0] != c.n_cells(1):
                failures.append("exactness_ranks")
        else:
            rep["experimental_gauge"] = True
    else:
        Q = assemble_Q4(c, m, placement=pl)
        scale = float(np.abs(assemble_Q4(c, m, absolute=True, placement=pl)).max())
        D = assemble_D4(c, pl)
        rep["chain_4d"] = float(np.abs(Q.T @ D).max() / (scale * np.abs(D).max()))
        rep["rank_Omega_map"] = numerical_rank(Q.T, scale=scale)[0]
        worst_simplex = max(abs(a / b - 1) for a, b in
                   (simplex_deviation_identity(pl.top_coords(c, t)) for t in range(c.n_tops)))
        rep["simplex_identity_residual"] = float(worst_simplex)
        R = area_sq_response(c, pl)
        edges = four_surrounded_edges(c)
        ann, prop, ranks = 0.0, 0.0, []
        for e in edges:
            try:
                res = edge_identity_residuals(c, pl, e, R=R, Q4=Q)
            except MoveError:
                continue
            ann = max(ann, res["annihilation"])
            prop = max(prop, res["proportion"])
            ranks.append(res["rank"])
        rep["four_surrounded_edges"] = len(ranks)
        rep["edge_annihilation"] = ann
        rep["edge_min_rank"] = min(ranks) if ranks else None
        rep["column_proportion"] = prop
        for key in ("chain_4d", "simplex_identity_residual", "edge_annihilation", "column_proportion"):
            if rep[key] > max(tol, 1e-8):
                failures.append(key)
        if ranks and min(ranks) != 3:
            failures.append("edge_rank")
    rep["fd_jacobians"] = fd_check(c, pl)
    if max(rep["fd_jacobians"].values()) > FD_RTOL:
        failures.append("fd_jacobians")
    rep["failures"] = failures
    rep["ok"] = not failures
    return rep


def chain_4d_residual(c, pl) -> float:
    m = read_metric(c, pl)
    Q = assemble_Q4(c, m, placement=pl)
    scale = float(np.abs(assemble_Q4(c, m, absolute=True, placement=pl)).max())
    return float(np.abs(Q.T @ assemble_D4(c, pl)).max() / (scale * np.abs(assemble_D4(c, pl)).max()))


# ---------------------------------------------------------------- commands

def _read(path: str) -> TriangulationFile:
    if path == "-":
        return parse(sys.stdin.read())
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def _out(args, text: str):
    print(text, end="" if text.endswith("\n") else "\n")


def cmd_gen(args) -> int:
    kind = args.kind
    if kind == "sphere3":
        c, pl = gen_sphere3(args.seed)
    elif kind == "sphere4":
        c, pl = gen_sphere4(args.seed)
    elif kind == "lens":
        c, pl, _ = gen_lens(args.p, args.q, args.k, args.seed)
    elif kind in ("s1xs2", "s1xs2_experimental"):
        c, pl, _ = gen_s1xs2(args.alpha, args.a, args.seed)
    else:
        raise GeneratorError("BAD_PARAMS", f"unknown kind {kind}")
    text = emit(c, pl)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        _out(args, text)
    return 0


def cmd_check(args) -> int:
    rep = check_report(_read(args.file), args.tol)
    _out(args, dumps(rep))
    return 0 if rep["ok"] else 1


def cmd_invariant(args) -> int:
    tf = _read(args.file)
    if tf.complex.dim != 3 or tf.placement is None:
        raise ParseError("invariant needs a 3-dimensional file with lifts")
    report = compute_invariant(tf.complex, tf.placement, pivot_seed=args.pivot_seed)
    out = {"schema": SCHEMA, **report.to_dict()}
    _out(args, dumps(out))
    return 0


def _pick_site(c, kind, site, rng):
    if site is not None:
        return Site(kind, site)
    sites = find_sites(c, kind)
    if not sites:
        raise MoveError("DEGENERATE_SITE", f"no site for move {kind}")
    return sites[int(rng.integers(len(sites)))]


def cmd_move(args) -> int:
    tf = _read(args.file)
    if tf.placement is None:
        raise ParseError("move needs lifts")
    rng = np.random.default_rng(args.seed)
    c, pl = tf.complex, tf.placement
    if args.site is not None:
        res = apply_move(c, pl, Site(args.kind, args.site), rng)
    else:
        # random admissible site: try candidates in a seeded order
        sites = find_sites(c, args.kind)
        order = rng.permutation(len(sites))
        res, last = None, None
        for i in order:
            try:
                res = apply_move(c, pl, sites[int(i)], rng)
                break
            except MoveError as exc:
                last = exc
        if res is None:
            raise last or MoveError("DEGENERATE_SITE", f"no site for move {args.kind}")
    text = emit(res.complex, res.placement)
    out = {"schema": SCHEMA, "move": res.report, "counts": list(res.complex.counts()),
           "created_edges": res.created[1]}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out["file"] = text
    _out(args, dumps(out))
    return 0


def cmd_experiment(args) -> int:
    tf = _read(args.file)
    if tf.placement is None:
        raise ParseError("experiment needs lifts")
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    for k in kinds:
        if k not in MOVES:
            raise ParseError(f"unknown move kind {k}")
    c, pl = tf.complex, tf.placement
    if c.dim == 3:
        def measure(cc, pp):
            return compute_invariant(cc, pp, pivot_seed=args.pivot_seed).invariant
        quantity = "invariant"
    else:
        measure = chain_4d_residual
        quantity = "chain_4d"
    from .pachner import move_experiment

    trace, applied, c, pl = move_experiment(c, pl, kinds, args.n, seed=args.seed, invariant=measure)
    trace = np.array(trace)
    out = {"schema": SCHEMA, "quantity": quantity, "trace": trace, "moves": applied,
           "requested": args.n, "applied": len(applied)}
    if quantity == "invariant":
        spread = float((trace.max() - trace.min()) / np.abs(trace).max())
        out["relative_spread"] = spread
        ok = spread <= 1e-6
    else:
        ok = float(trace.max()) <= max(args.tol, 1e-8)
    ok = ok and len(applied) == args.n
    out["ok"] = ok
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(emit(c, pl))
    _out(args, dumps(out))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--json", action="store_true", help="JSON output (the default for reports)")
    common.add_argument("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(prog="pltorsion", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="emit a built-in triangulation")
    g.add_argument("--kind", required=True, choices=["sphere3", "sphere4", "lens", "s1xs2", "s1xs2_experimental"])
    g.add_argument("--p", type=int, default=5)
    g.add_argument("--q", type=int, default=1)
    g.add_argument("--k", type=int, default=1)
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--a", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("check", parents=[common], help="curvature, chain, rank and identity residuals")
    c.add_argument("file")
    c.set_defaults(func=cmd_check)

    i = sub.add_parser("invariant", parents=[common], help="torsion and the 3-manifold invariant")
    i.add_argument("file")
    i.add_argument("--pivot-seed", type=int, default=None)
    i.set_defaults(func=cmd_invariant)

    m = sub.add_parser("move", parents=[common], help="apply one Pachner move")
    m.add_argument("file")
    m.add_argument("--kind", required=True, choices=sorted(MOVES))
    m.add_argument("--site", type=int, default=None)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out")
    m.set_defaults(func=cmd_move)

    e = sub.add_parser("experiment", parents=[common], help="random move sequence with a value trace")
    e.add_argument("file")
    e.add_argument("--kinds", default="2-3,3-2,1-4,4-1")
    e.add_argument("-n", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--pivot-seed", type=int, default=None)
    e.add_argument("--out")
    e.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ParseError, GeneratorError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ComplexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TorsionError, MoveError, DevelopError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
