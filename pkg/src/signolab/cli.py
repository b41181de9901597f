"""Command-line front end: ``signolab solve|analyze|fit|verify-map|convergence|case``.

Every command writes plain CSV/JSON files into ``--out`` with fixed column
order and shortest round-trip float formatting, so identical runs give
byte-identical files.  Errors go to stderr as one JSON record and map to
exit codes 1 (input), 2 (solver) and 3 (analysis).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from signolab import __version__, analysis, cases, conformal, problem
from signolab.fields import Field, PolynomialField, UnknownField
from signolab.geometry import BoundarySpec, GeometryError, critical_points
from signolab.mesh import GradingParams, MeshError, export_mesh, import_mesh
from signolab.pipeline import discretization_errors, fitted_rate, mesh_hierarchy, solve_on
from signolab.vi_solver import DiscreteSolution, SolverError, SolverOptions

log = logging.getLogger("signolab")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_ANALYSIS = 0, 1, 2, 3
KKT_TOL = 1e-10


class InputError(ValueError):
    pass


class MissingSolution(InputError):
    pass


class NoExactSolution(InputError):
    pass


class KKTFailure(SolverError):
    pass


# ------------------------------------------------------------------ config


@dataclass
class RunConfig:
    problem: Path | None
    h: float = 0.125
    levels: int = 1
    grading: list = field(default_factory=list)  # (selector, mu, radius)
    tol: float = 1e-12
    out: Path = Path("out")

    def __post_init__(self):
        if self.levels < 1:
            raise InputError("--levels must be >= 1")
        if not self.h > 0:
            raise InputError("--h must be positive")
        if not 0 < self.tol < 1:
            raise InputError("--tol must lie in (0, 1)")


def parse_grade(text: str):
    """``cp=mu,R`` where cp is ``vK`` (polygon vertex K) or ``x,y``."""
    try:
        sel, rhs = text.split("=")
        mu, radius = (float(v) for v in rhs.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --grade {text!r}; expected cp=mu,R") from None
    sel = sel.strip()
    if re.fullmatch(r"v\d+", sel):
        return (sel, mu, radius)
    try:
        x, y = (float(v) for v in sel.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grading center {sel!r}; use vK or x,y") from None
    return ((x, y), mu, radius)


def parse_angle(text: str) -> float:
    """A float or a multiple of pi such as ``pi``, ``3pi/2``, ``pi/2``."""
    t = text.replace(" ", "").replace("*", "")
    m = re.fullmatch(r"([0-9.]*)pi(?:/([0-9.]+))?", t)
    try:
        if m:
            num = float(m.group(1)) if m.group(1) else 1.0
            den = float(m.group(2)) if m.group(2) else 1.0
            return num * math.pi / den
        return float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad angle {text!r}") from None


def _vertex_point(spec: BoundarySpec, sel) -> tuple:
    if isinstance(sel, str):
        k = int(sel[1:])
        if not 0 <= k < spec.polygon.n:
            raise InputError(f"vertex {k} outside 0..{spec.polygon.n - 1}")
        return tuple(spec.polygon.vertices[k])
    return tuple(sel)


def grading_params(spec: BoundarySpec, grading) -> list:
    return [GradingParams(_vertex_point(spec, sel), mu, radius) for sel, mu, radius in grading]


# ------------------------------------------------------------------ output


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue())


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def _tag_label(tags) -> str:
    return "".join(sorted(t.value for t in tags)) or "I"


# ----------------------------------------------------------------- loading


def _load_spec(cfg_problem, out: Path | None = None) -> BoundarySpec:
    path = cfg_problem
    if path is None and out is not None and (out / "problem.json").exists():
        path = out / "problem.json"
    if path is None:
        raise InputError("--problem is required")
    try:
        return problem.load(path)
    except FileNotFoundError:
        raise InputError(f"problem file {path} not found") from None


def _level_files(out: Path) -> list:
    found = sorted(out.glob("level*.mesh"), key=lambda p: int(re.sub(r"\D", "", p.stem)))
    if not found:
        raise MissingSolution(f"no level*.mesh files in {out}; run 'solve' first")
    return found


def load_level(spec: BoundarySpec, out: Path, k: int):
    """Rebuild ``(mesh, solution, h)`` for level k from the files written by ``solve``."""
    from signolab import assembly

    files = [out / f"level{k}.mesh", out / f"level{k}_solution.csv", out / f"level{k}_trace.json"]
    for f in files:
        if not f.exists():
            raise MissingSolution(f"missing {f.name} in {out}")
    mesh = import_mesh(files[0].read_text())
    with files[1].open() as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != mesh.n_nodes:
        raise MissingSolution(f"{files[1].name} has {len(rows)} rows for {mesh.n_nodes} nodes")
    y = np.array([float(r["value"]) for r in rows])
    lam = np.array([float(r["multiplier"]) for r in rows])
    trace = json.loads(files[2].read_text())
    part = assembly.partition(mesh, spec)
    psi = assembly.obstacle(mesh, spec, part)
    sol = DiscreteSolution(
        y,
        lam[part.signorini],
        np.array(trace["active"], dtype=np.int64),
        trace["iterations"],
        trace["steps"],
        part.signorini,
        psi,
    )
    return mesh, sol, float(trace["h"])


# ---------------------------------------------------------------- commands


def cmd_solve(cfg: RunConfig) -> int:
    spec = _load_spec(cfg.problem)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "problem.json").write_text(problem.dumps(spec))
    opts = SolverOptions(tol=cfg.tol)
    worst = 0.0
    for mesh, hk in mesh_hierarchy(spec, cfg.h, cfg.levels, grading_params(spec, cfg.grading)):
        k = mesh.level
        res = solve_on(mesh, spec, hk, opts)
        kkt = res.kkt()
        worst = max(worst, kkt.max_scaled())
        (cfg.out / f"level{k}.mesh").write_text(export_mesh(mesh))
        tags = mesh.node_tags
        lam = res.sol.multiplier_full()
        rows = [
            (i, x, yy, res.sol.y[i], _tag_label(tags[i]), lam[i]) for i, (x, yy) in enumerate(mesh.nodes.tolist())
        ]
        write_csv(cfg.out / f"level{k}_solution.csv", ["node", "x", "y", "value", "tag", "multiplier"], rows)
        trace = res.sol.trace_json()
        trace.update(h=hk, level=k, nodes=mesh.n_nodes, kkt=vars(kkt))
        write_json(cfg.out / f"level{k}_trace.json", trace)
        print(f"level {k}: nodes={mesh.n_nodes} h={hk:.4g} pdas={res.sol.iterations} kkt={kkt.max_scaled():.3e}")
    if worst > KKT_TOL:
        raise KKTFailure(f"scaled KKT residual {worst:.3e} exceeds {KKT_TOL:g}")
    return EXIT_OK


def cmd_analyze(cfg: RunConfig, delta: float = 0.2) -> int:
    levels = range(len(_level_files(cfg.out)))
    spec = _load_spec(cfg.problem, cfg.out)
    reports, last = [], None
    for k in levels:
        mesh, sol, hk = load_level(spec, cfg.out, k)
        reports.append(analysis.extract_coincidence(sol, mesh, spec, hk))
        last = (mesh, sol)
    out = {"levels": [r.to_json() for r in reports]}
    if len(reports) >= 3:
        out["stability"] = vars(analysis.component_stability(reports))
    else:
        out["stability"] = None
        out["stability_note"] = "at least 3 levels are needed for a stability verdict"
    write_json(cfg.out / "coincidence.json", out)
    mesh, sol = last
    # contact endpoints stay inside the measured region: that is where t * n lives
    centers = [cp.location for cp in critical_points(spec)]
    comp = analysis.complementarity_product(sol, mesh, centers, delta)
    rows = zip(comp.nodes, comp.arclength, comp.tangential, comp.flux, comp.product)
    write_csv(cfg.out / "complementarity.csv", ["node", "arclength", "tangential", "flux", "product"], rows)
    verdict = out["stability"]
    print(
        f"intervals={reports[-1].n_intervals} isolated={reports[-1].n_isolated} "
        f"stable={None if verdict is None else verdict['stable']} max|t*n|={comp.value:.3e}"
    )
    return EXIT_OK


def select_point(spec: BoundarySpec, report, mesh, selector: str | None) -> tuple:
    """Resolve a fit selector to ``(critical point, other critical locations)``.

    ``vK`` is the critical point at polygon vertex K, ``eK`` the K-th detected
    coincidence endpoint and ``x,y`` any of these by location.
    """
    corners = critical_points(spec)
    ends = analysis.endpoint_critical_points(report, mesh)
    everything = corners + ends
    if selector is None:
        if not ends:
            raise InputError("no coincidence endpoint detected; pass --point vK or x,y")
        cp = ends[0]
    elif re.fullmatch(r"v\d+", selector):
        k = int(selector[1:])
        match = [c for c in corners if c.vertex == k]
        if not match:
            raise InputError(f"polygon vertex {k} is not a critical point")
        cp = match[0]
    elif re.fullmatch(r"e\d+", selector):
        k = int(selector[1:])
        if k >= len(ends):
            raise InputError(f"only {len(ends)} coincidence endpoints detected")
        cp = ends[k]
    else:
        try:
            p = np.array([float(v) for v in selector.split(",")])
        except ValueError:
            raise InputError(f"bad point selector {selector!r}") from None
        d = [np.linalg.norm(np.asarray(c.location) - p) for c in everything]
        if not d or min(d) > 1e-9 * max(1.0, float(np.abs(p).max())):
            raise InputError(f"{selector} is not a critical point or a detected endpoint")
        cp = everything[int(np.argmin(d))]
    others = [c.location for c in everything if c is not cp]
    return cp, others


def cmd_fit(cfg: RunConfig, selector: str | None = None, window=None, level: int | None = None) -> int:
    n = len(_level_files(cfg.out))
    spec = _load_spec(cfg.problem, cfg.out)
    k = n - 1 if level is None else level
    if not 0 <= k < n:
        raise InputError(f"level {k} outside 0..{n - 1}")
    mesh, sol, hk = load_level(spec, cfg.out, k)
    report = analysis.extract_coincidence(sol, mesh, spec, hk)
    cp, others = select_point(spec, report, mesh, selector)
    rep = analysis.fit_exponent(sol.y, mesh, cp, window=window, others=others)
    out = rep.to_json()
    out.update(level=k, h=hk, kind=cp.kind, angle=cp.angle, pair=[str(p) for p in cp.pair])
    write_json(cfg.out / "exponent.json", out)
    write_csv(cfg.out / "loglog.csv", ["radius", "arc_norm", "log_radius", "log_arc_norm"], [
        (r, g, math.log(r), math.log(g) if g > 0 else "-inf") for r, g in zip(rep.radii, rep.norms)
    ])
    print(f"exponent={rep.exponent:.6f} predicted={rep.predicted} r2={rep.r_squared:.6f} arcs={rep.arcs}")
    return EXIT_OK


def re_z_squared() -> Field:
    return PolynomialField(params={"coeffs": [[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]})


def cmd_verify_map(alpha: float, resolution: int, out: Path | None = None) -> int:
    if resolution < 1:
        raise InputError("--resolution must be positive")
    try:
        m = conformal.CornerMap((0.0, 0.0), alpha, 0.0)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    chk = conformal.energy_identity_check(re_z_squared(), m, resolution)
    rec = {"alpha": alpha, "resolution": resolution, "field": "Re(z^2)", **chk.to_json()}
    text = json.dumps(_plain(rec), indent=2, sort_keys=True) + "\n"
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify_map.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, order: int = 6) -> int:
    spec = _load_spec(cfg.problem, cfg.out)
    if spec.exact is None:
        raise NoExactSolution("the problem file has no 'exact' field")
    cfg.out.mkdir(parents=True, exist_ok=True)
    opts = SolverOptions(tol=cfg.tol)
    rows, hs, e1, e0 = [], [], [], []
    for mesh, hk in mesh_hierarchy(spec, cfg.h, cfg.levels, grading_params(spec, cfg.grading)):
        res = solve_on(mesh, spec, hk, opts)
        kkt = res.kkt().max_scaled()
        if kkt > KKT_TOL:
            raise KKTFailure(f"level {mesh.level}: scaled KKT residual {kkt:.3e}")
        h1, l2 = discretization_errors(mesh, res.sol.y, spec.exact, order)
        r1 = math.log(e1[-1] / h1) / math.log(hs[-1] / hk) if hs else ""
        r0 = math.log(e0[-1] / l2) / math.log(hs[-1] / hk) if hs else ""
        hs.append(hk), e1.append(h1), e0.append(l2)
        rows.append((mesh.level, hk, mesh.n_nodes, h1, l2, r1, r0))
        print(f"level {mesh.level}: h={hk:.4g} H1={h1:.4e} L2={l2:.4e}")
    write_csv(cfg.out / "rates.csv", ["level", "h", "nodes", "h1_error", "l2_error", "h1_rate", "l2_rate"], rows)
    if len(hs) >= 2:
        fit = {"h1_rate": fitted_rate(hs, e1), "l2_rate": fitted_rate(hs, e0), "levels": len(hs)}
        write_json(cfg.out / "rates.json", fit)
        print(f"fitted rates: H1 {fit['h1_rate']:.4f}  L2 {fit['l2_rate']:.4f}")
    return EXIT_OK


def cmd_case(action: str, name: str | None, out: Path | None) -> int:
    if action == "list":
        for n in sorted(cases.CASES):
            print(n)
        return EXIT_OK
    if name is None:
        raise InputError("case emit needs a case name")
    try:
        case = cases.get_case(name)
    except KeyError as exc:
        raise InputError(exc.args[0]) from None
    text = problem.dumps(case.spec)
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    return EXIT_OK


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="signolab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def run_args(p, needs_mesh=True):
        p.add_argument("--problem", type=Path)
        p.add_argument("--out", type=Path, default=Path("out"))
        if needs_mesh:
            p.add_argument("--h", type=float, default=0.125)
            p.add_argument("--levels", type=int, default=1)
            p.add_argument("--grade", type=parse_grade, action="append", default=[], metavar="CP=MU,R")
            p.add_argument("--tol", type=float, default=1e-12)

    run_args(sub.add_parser("solve", help="solve on a mesh hierarchy"))
    p = sub.add_parser("analyze", help="coincidence sets and complementarity")
    run_args(p, needs_mesh=False)
    p.add_argument("--delta", type=float, default=0.2)
    p = sub.add_parser("fit", help="log-log exponent fit at a critical point")
    run_args(p, needs_mesh=False)
    p.add_argument("--point", help="vK, eK or x,y (default: first detected endpoint)")
    p.add_argument("--window", type=lambda s: tuple(float(v) for v in s.split(",")), metavar="RMIN,RMAX")
    p.add_argument("--level", type=int)
    p = sub.add_parser("verify-map", help="energy identity of the corner map")
    p.add_argument("--alpha", type=parse_angle, required=True)
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--out", type=Path)
    p = sub.add_parser("convergence", help="error table against the exact solution")
    run_args(p)
    p.add_argument("--order", type=int, default=6)
    p = sub.add_parser("case", help="list or emit benchmark problems")
    p.add_argument("action", choices=["list", "emit"])
    p.add_argument("name", nargs="?")
    p.add_argument("--out", type=Path)
    return ap


def _config(args) -> RunConfig:
    return RunConfig(
        args.problem,
        getattr(args, "h", 0.125),
        getattr(args, "levels", 1),
        getattr(args, "grade", []),
        getattr(args, "tol", 1e-12),
        args.out,
    )


def _dispatch(args) -> int:
    if args.command == "verify-map":
        return cmd_verify_map(args.alpha, args.resolution, args.out)
    if args.command == "case":
        return cmd_case(args.action, args.name, args.out)
    cfg = _config(args)
    if args.command == "solve":
        return cmd_solve(cfg)
    if args.command == "analyze":
        return cmd_analyze(cfg, args.delta)
    if args.command == "fit":
        return cmd_fit(cfg, args.point, args.window, args.level)
    return cmd_convergence(cfg, args.order)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, SolverError):
        return EXIT_SOLVER
    if isinstance(exc, analysis.AnalysisError):
        return EXIT_ANALYSIS
    return EXIT_INPUT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (
        SolverError,
        analysis.AnalysisError,
        InputError,
        problem.ProblemFileError,
        GeometryError,
        MeshError,
        UnknownField,
        ValueError,
        OSError,
        KeyError,
        json.JSONDecodeError,
    ) as exc:
        code = exit_code(exc)
        rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code, "command": args.command}
        sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
