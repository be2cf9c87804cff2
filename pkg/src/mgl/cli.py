"""Command-line front end: ``mgl <command> [options]``.

Exit codes: 0 when the command ran (an "inconclusive" verdict is data, not a
failure), 2 for input errors, 3 for internal invariant violations.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from mgl import grid, homotopy, majorization, regions, reporting, solver, tables, variation
from mgl.manifolds import parse_target

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3

logger = logging.getLogger("mgl")


class InputError(Exception):
    """Malformed or missing input; maps to exit status 2."""


class InvariantViolation(Exception):
    """An internal consistency check failed; maps to exit status 3."""


# ---------------------------------------------------------------------------
# input helpers


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{path}: no such file")
    return p.read_text(encoding="utf-8")


def _parse_vector(text: str, where: str) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in text.replace(" ", "").split(",") if v != ""])
    except ValueError:
        raise InputError(f"{where}: cannot parse {text.strip()!r} as comma-separated numbers") from None
    if vals.size == 0:
        raise InputError(f"{where}: empty vector")
    if not np.all(np.isfinite(vals)):
        raise InputError(f"{where}: entries must be finite")
    if np.any(vals < 0):
        raise InputError(f"{where}: entries must be non-negative")
    return vals


def _spectrum_lines(text: str):
    """Non-blank, non-comment lines as (line number, content)."""
    for num, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield num, line


def _load_map(path: str) -> grid.GridMap:
    try:
        return grid.map_from_dict(json.loads(_read_text(path)))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_boundary(path: str):
    try:
        return grid.parse_map_dict(json.loads(_read_text(path)))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _parse_grid(text: str) -> grid.GridDomain:
    try:
        nx, ny = (int(v) for v in text.split(","))
    except ValueError:
        raise InputError(f"--grid expects nx,ny, got {text!r}") from None
    if nx < 3 or ny < 3:
        raise InputError("--grid needs at least 3 nodes per direction")
    return grid.GridDomain(nx, ny, 1.0 / (nx - 1), 1.0 / (ny - 1))


def _target(args):
    try:
        return parse_target(args.target)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _region(name: str, m: int = 2) -> regions.Region:
    try:
        return regions.region_by_name(name, m)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="")


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _endpoint_pair(args):
    """Endpoint maps from two --input files, or a seeded instance from --grid/--target."""
    inputs = args.input or []
    if len(inputs) == 2:
        return _load_map(inputs[0]), _load_map(inputs[1])
    if inputs:
        raise InputError("give exactly two --input map files (f0 and f1)")
    domain = _parse_grid(args.grid)
    return homotopy.random_map_pair(domain, _target(args), args.seed)


def _boundary_data(args):
    if args.boundary:
        return _load_boundary(args.boundary)
    domain = _parse_grid(args.grid)
    target = _target(args)
    f0, _ = homotopy.random_map_pair(domain, target, args.seed)
    vals = np.array(f0.values)
    vals[domain.interior] = np.nan
    return domain, target, vals


# ---------------------------------------------------------------------------
# commands


def cmd_region(args) -> int:
    if not args.input:
        raise InputError("region needs --input (spectrum list or map file)")
    text = _read_text(args.input)
    tol = regions.BOUNDARY_TOL if args.tol is None else args.tol
    if text.lstrip().startswith("{"):
        fmap = _load_map(args.input)
        region = _region(args.region, args.m or 2)
        rf = grid.region_field(fmap, region, tol)
        sq = grid.spectrum_field(fmap) ** 2
        header = ["node_i", "node_j"] + [f"lambda2_{k + 1}" for k in range(sq.shape[-1])] + [
            "margin", "member", "on_boundary"]
        rows = []
        for j, i in np.argwhere(fmap.domain.active):
            rows.append([int(i), int(j)] + list(sq[j, i]) + [rf.margins[j, i], bool(rf.member[j, i]), bool(rf.on_boundary[j, i])])
        if args.format == "json":
            out = {"region": rf.region, "all_member": rf.all_member, "min_margin": rf.min_margin,
                   "out_of_scope": rf.out_of_scope,
                   "nodes": [dict(zip(header, [r[0], r[1]] + [float(v) for v in r[2:-2]] + r[-2:])) for r in rows]}
            _write(args.output, _dump_json(out))
        else:
            _write(args.output, tables.csv_text(header, rows))
        return EXIT_OK

    parsed = [(num, _parse_vector(line, f"line {num}")) for num, line in _spectrum_lines(text)]
    if not parsed:
        raise InputError(f"{args.input}: no spectra found")
    results = []
    for num, a in parsed:
        m = args.m or a.size
        if m != a.size:
            raise InputError(f"line {num}: expected {m} entries, got {a.size}")
        region = _region(args.region, m)
        v = region.verdict(a, tol)
        results.append((num, regions.as_spectrum(a), v, region.name))
    if args.format == "json":
        out = [
            {"line": num, "spectrum": a.tolist(), "region": name, "member": v.member,
             "on_boundary": v.on_boundary, "margin": v.margin, "out_of_theorem_scope": v.out_of_scope}
            for num, a, v, name in results
        ]
        _write(args.output, _dump_json(out))
    else:
        header = ["line", "spectrum", "region", "member", "on_boundary", "margin", "out_of_theorem_scope"]
        rows = [[num, " ".join(tables.fmt(x) for x in a), name, v.member, v.on_boundary, v.margin, v.out_of_scope]
                for num, a, v, name in results]
        _write(args.output, tables.csv_text(header, rows))
    return EXIT_OK


def cmd_majorize(args) -> int:
    tol = majorization.HULL_TOL if args.tol is None else args.tol
    if args.input:
        rows = []
        for num, line in _spectrum_lines(_read_text(args.input)):
            if ";" not in line:
                raise InputError(f"line {num}: expected 'y1,...,ym ; x1,...,xm'")
            left, right = line.split(";", 1)
            y = _parse_vector(left, f"line {num}")
            x = _parse_vector(right, f"line {num}")
            if x.size != y.size:
                raise InputError(f"line {num}: y and x have different lengths")
            if x.size > majorization.MAX_EXTREME_DIM:
                raise InputError(f"line {num}: hull test limited to m <= {majorization.MAX_EXTREME_DIM}")
            in_w = majorization.w_contains(x, y)
            dist = majorization.hull_distance(x, y)
            rows.append([num, in_w, dist, dist <= tol, in_w == (dist <= tol)])
        header = ["line", "in_W", "hull_distance", "in_H", "agree"]
        if args.format == "json":
            _write(args.output, _dump_json([dict(zip(header, r)) for r in rows]))
        else:
            _write(args.output, tables.csv_text(header, rows))
        return EXIT_OK
    m = args.m or 3
    if not 1 <= m <= 6:
        raise InputError("--m must lie in 1..6 for the random agreement check")
    rng = np.random.default_rng(args.seed)
    x = np.sort(rng.uniform(0, 2, size=m))[::-1]
    rep = majorization.mirsky_agreement(x, mode="random", n_random=args.samples, seed=args.seed, band=tol)
    out = {"x": x.tolist(), "n_samples": rep.n_samples, "n_disagreements": rep.n_disagreements,
           "n_in_band": rep.n_in_band}
    if args.format == "json":
        _write(args.output, _dump_json(out))
    else:
        _write(args.output, tables.csv_text(list(out), [[" ".join(tables.fmt(v) for v in x)] + list(out.values())[1:]]))
    return EXIT_OK


def _opts(args) -> solver.SolverOptions:
    kw = {"seed": args.seed}
    if args.tol is not None:
        kw["tol_residual"] = args.tol
    try:
        return solver.SolverOptions(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_solve(args) -> int:
    domain, target, bvals = _boundary_data(args)
    opts = _opts(args)
    try:
        init = solver.harmonic_extension(domain, target, bvals)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = solver.solve(domain, bvals, init, opts)
    bd = domain.boundary
    if not np.array_equal(out.map.values[bd], init.values[bd]):
        raise InvariantViolation("solver modified boundary values")
    if args.format == "csv":
        rows = [[k, v] for k, v in enumerate(out.volume_history)]
        _write(args.output, tables.csv_text(["iteration", "volume"], rows))
    else:
        _write(args.output, _dump_json(out.to_dict()))
    logger.info("solve: converged=%s iterations=%d residual=%.3e", out.converged, out.iterations, out.final_residual)
    return EXIT_OK


def _check_trace(trace: homotopy.HomotopyTrace):
    if np.max(np.abs(trace.values[0] - trace.f0.values)) > 1e-12 or np.max(np.abs(trace.values[-1] - trace.f1.values)) > 1e-12:
        raise InvariantViolation("homotopy endpoints do not reproduce the input maps")
    if np.any(trace.velocity[:, trace.domain.boundary] != 0):
        raise InvariantViolation("boundary velocity is not zero")


def _build_trace(args):
    f0, f1 = _endpoint_pair(args)
    try:
        trace = homotopy.build_homotopy(f0, f1, args.t_samples)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _check_trace(trace)
    return trace


def cmd_homotopy(args) -> int:
    trace = _build_trace(args)
    if args.format == "csv":
        header, rows = homotopy.trace_rows(trace)
        _write(args.output, tables.csv_text(header, rows))
    else:
        region = _region(args.region, trace.m)
        dom = [homotopy.partial_sum_domination(trace, l).__dict__ for l in range(1, trace.m + 1)]
        conv = [homotopy.fk_convexity(trace, k).__dict__ for k in range(1, trace.m + 1)]
        conf = homotopy.confinement_check(trace, region).__dict__
        _write(args.output, _dump_json({"domination": dom, "convexity": conv, "confinement": conf}))
    if args.plots:
        reporting.emit_plots(trace, args.plots)
    return EXIT_OK


def cmd_variation(args) -> int:
    trace = _build_trace(args)
    try:
        deriv = variation.area_derivatives(trace)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.format == "csv":
        header, rows = variation.variation_rows(deriv)
        _write(args.output, tables.csv_text(header, rows))
    else:
        payload = [dict(r.to_dict(), signs=variation.sign_report(r)) for r in deriv.reports]
        _write(args.output, _dump_json(payload))
    if args.plots:
        reporting.emit_plots(deriv, args.plots)
    return EXIT_OK


def cmd_uniqueness(args) -> int:
    domain, target, bvals = _boundary_data(args)
    region = _region(args.region, args.m or 2)
    try:
        rep = solver.uniqueness_experiment(domain, target, bvals, region, _opts(args))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _write(args.output, _dump_json(rep.to_dict()))
    return EXIT_OK


COMMANDS = {
    "region": cmd_region,
    "majorize": cmd_majorize,
    "solve": cmd_solve,
    "homotopy": cmd_homotopy,
    "variation": cmd_variation,
    "uniqueness": cmd_uniqueness,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", action="append", help="input file ('-' for stdin); homotopy/variation take two")
    common.add_argument("--boundary", help="boundary map file (JSON, interior values null)")
    common.add_argument("--output", help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--region", default="N_bar", help="N_bar, M_bar, C_m, V_m or slope_sqrt3")
    common.add_argument("--m", type=int, help="spectrum length")
    common.add_argument("--samples", type=int, default=10_000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, help="tolerance override")
    common.add_argument("--t-samples", type=int, default=33)
    common.add_argument("--grid", default="17,17", help="nx,ny for generated instances")
    common.add_argument("--target", default="euclidean:2", help="euclidean:n or hyperbolic:n:kappa")
    common.add_argument("--plots", help="directory for SVG plots and their CSV")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mgl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.command not in ("homotopy", "variation") and args.input and len(args.input) > 1:
        print("mgl: only one --input expected", file=sys.stderr)
        return EXIT_INPUT
    if args.input and args.command not in ("homotopy", "variation"):
        args.input = args.input[0]
    if args.samples < 1 or args.t_samples < 2:
        print("mgl: --samples and --t-samples must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"mgl: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantViolation, AssertionError) as exc:
        print(f"mgl: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"mgl: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
