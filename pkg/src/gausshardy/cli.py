"""Command-line entry point.

Exit codes: 0 success, 1 a verification assertion failed, 2 malformed input or
configuration, 3 a mathematical precondition was not met.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .atoms import atom_to_molecule, make_atom, TentAtom
from .chaos import ChaosExpansion, GridFunction, analyze, gauss_hermite, synthesize
from .errors import ConstructionError, PreconditionError, ResourceLimitError
from .functionals import default_grid, maximal_function, square_function
from .geometry import AdmissibleBall, ConeSpec
from .riesz import RieszQuery, riesz_apply
from .semigroup import (
    SemigroupQuery,
    apply_gradient_semigroup,
    apply_J_infty,
    apply_J_remainder_Dc,
    apply_semigroup,
)
from .verify import (
    SUITE_NAMES,
    config_hash,
    norm_equivalence_experiment,
    round_sig,
    run_suites,
    write_results,
)

OPERATORS = ("semigroup", "gradient", "J_infty", "J_dc", "riesz_R", "riesz_S", "maximal", "square")

_OPERATOR_PARAMS = {
    "semigroup": {"t": 1.0, "N": 0, "alpha": None, "path": "spectral"},
    "gradient": {"t": 1.0, "path": "spectral"},
    "J_infty": {"N": 1, "a": 2.0, "alpha": 36.0, "b": 1.0},
    "J_dc": {"N": 1, "a": 2.0, "alpha": 36.0, "b": 1.0},
    "riesz_R": {"k": 0, "path": "spectral", "N": 1, "alpha": 36.0},
    "riesz_S": {"k": 0, "path": "spectral", "N": 1, "alpha": 36.0},
    "maximal": {"A": 1.0, "a": 1.0},
    "square": {"a": 2.0},
}


class InputError(ValueError):
    """Malformed file or parameter blob (exit code 2)."""


# ---------------------------------------------------------------------------
# File formats


def read_grid_csv(path: str) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Read ``x1..xn[,value][,weight]`` with a mandatory header row."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}:1: missing header row")
    header = [h.strip() for h in rows[0]]
    xs = [h for h in header if h.startswith("x")]
    if not xs or header[: len(xs)] != [f"x{i + 1}" for i in range(len(xs))]:
        raise InputError(f"{path}:1: header must start with x1..xn, got {','.join(header)}")
    extra = header[len(xs):]
    if any(h not in ("value", "weight") for h in extra) or len(set(extra)) != len(extra):
        raise InputError(f"{path}:1: unexpected columns {','.join(extra)}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
        if not all(np.isfinite(vals)):
            raise InputError(f"{path}:{lineno}: non-finite entry")
        data.append(vals)
    if not data:
        raise InputError(f"{path}:2: no data rows")
    arr = np.array(data)
    n = len(xs)
    cols = {h: arr[:, n + i] for i, h in enumerate(extra)}
    return arr[:, :n], cols.get("value"), cols.get("weight")


def _cell(v, rounded: bool) -> str:
    if isinstance(v, (int, np.integer)) or isinstance(v, str):
        return str(v)
    v = float(v)
    return repr(round_sig(v) if rounded else v)


def write_csv(path: str, header, columns, rounded: bool = False) -> None:
    """Data files keep full precision; reports pass ``rounded=True`` (10 significant digits)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_cell(v, rounded) for v in row])


def _read_json(path_or_text: str, what: str):
    text = path_or_text
    if not path_or_text.lstrip().startswith(("{", "[")):
        try:
            with open(path_or_text) as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"{what}: cannot read {path_or_text}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what}: line {exc.lineno}: {exc.msg}") from exc


def read_expansion(path: str) -> ChaosExpansion:
    return ChaosExpansion.from_json_dict(_read_json(path, "expansion"))


def write_json(path: str, data, rounded: bool = False) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(round_sig(data) if rounded else data, sort_keys=True, indent=2) + "\n")


def _points_for(args, n: int) -> tuple[np.ndarray, np.ndarray | None]:
    if args.points:
        pts, _, w = read_grid_csv(args.points)
        if pts.shape[1] != n:
            raise InputError(f"{args.points}: points have dimension {pts.shape[1]}, expected {n}")
        return pts, w
    if args.rule_order:
        pts, w = gauss_hermite(args.rule_order).tensor(n)
        return pts, w
    g = default_grid(n)
    return g.points, g.weights


def _params(args, name: str) -> dict:
    params = dict(_OPERATOR_PARAMS[name])
    blob = _read_json(args.params, "params") if args.params else {}
    if not isinstance(blob, dict):
        raise InputError("params: expected a JSON object")
    for key, value in blob.items():
        if key not in params:
            raise InputError(f"params: unknown key {key!r} for operator {name}")
        params[key] = value
    for key in ("t", "path"):
        if getattr(args, key, None) is not None:
            if key not in params:
                raise InputError(f"--{key} does not apply to operator {name}")
            params[key] = getattr(args, key)
    return params


def results_root(args) -> str:
    return args.out or os.environ.get("GH_RESULTS_DIR") or "results"


# ---------------------------------------------------------------------------
# Commands


def cmd_transform(args) -> int:
    if bool(args.analyze) == bool(args.synthesize):
        raise InputError("give exactly one of --analyze GRID.csv or --synthesize EXPANSION.json")
    if args.analyze:
        pts, vals, w = read_grid_csv(args.analyze)
        if vals is None:
            raise InputError(f"{args.analyze}:1: a 'value' column is required for analysis")
        if w is None:
            raise PreconditionError("analysis needs a 'weight' column of gamma-quadrature weights")
        c = analyze(GridFunction(pts, vals, w), args.degree)
        out = args.output or "expansion.json"
        write_json(out, c.to_json_dict())
    else:
        c = read_expansion(args.synthesize)
        pts, w = _points_for(args, c.dimension)
        g = synthesize(c, pts)
        out = args.output or "grid.csv"
        header = [f"x{i + 1}" for i in range(c.dimension)] + ["value"]
        cols = [pts[:, i] for i in range(c.dimension)] + [g.values]
        if w is not None:
            header.append("weight")
            cols.append(w)
        write_csv(out, header, cols)
    print(out)
    return 0


def cmd_operator(args) -> int:
    name = args.name
    p = _params(args, name)
    u = read_expansion(args.input)
    n = u.dimension
    out = args.output or f"{name}.csv"
    xcols = lambda pts: [pts[:, i] for i in range(n)]
    xhead = [f"x{i + 1}" for i in range(n)]

    if name == "semigroup":
        q = SemigroupQuery(float(p["t"]), int(p["N"]), p["alpha"], p["path"])
        if p["path"] == "spectral" and out.endswith(".json"):
            write_json(out, apply_semigroup(u, q).to_json_dict())
            print(out)
            return 0
        pts, _ = _points_for(args, n)
        if p["path"] == "both":
            res = apply_semigroup(u, q, pts)
            spec = res.spectral(pts)
            kern = res.kernel.values
            write_csv(out, xhead + ["spectral", "kernel", "discrepancy"],
                      xcols(pts) + [spec, kern, np.abs(spec - kern)])
        else:
            r = apply_semigroup(u, q, pts)
            vals = r(pts) if isinstance(r, ChaosExpansion) else r.values
            write_csv(out, xhead + ["value"], xcols(pts) + [vals])
    elif name == "gradient":
        pts, _ = _points_for(args, n)
        grads = apply_gradient_semigroup(u, float(p["t"]), pts, p["path"])
        write_csv(out, xhead + [f"d{i + 1}" for i in range(n)], xcols(pts) + [g.values for g in grads])
    elif name in ("J_infty", "J_dc"):
        pts, w = _points_for(args, n)
        fn = apply_J_infty if name == "J_infty" else apply_J_remainder_Dc
        v = fn(u, int(p["N"]), float(p["a"]), float(p["alpha"]), float(p["b"]), pts)
        write_csv(out, xhead + ["value"], xcols(pts) + [v.values])
    elif name in ("riesz_R", "riesz_S"):
        variant = name[-1]
        k, path = int(p["k"]), p["path"]
        if path not in ("spectral", "integral", "both"):
            raise InputError(f"params: unknown path {path!r}")
        pts, _ = _points_for(args, n)
        spectral = riesz_apply(u, RieszQuery(k, variant))
        if path == "both":
            integral = riesz_apply(u, RieszQuery(k, variant, "integral", int(p["N"]), float(p["alpha"])))
            a, b = spectral(pts), integral(pts)
            write_csv(out, xhead + ["spectral", "integral", "discrepancy"], xcols(pts) + [a, b, np.abs(a - b)])
        else:
            q = spectral if path == "spectral" else riesz_apply(
                u, RieszQuery(k, variant, "integral", int(p["N"]), float(p["alpha"])))
            if out.endswith(".json"):
                write_json(out, q.to_json_dict())
            else:
                write_csv(out, xhead + ["value"], xcols(pts) + [q(pts)])
    elif name == "maximal":
        pts, _ = _points_for(args, n)
        spec = ConeSpec().with_parameters(float(p["A"]), float(p["a"]))
        write_csv(out, xhead + ["value"], xcols(pts) + [maximal_function(u, spec, pts).values])
    else:  # square
        pts, _ = _points_for(args, n)
        write_csv(out, xhead + ["value"], xcols(pts) + [square_function(u, float(p["a"]), pts).values])
    print(out)
    return 0


def _ball(args) -> AdmissibleBall:
    if args.center is None or args.radius is None:
        raise InputError("--center and --radius are required")
    return AdmissibleBall(np.array(args.center, dtype=float), float(args.radius), 2.0)


def cmd_atom(args) -> int:
    F = make_atom(_ball(args), args.seed)
    out = args.output or "atom.json"
    write_json(out, F.to_json_dict())
    print(out)
    return 0


def cmd_molecule(args) -> int:
    if args.atom:
        try:
            F = TentAtom.from_json_dict(_read_json(args.atom, "atom"))
        except (KeyError, TypeError) as exc:
            raise InputError(f"atom: {exc}") from exc
    else:
        F = make_atom(_ball(args), args.seed)
    _, _, rep = atom_to_molecule(F, args.N, args.alpha, args.j)
    out = args.output or "molecule.csv"
    ks = list(range(len(rep.log_annulus_norms)))
    write_csv(out, ["k", "log_norm", "log_tilde_norm"],
              [ks, rep.log_annulus_norms, rep.log_tilde_annulus_norms], rounded=True)
    print(json.dumps(round_sig({"relation_error": rep.relation_error,
                                "fitted_decay_rate": rep.fitted_decay_rate,
                                "k0_constant": rep.k0_constant}), sort_keys=True))
    return 0


def _config(args) -> dict:
    if not args.config:
        return {}
    cfg = _read_json(args.config, "config")
    if not isinstance(cfg, dict):
        raise InputError("config: expected a JSON object")
    return cfg


_CONFIGURABLE = ("norms", "verify", "all")


def _norms(cfg: dict, out_dir: str) -> dict:
    rep = norm_equivalence_experiment(cfg)
    os.makedirs(out_dir, exist_ok=True)
    cols = list(zip(*rep.rows))
    write_csv(os.path.join(out_dir, "norms.csv"),
              ["function_id", "level", "a_prime", "h1_quad", "h1_max", "ratio"], cols, rounded=True)
    summary = {
        "a": rep.a,
        "spreads": [{"level": lv, "a_prime": ap, "spread": s} for (lv, ap), s in sorted(rep.spreads.items())],
        "constant_ratios": list(rep.constant_ratios),
        "spread_nonincreasing": {str(ap): rep.spread_nonincreasing(ap) for ap in rep.a_primes},
        "config_hash": config_hash(cfg),
    }
    write_json(os.path.join(out_dir, "norms.json"), summary, rounded=True)
    return summary


def cmd_norms(args) -> int:
    summary = _norms(_config(args), os.path.join(results_root(args), "norms"))
    print(json.dumps(round_sig(summary), sort_keys=True))
    return 0


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


def cmd_verify(args) -> int:
    names = list(SUITE_NAMES) if args.name == "all" else [args.name]
    if args.name != "all" and args.name not in SUITE_NAMES:
        raise InputError(f"unknown suite {args.name!r}; choose from all, {', '.join(SUITE_NAMES)}")
    cfg = _config(args)
    results = run_suites(names, cfg, args.seed, _threads(args))
    out_dir = os.path.join(results_root(args), f"verify-{args.name}-seed{args.seed}")
    manifest = write_results(results, out_dir, cfg, args.seed)
    for r in results:
        print(f"{r.name}: {'PASS' if r.passed else 'FAIL'} violations={r.violations} "
              f"{json.dumps(r.summary()['fitted_constants'], sort_keys=True)}")
    print(os.path.join(out_dir, "manifest.json"))
    return 0 if all(s["passed"] for s in manifest["suites"].values()) else 1


def cmd_all(args) -> int:
    cfg = _config(args)
    norms_cfg = cfg.pop("norms", {})
    results = run_suites(SUITE_NAMES, cfg, args.seed, _threads(args))
    root = os.path.join(results_root(args), f"all-seed{args.seed}")
    manifest = write_results(results, root, cfg, args.seed)
    summary = _norms(norms_cfg, os.path.join(root, "norms"))
    for r in results:
        print(f"{r.name}: {'PASS' if r.passed else 'FAIL'} violations={r.violations}")
    print("norms: spreads " + json.dumps(round_sig([s["spread"] for s in summary["spreads"]])))
    return 0 if all(s["passed"] for s in manifest["suites"].values()) else 1


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--threads", type=int, default=0,
                        help="worker threads (default: machine parallelism); never changes output bytes")
    common.add_argument("--config", help="JSON object or path to a JSON file of parameter overrides")
    common.add_argument("--out", help="results root (default $GH_RESULTS_DIR or ./results)")

    parser = argparse.ArgumentParser(
        prog="gausshardy",
        description="Gaussian Hardy space h^1: operators, atoms, norms and verification suites.",
        epilog="exit codes: 0 ok, 1 verification failure, 2 malformed input/config, 3 precondition",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", parents=[common], help="grid CSV <-> Hermite expansion JSON")
    p.add_argument("--analyze", metavar="GRID.csv", help="grid with x1..xn,value,weight columns")
    p.add_argument("--synthesize", metavar="EXPANSION.json")
    p.add_argument("--degree", type=int, default=6, help="analysis degree (default 6)")
    p.add_argument("--points", metavar="GRID.csv", help="evaluation points for synthesis")
    p.add_argument("--rule-order", type=int, help="synthesize on a Gauss-Hermite tensor rule of this order")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_transform)

    ops = "; ".join(f"{k}: {', '.join(f'{a}={b}' for a, b in v.items())}" for k, v in _OPERATOR_PARAMS.items())
    p = sub.add_parser("operator", parents=[common], help="apply an operator to an expansion",
                       description=f"operators and default parameters: {ops}")
    p.add_argument("name", choices=OPERATORS)
    p.add_argument("--input", required=True, metavar="EXPANSION.json")
    p.add_argument("--params", help="JSON object of operator parameters")
    p.add_argument("--t", type=float, help="time for semigroup/gradient")
    p.add_argument("--path", help="spectral | kernel | both (semigroup); spectral | integral | both (riesz)")
    p.add_argument("--points", metavar="GRID.csv")
    p.add_argument("--rule-order", type=int)
    p.add_argument("-o", "--output", help="CSV, or JSON for spectral semigroup/riesz results")
    p.set_defaults(func=cmd_operator)

    for name, func, helptext in (("atom", cmd_atom, "generate a seeded tent atom"),
                                 ("molecule", cmd_molecule, "map an atom to a molecule and measure it")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--center", type=float, nargs="+")
        p.add_argument("--radius", type=float)
        p.add_argument("-o", "--output")
        if name == "molecule":
            p.add_argument("--atom", metavar="ATOM.json")
            p.add_argument("--N", type=int, default=1)
            p.add_argument("--alpha", type=float, default=36.0)
            p.add_argument("--j", type=int, default=0)
        p.set_defaults(func=func)

    p = sub.add_parser("norms", parents=[common], help="h1_max versus h1_quad norm-equivalence experiment",
                       description="config keys: n, a, a_primes, levels, seed")
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite",
                       description=f"suites: all, {', '.join(SUITE_NAMES)}. "
                                   "--config maps suite names to parameter overrides.")
    p.add_argument("name", help=f"all | {' | '.join(SUITE_NAMES)}")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("all", parents=[common], help="every suite plus the norm experiment")
    p.set_defaults(func=cmd_all)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.command not in _CONFIGURABLE and _config(args):
            raise InputError(f"config: {args.command} takes no configuration keys")
        return args.func(args)
    except (PreconditionError, ConstructionError, ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InputError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
