"""Command-line front end.

Exit status is 0 on pass, 1 on a fail verdict and 2 on errors.  Every JSON
report carries the schema tag, the solver configuration and the zero-tolerance
rule; per-subset tables go to CSV.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import atoms, zoo
from .certificate import Verdict, to_jsonable
from .diagnostics import existence_check_dual, existence_check_primal, svm_separability
from .enumeration import DEFAULT_CAP, brute_force_grid, compute_thresholds, enumerate_global, mu_rule_holds, select_mu
from .model import DUAL_SIDE, PRIMAL_SIDE, derive_dual, objective_eval, primal_from_json, primal_to_json, with_mu
from .splitting import SolverConfig
from .stationarity import (CorrespondenceError, check_stationary_dual, check_stationary_primal, dual_to_primal,
                           primal_to_dual)

SCHEMA = "ccopt-v1"
ZERO_TOL_RULE = {"relative": 1e-8, "rule": "1e-8 * (1 + max |entry|)"}


class InputError(Exception):
    pass


def _load_json(path, what):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {what} {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _load_model(path):
    obj = _load_json(path, "model")
    try:
        return primal_from_json(obj)
    except KeyError as exc:
        raise InputError(f"{path}: {exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid model: {exc}") from exc


def _load_point(path):
    obj = _load_json(path, "point")
    if isinstance(obj, dict):
        if "point" not in obj:
            raise InputError(f"{path}: missing field 'point'")
        obj = obj["point"]
    try:
        return np.asarray(obj, dtype=float).ravel()
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: field 'point' is not a numeric vector") from exc


def _side_model(which, path):
    p, mu = _load_model(path)
    return (p, None) if which == PRIMAL_SIDE else (derive_dual(p, mu), p)


def _config(args):
    return SolverConfig(tol=args.tol, max_iter=args.max_iter, divergence_threshold=args.divergence_threshold)


def _emit(args, payload, csv_text=None):
    payload = {"schema": SCHEMA, "command": args.command, "config": dataclasses.asdict(_config(args)),
               "zero_tol": ZERO_TOL_RULE, **payload}
    text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.with_suffix(".json").write_text(text + "\n")
        if csv_text is not None:
            out.with_suffix(".csv").write_text(csv_text)
    else:
        print(text)


def _status(passed):
    return 0 if passed else 1


def cmd_solve(args):
    model, _ = _side_model(args.which, args.model)
    report = enumerate_global(args.which, model, cap=args.cap, cfg=_config(args))
    _emit(args, {"report": report.to_json()}, report.to_csv())
    return _status(report.attained)


def cmd_check_stationary(args):
    model, _ = _side_model(args.which, args.model)
    point = _load_point(args.point)
    check = check_stationary_primal if args.which == PRIMAL_SIDE else check_stationary_dual
    cert = check(model, point, args.stationarity_tol, _config(args))
    _emit(args, {"certificate": cert.to_json()})
    return _status(cert.passed)


def cmd_correspond(args):
    p, mu = _load_model(args.model)
    point = _load_point(args.point)
    try:
        if args.direction == "p2d":
            image, gap = primal_to_dual(p, point, mu, args.stationarity_tol)
            values = {"F": objective_eval(PRIMAL_SIDE, p, point).value}
        else:
            image, gap = dual_to_primal(derive_dual(p, mu), point, args.stationarity_tol)
            values = {"F": objective_eval(PRIMAL_SIDE, p, image).value}
    except CorrespondenceError as exc:
        _emit(args, {"verdict": Verdict.FAIL, "message": str(exc)})
        return 1
    _emit(args, {"verdict": Verdict.PASS, "image": image, "value_residual": gap, **values})
    return 0


def cmd_separability(args):
    data = _load_json(args.data, "data")
    missing = [k for k in ("points", "labels") if k not in data]
    if missing:
        raise InputError(f"{args.data}: missing field(s) {', '.join(missing)}")
    cert = svm_separability(data["points"], data["labels"])
    _emit(args, {"certificate": cert.to_json()})
    return _status(cert.passed)


def _parse_support(text, r):
    try:
        idx = sorted({int(s) for s in text.split(",") if s.strip()})
    except ValueError as exc:
        raise InputError(f"--support must be comma-separated integers, got {text!r}") from exc
    if any(i < 0 or i >= r for i in idx):
        raise InputError(f"--support indices must lie in 0..{r - 1}")
    return tuple(idx)


def cmd_mu_select(args):
    p, mu0 = _load_model(args.model)
    dual = derive_dual(p, mu0)
    T = _parse_support(args.support, p.r)
    cfg = _config(args)
    report = enumerate_global(DUAL_SIDE, dual, cap=args.cap, cfg=cfg)
    reference = report.record(T).point
    th = compute_thresholds(dual, T, cfg, report, reference)
    mu = select_mu(th, p.r, args.slack)
    reweighted = enumerate_global(DUAL_SIDE, with_mu(dual, mu), cap=args.cap, cfg=cfg)
    ref_value = objective_eval(DUAL_SIDE, with_mu(dual, mu), reference).value
    attained = bool(reweighted.attained and abs(reweighted.best_value - ref_value) <= 1e-6 * (1 + abs(ref_value)))
    holds = mu_rule_holds(th, mu)
    _emit(args, {"mu": mu, "thresholds": {"eta0": th.eta0, "eta1": th.eta1, "eta2": th.eta2, "T_star": th.T_star},
                 "rule_holds": holds, "reference_point": reference, "reference_value": ref_value,
                 "global_value": reweighted.best_value, "reference_is_global": attained})
    return _status(holds and attained)


def cmd_exists(args):
    p, _ = _load_model(args.model)
    cert = existence_check_primal(p) if args.which == PRIMAL_SIDE else existence_check_dual(p)
    _emit(args, {"certificate": cert.to_json()})
    if cert.verdict is Verdict.INDETERMINATE:
        return 1
    return _status(cert.passed)


def _demo_instance(example, rng_seed):
    """(params, grid box or None) for a small instance of each example."""
    rng = np.random.default_rng(rng_seed)
    if example in ("heaviside_svm", "sparse_svm_dual"):
        kind = "separable_2class" if rng_seed % 2 == 0 else "nonseparable_2class"
        data = zoo.generate_data(kind, {"dim": 2, "n": 6}, rng_seed)
        return {"points": data["points"], "labels": data["labels"]}, None
    if example == "edge_denoising":
        beta = zoo.generate_data("piecewise_signal", {"n": 3, "sigma": 0.3, "levels": [0.0, 2.0]}, rng_seed)["beta"]
        return {"beta": beta, "lam": 0.5}, (beta.min() - 1.0, beta.max() + 1.0)
    if example == "calcium":
        beta = zoo.generate_data("spike_train", {"n": 3, "rate": 0.5, "sigma": 0.3}, rng_seed)["beta"]
        return {"beta": beta, "lam": 0.5}, (0.0, max(beta.max(), 0.0) + 1.0)
    D = zoo.difference_operator(3, zoo.line_graph(3))
    params = {"A": np.eye(3) + 0.2 * rng.standard_normal((3, 3)), "a": rng.uniform(0, 2, 3), "D": D, "lam": 0.5}
    if example == "energy_min":
        params["gamma"] = 3.0
    return params, (0.0, 3.0)


def cmd_demo(args):
    if args.example not in zoo.EXAMPLES:
        raise InputError(f"unknown example {args.example!r}; choose from {', '.join(zoo.EXAMPLES)}")
    seed = args.seed
    params, box = _demo_instance(args.example, seed)
    model = zoo.build_example(args.example, params)
    cfg = _config(args)
    payload = {"example": args.example, "seed": seed, "params": params}
    if args.example in ("heaviside_svm", "sparse_svm_dual"):
        p = model.primal if args.example == "sparse_svm_dual" else model
        sep = svm_separability(params["points"], params["labels"])
        report = enumerate_global(DUAL_SIDE, derive_dual(p), cap=args.cap, cfg=cfg)
        ok = sep.passed == report.attained
        payload.update(model=primal_to_json(p), separability=sep.to_json(), report=report.to_json(),
                       cross_check={"separable_iff_attained": ok})
        _emit(args, payload, report.to_csv())
        return _status(ok)
    report = enumerate_global(PRIMAL_SIDE, model, cap=args.cap, cfg=cfg)
    points = 61
    grid = brute_force_grid(PRIMAL_SIDE, model, box, points)
    spacing = (box[1] - box[0]) / (points - 1)
    corner = np.maximum(np.abs(box[0]), np.abs(box[1])) * np.ones(model.n)
    norm_a = np.linalg.norm(model.A, 2)
    if model.g.kind == atoms.L1:
        lipschitz = norm_a * np.sqrt(model.m)
    else:
        lipschitz = norm_a * (norm_a * np.linalg.norm(corner) + np.linalg.norm(model.g.params["center"]))
    bound = 2.0 * spacing * lipschitz
    ok = report.attained and report.best_value <= grid + 1e-9 and grid - report.best_value <= bound
    payload.update(model=primal_to_json(model), report=report.to_json(),
                   cross_check={"grid_value": grid, "grid_points_per_axis": points, "grid_box": box,
                                "bound": bound, "agrees": ok})
    _emit(args, payload, report.to_csv())
    return _status(ok)


def build_parser():
    parser = argparse.ArgumentParser(prog="ccopt", description="Global solutions and stationarity certificates "
                                     "for composite cardinality problems and their stationary duals.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-8, help="QP solver tolerance")
    common.add_argument("--max-iter", type=int, default=100000)
    common.add_argument("--divergence-threshold", type=float, default=1e6)
    common.add_argument("--stationarity-tol", type=float, default=None,
                        help="pass threshold (default 1e-7 * (1 + data scale))")
    common.add_argument("--cap", type=int, default=DEFAULT_CAP, help="largest r accepted for enumeration")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write PREFIX.json (and PREFIX.csv) instead of printing")
    sub = parser.add_subparsers(dest="command", required=True)

    def side(p):
        p.add_argument("--which", choices=(PRIMAL_SIDE, DUAL_SIDE), required=True)

    p = sub.add_parser("solve", parents=[common], help="global value by subset enumeration")
    side(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check-stationary", parents=[common], help="stationarity certificate for a point")
    side(p)
    p.add_argument("--model", required=True)
    p.add_argument("--point", required=True)
    p.set_defaults(func=cmd_check_stationary)

    p = sub.add_parser("correspond", parents=[common], help="map stationary points between primal and dual")
    p.add_argument("--direction", choices=("p2d", "d2p"), required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--point", required=True)
    p.set_defaults(func=cmd_correspond)

    p = sub.add_parser("separability", parents=[common], help="linear separability with margin 1")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_separability)

    p = sub.add_parser("mu-select", parents=[common], help="dual weights making a reference point global")
    p.add_argument("--model", required=True)
    p.add_argument("--support", required=True, help='comma-separated 0-based indices, e.g. "0,2"')
    p.add_argument("--slack", type=float, default=0.25)
    p.set_defaults(func=cmd_mu_select)

    p = sub.add_parser("exists", parents=[common], help="sufficient conditions for a global solution")
    side(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_exists)

    p = sub.add_parser("demo", parents=[common], help="build, solve and cross-check an example")
    p.add_argument("--example", required=True, choices=zoo.EXAMPLES)
    p.set_defaults(func=cmd_demo)
    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
