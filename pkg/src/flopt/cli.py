"""Command-line front end: ``flopt {run,check,compare}``.

Exit codes: 0 success, 1 bad input (or failed derivative check), 2 when a
run ends in ``Diverged`` or ``Error(...)``.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from .dynamics import GainConfig
from .integrate import Method, Scheme, SolverConfig, run
from .kernel import DeterministicRng
from .problem import ConstraintKind, validate_derivatives
from .suite import BUILTINS, quadratic_problem

__all__ = ["main", "build_parser", "load_qp_file", "qp_to_dict", "write_qp_file"]

METHODS = [m.value for m in Method]
MOMENTUM = {"fl-momentum"}
PI = {"fl-pi-exact", "fl-pi-diag"}
EQUALITY_ONLY = PI | {"momentum-sqp"}

# generator flags: dest -> (builtins accepting it, default)
GENERATOR_FLAGS = {
    "n": ({"random_qp", "sphere", "affine_qp"}, None),
    "m": ({"random_qp", "affine_qp"}, None),
    "kind": ({"random_qp"}, "eq"),
    "clients": ({"logistic"}, 5),
    "per_client": ({"logistic"}, 200),
    "d": ({"logistic"}, 10),
    "eps": ({"logistic"}, 0.05),
}
DEFAULT_SIZES = {"random_qp": {"n": 20, "m": 10}, "sphere": {"n": 3},
                 "affine_qp": {"n": 10, "m": 3}}
# x0 = gaussian draws from this offset of the problem seed
X0_STREAM = 0x5EED


class InputError(Exception):
    """Bad command-line input; reported with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------- QP files

def qp_to_dict(problem):
    """Serialize a quadratic instance (``info`` must hold ``Q, c, A, b``)."""
    try:
        Q, c, A, b = (problem.info[k] for k in ("Q", "c", "A", "b"))
    except KeyError:
        raise ValueError("only quadratic instances can be written as QP files") from None
    return {"kind": "qp", "constraint": problem.kind.value, "Q": np.asarray(Q).tolist(),
            "c": np.asarray(c).tolist(), "A": np.asarray(A).tolist(),
            "b": np.asarray(b).tolist()}


def write_qp_file(problem, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(qp_to_dict(problem), fh)


def _matrix(data, key, shape):
    arr = np.asarray(data[key], dtype=float)
    if arr.size == 0 and shape[0] == 0:
        arr = arr.reshape(shape)
    if arr.shape != shape:
        raise ValueError(f"{key} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{key} has non-finite entries")
    return arr


def load_qp_file(path):
    """Load ``{"kind":"qp","constraint":"eq"|"ineq","Q","c","A","b"}``.

    Dimensions are inferred from ``c`` and ``b`` and cross-checked.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or data.get("kind") != "qp":
        raise ValueError('problem file must be an object with "kind": "qp"')
    missing = [k for k in ("constraint", "Q", "c", "A", "b") if k not in data]
    if missing:
        raise ValueError(f"problem file lacks {missing}")
    if data["constraint"] not in ("eq", "ineq"):
        raise ValueError('"constraint" must be "eq" or "ineq"')
    try:
        c = np.asarray(data["c"], dtype=float).reshape(-1)
        b = np.asarray(data["b"], dtype=float).reshape(-1)
        n, m = c.size, b.size
        if n == 0:
            raise ValueError("c is empty")
        Q = _matrix(data, "Q", (n, n))
        A = _matrix(data, "A", (m, n))
        c = _matrix(data, "c", (n,))
        b = _matrix(data, "b", (m,))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad QP data: {exc}") from None
    name = os.path.splitext(os.path.basename(path))[0]
    return quadratic_problem(Q, c, A, b, ConstraintKind(data["constraint"]), name)


# ------------------------------------------------------------------ parsing

def _add_problem_args(p):
    src = p.add_argument_group("problem")
    which = src.add_mutually_exclusive_group(required=True)
    which.add_argument("--builtin", choices=sorted(BUILTINS))
    which.add_argument("--problem", metavar="FILE", help="QP problem JSON file")
    src.add_argument("--seed", type=int)
    src.add_argument("--n", type=int)
    src.add_argument("--m", type=int)
    src.add_argument("--kind", choices=["eq", "ineq"])
    src.add_argument("--clients", type=int)
    src.add_argument("--per-client", type=int)
    src.add_argument("--d", type=int)
    src.add_argument("--eps", type=float)


def _add_solver_args(p):
    s = p.add_argument_group("solver")
    s.add_argument("--scheme", choices=[x.value for x in Scheme], default="euler")
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--steps", type=int, default=1000)
    gains = s.add_mutually_exclusive_group()
    gains.add_argument("--k", type=float, help="uniform gain (default 1/dt)")
    gains.add_argument("--k-list", help="comma separated per-constraint gains")
    s.add_argument("--alpha", type=float, help="damping (fl-momentum, default 3)")
    s.add_argument("--beta", type=float, help="extrapolation (momentum-sqp, default 0)")
    s.add_argument("--kp", type=float, help="PI proportional gain (default K)")
    s.add_argument("--ki", type=float, help="PI integral gain (default 1)")
    s.add_argument("--tol", type=float, default=0.0, help="stop when KKT gap <= tol")
    s.add_argument("--record-every", type=int, default=1)
    s.add_argument("--x0", choices=["zeros", "gaussian"], default="zeros")


def build_parser():
    parser = _Parser(prog="flopt", description="Feedback-linearization constrained optimization")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="integrate one method and write its trace")
    _add_problem_args(p)
    p.add_argument("--method", required=True, choices=METHODS)
    _add_solver_args(p)
    p.add_argument("--out", metavar="CSV")
    p.add_argument("--summary", metavar="JSON")

    p = sub.add_parser("check", help="validate derivatives against finite differences")
    _add_problem_args(p)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--threshold", type=float, default=1e-4)

    p = sub.add_parser("compare", help="run several methods on one instance")
    _add_problem_args(p)
    p.add_argument("--methods", required=True, help="comma separated, at least two")
    _add_solver_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--summary", metavar="JSON", help="default OUT_DIR/summary.json")
    return parser


# --------------------------------------------------------------- resolution

def _problem_params(args):
    if args.problem is not None:
        used = [k for k in GENERATOR_FLAGS if getattr(args, k) is not None]
        if used:
            raise InputError(f"generator flags {used} need --builtin")
        return {}
    name = args.builtin
    if args.seed is None:
        raise InputError("--seed is required with --builtin")
    params = {}
    for key, (owners, default) in GENERATOR_FLAGS.items():
        value = getattr(args, key)
        if value is not None and name not in owners:
            raise InputError(f"--{key.replace('_', '-')} does not apply to {name}")
        if name in owners:
            if value is None:
                value = DEFAULT_SIZES.get(name, {}).get(key, default)
            params[key] = value
    return params


def load_problem(args):
    params = _problem_params(args)
    if args.problem is not None:
        try:
            return load_qp_file(args.problem), params
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot load {args.problem}: {exc}") from None
    gen = BUILTINS[args.builtin]
    kwargs = dict(params)
    if args.builtin == "logistic":
        kwargs = {"C": params["clients"], "per_client": params["per_client"],
                  "d": params["d"], "eps": params["eps"]}
    try:
        return gen(seed=args.seed, **kwargs), params
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _check_method(method, problem, args):
    if method in EQUALITY_ONLY and problem.kind is not ConstraintKind.EQUALITY:
        raise InputError(f"{method} needs equality constraints")
    if method == "fl-ineq" and problem.kind is not ConstraintKind.INEQUALITY:
        raise InputError("fl-ineq needs inequality constraints")
    if method == "momentum-sqp" and args.scheme != "euler":
        raise InputError("momentum-sqp is a discrete scheme; use --scheme euler")


def _check_flags(methods, args):
    ms = set(methods)
    if args.alpha is not None and not ms & MOMENTUM:
        raise InputError("--alpha applies only to fl-momentum")
    if args.beta is not None and "momentum-sqp" not in ms:
        raise InputError("--beta applies only to momentum-sqp")
    if (args.kp is not None or args.ki is not None) and not ms & PI:
        raise InputError("--kp/--ki apply only to fl-pi-exact and fl-pi-diag")
    if not args.dt > 0 or args.steps < 1 or args.record_every < 1 or args.tol < 0:
        raise InputError("need --dt > 0, --steps >= 1, --record-every >= 1, --tol >= 0")
    if args.beta is not None and not 0 <= args.beta < 1:
        raise InputError("--beta must lie in [0, 1)")
    if args.alpha is not None and args.alpha < 0:
        raise InputError("--alpha must be nonnegative")


def _gains(args, m, method):
    if args.k_list is not None:
        try:
            K = np.array([float(v) for v in args.k_list.split(",")])
        except ValueError:
            raise InputError("--k-list must be comma separated numbers") from None
        if K.size != m:
            raise InputError(f"--k-list has {K.size} entries, problem has {m} constraints")
    else:
        K = np.full(m, args.k if args.k is not None else 1.0 / args.dt)
    Kp = np.full(m, args.kp) if args.kp is not None else K
    ki = args.ki if args.ki is not None else (1.0 if method in PI else 0.0)
    alpha = args.alpha if args.alpha is not None else 3.0
    try:
        return GainConfig(K, alpha, Kp, np.full(m, ki))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _x0(args, problem):
    if args.x0 == "zeros":
        return np.zeros(problem.n)
    seed = args.seed if args.seed is not None else 0
    return DeterministicRng(seed + X0_STREAM).normal_array(problem.n)


def _config(args, method, problem):
    gains = _gains(args, problem.m, method)
    return SolverConfig(
        method=Method(method),
        scheme=Scheme(args.scheme),
        dt=args.dt,
        max_steps=args.steps,
        gains=gains,
        beta=args.beta if args.beta is not None else 0.0,
        stop_kkt_tol=args.tol,
        record_every=args.record_every,
    )


def _finite(v):
    return v if isinstance(v, (int, str)) or v is None or math.isfinite(v) else None


def _summary(method, args, params, config, trace, problem):
    g = config.gains
    echo = {
        "problem": args.problem if args.problem is not None else args.builtin,
        "problem_name": problem.name,
        **params,
        "n": problem.n,
        "m": problem.m,
        "constraint": problem.kind.value,
        "method": method,
        "scheme": config.scheme.value,
        "dt": config.dt,
        "steps": config.max_steps,
        "K": g.K.tolist(),
        "alpha": g.alpha,
        "beta": config.beta,
        "Kp": g.Kp.tolist(),
        "Ki": g.Ki.tolist(),
        "tol": config.stop_kkt_tol,
        "record_every": config.record_every,
        "x0": args.x0,
        "merit_coeff": trace.merit_coeff,
    }
    out = {"method": method, "scheme": config.scheme.value, "dt": config.dt}
    out.update({k: _finite(v) for k, v in trace.summary().items()})
    out["seed"] = args.seed
    out["config"] = echo
    return out


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _failed(trace):
    return trace.stop_reason == "Diverged" or trace.stop_reason.startswith("Error")


# ----------------------------------------------------------------- commands

def cmd_run(args):
    problem, params = load_problem(args)
    _check_flags([args.method], args)
    _check_method(args.method, problem, args)
    config = _config(args, args.method, problem)
    trace = run(problem, config, _x0(args, problem))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            trace.to_csv(fh)
    _write_json(args.summary, _summary(args.method, args, params, config, trace, problem))
    return 2 if _failed(trace) else 0


def cmd_check(args):
    problem, _ = load_problem(args)
    if args.samples < 1:
        raise InputError("--samples must be >= 1")
    report = validate_derivatives(problem, args.samples, threshold=args.threshold)
    print(report)
    return 0 if report.passed else 1


def _steps_to_tol(trace, tol):
    if not tol > 0:
        return None
    hit = np.flatnonzero(trace["kkt_gap"] <= tol)
    return int(trace["step"][hit[0]]) if hit.size else None


def cmd_compare(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if len(methods) < 2:
        raise InputError("--methods needs at least two methods")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise InputError(f"unknown methods {unknown}; choose from {METHODS}")
    if len(set(methods)) != len(methods):
        raise InputError("--methods lists a method twice")
    problem, params = load_problem(args)
    _check_flags(methods, args)
    for method in methods:
        _check_method(method, problem, args)
    os.makedirs(args.out_dir, exist_ok=True)
    x0 = _x0(args, problem)
    results = {}
    failed = False
    combined = []
    for method in methods:
        config = _config(args, method, problem)
        trace = run(problem, config, x0)
        failed |= _failed(trace)
        with open(os.path.join(args.out_dir, f"{method}.csv"), "w", encoding="utf-8",
                  newline="") as fh:
            trace.to_csv(fh)
        text = trace.to_csv(extra=("method", method))
        combined.append(text if not combined else text.split("\n", 1)[1])
        entry = _summary(method, args, params, config, trace, problem)
        entry["steps_to_tol"] = _steps_to_tol(trace, args.tol)
        results[method] = entry
    with open(os.path.join(args.out_dir, "combined.csv"), "w", encoding="utf-8",
              newline="") as fh:
        fh.write("".join(combined))
    summary = {
        "methods": methods,
        "seed": args.seed,
        "tol": args.tol,
        "best_kkt_gap": {m: r["best_kkt_gap"] for m, r in results.items()},
        "steps_to_tol": {m: r["steps_to_tol"] for m, r in results.items()},
        "runs": results,
    }
    _write_json(args.summary or os.path.join(args.out_dir, "summary.json"), summary)
    return 2 if failed else 0


COMMANDS = {"run": cmd_run, "check": cmd_check, "compare": cmd_compare}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"flopt {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"flopt {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
