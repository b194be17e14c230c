"""Command-line front end.

Every subcommand writes one record per result, as JSON lines (default) or
CSV.  Output is a pure function of the arguments: wall-clock timings are
only recorded with ``--timing`` and the thread count never changes values.

Exit codes: 0 on success, 1 when ``validate`` reports a failing criterion,
2 on invalid arguments.
"""

from __future__ import annotations

import argparse
import cmath
import csv
import io
import json
import math
import os
import sys
import time
import warnings

from .asymptotics import (
    boundary_cumulant_sweep,
    clt_params_boundary,
    clt_params_origin,
    strong_approx,
    weak_approx,
)
from .errors import ConvergenceWarning, DomainError, InsufficientNodesError
from .partitions import exact_moment, noninteger_moment
from .quadrature import (
    RULES,
    QuadratureSpec,
    duality_moment_general,
    duality_moment_mc,
    odd_moment_real,
)
from .sampling import SAMPLERS, MomentQuery, mc_moment
from .special_functions import (
    HAAR_GROUPS,
    EnsembleSpec,
    boundary_moment,
    haar_group_moment,
    logdet_mgf,
)
from .validation import CRITERIA, run_criterion

__all__ = ["main", "run", "build_parser", "CSV_COLUMNS", "THREADS_ENV"]

CSV_COLUMNS = ("command", "beta", "N", "M", "order", "x_re", "x_im",
               "value", "stderr", "method", "runtime_ms")
THREADS_ENV = "TRUNCHAR_THREADS"


class UsageError(Exception):
    """Invalid command-line input; reported with exit status 2."""


# ---------------------------------------------------------------- parsing

def parse_complex(text) -> complex:
    """Parse ``a``, ``a+bi``, ``bi`` or ``a-bj``."""
    s = str(text).strip().replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a complex number") from None


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonnegative_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {v}")
    return v


def _finite_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a real number, got {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _float_list(text):
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one value")
    return vals


def _int_list(text):
    try:
        vals = [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("expected positive integers")
    return vals


def _default_threads():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        v = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if v < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p):
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl",
                   help="output format (default: jsonl)")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock runtime_ms (otherwise null)")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or 1); never changes results")


def _add_ensemble(p, need_n=True):
    p.add_argument("--beta", type=int, choices=(1, 2, 4), required=True)
    if need_n:
        p.add_argument("--n", type=_positive_int, required=True, help="group size N")
    p.add_argument("--m", type=_positive_int, required=True, help="truncation size M")


def _add_point(p):
    p.add_argument("--x", type=parse_complex, default=None, help="evaluation point, e.g. 0.5+0.2i")
    p.add_argument("--x-mod", type=_finite_float, default=None, help="|x|")
    p.add_argument("--x-arg", type=_finite_float, default=None, help="arg(x) in radians")


def _add_order(p, allow_gamma=True):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("-k", type=_nonnegative_int, help="moment index k, order 2k")
    if allow_gamma:
        g.add_argument("--gamma", type=_finite_float, help="real moment order")


def _add_quadrature(p):
    p.add_argument("--nodes", type=_positive_int, default=None, help="nodes per dimension")
    p.add_argument("--rule", choices=RULES, default="gauss_jacobi")
    p.add_argument("--mc-samples", type=_positive_int, default=200_000)
    p.add_argument("--seed", type=_nonnegative_int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trunchar",
                     description="Moments of characteristic polynomials of truncated Haar matrices.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("exact", help="partition series")
    _add_ensemble(p)
    _add_order(p)
    _add_point(p)
    p.add_argument("--weight-cap", type=_positive_int, default=60,
                   help="largest partition weight for non-integer orders")
    _add_common(p)

    p = sub.add_parser("duality", help="k-fold dual integral by quadrature")
    _add_ensemble(p)
    _add_order(p, allow_gamma=False)
    _add_point(p)
    p.add_argument("--sigma", type=_float_list, default=None,
                   help="comma-separated eigenvalues of Sigma = V V^T")
    p.add_argument("--odd", action="store_true", help="odd moment of order 2k+1 (beta=1)")
    _add_quadrature(p)
    _add_common(p)

    p = sub.add_parser("mc", help="Monte Carlo estimate")
    _add_ensemble(p)
    _add_order(p)
    _add_point(p)
    p.add_argument("--sampler", choices=SAMPLERS, default="haar")
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=_nonnegative_int, default=0)
    _add_common(p)

    p = sub.add_parser("boundary", help="closed-form Gamma products")
    p.add_argument("--beta", type=int, choices=(1, 2, 4), default=None)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--m", type=_positive_int, default=None)
    p.add_argument("--gamma", type=_finite_float, required=True)
    p.add_argument("--theta", type=_finite_float, default=0.0)
    p.add_argument("--group", choices=HAAR_GROUPS, default=None,
                   help="moment over a full compact group instead of a truncation")
    p.add_argument("--origin", action="store_true", help="E|det A|^gamma instead of the boundary")
    _add_common(p)

    p = sub.add_parser("asympt", help="leading-order asymptotics")
    p.add_argument("--regime", choices=("weak", "strong"), required=True)
    p.add_argument("--beta", type=int, choices=(1, 2, 4), required=True)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, default=None, help="N (strong regime)")
    p.add_argument("--kappa", type=_nonnegative_int, default=None, help="N - M (weak regime)")
    p.add_argument("-k", type=_positive_int, required=True)
    _add_point(p)
    p.add_argument("--u", type=_finite_float, default=None, help="|x|^2 = 1 - 2u/M (weak regime)")
    p.add_argument("--nodes", type=_positive_int, default=None)
    _add_common(p)

    p = sub.add_parser("clt", help="limit-theorem parameters and cumulant sweeps")
    p.add_argument("--beta", type=int, choices=(1, 2, 4), required=True)
    p.add_argument("--regime", choices=("weak", "strong", "origin"), default="weak")
    p.add_argument("--mu", type=_finite_float, default=None, help="limiting M/N (strong)")
    p.add_argument("--m", type=_positive_int, default=None)
    p.add_argument("--n", type=_positive_int, default=None)
    p.add_argument("--sweep", type=_int_list, default=None,
                   help="comma-separated M values: exact boundary cumulants at fixed kappa")
    p.add_argument("--kappa", type=_nonnegative_int, default=1)
    _add_common(p)

    p = sub.add_parser("validate", help="run the acceptance grid")
    p.add_argument("--criteria", type=_int_list, default=None,
                   help=f"comma-separated subset of 1..{len(CRITERIA)}")
    p.add_argument("--seed", type=_nonnegative_int, default=0)
    p.add_argument("--text", action="store_true", help="human-readable lines instead of records")
    _add_common(p)
    return parser


# ---------------------------------------------------------------- records

def _record(command, params, value, stderr=None, method="", runtime_ms=None):
    return {"command": command, "parameters": params, "value": value,
            "stderr": stderr, "method": method, "runtime_ms": runtime_ms}


def _x_params(x):
    return {"x_re": x.real, "x_im": x.imag}


def _resolve_x(args, beta, default=0j):
    has_polar = args.x_mod is not None or args.x_arg is not None
    if args.x is not None and has_polar:
        raise UsageError("give either --x or --x-mod/--x-arg, not both")
    if has_polar:
        if args.x_mod is None:
            raise UsageError("--x-arg needs --x-mod")
        if args.x_mod < 0:
            raise UsageError(f"--x-mod must be nonnegative, got {args.x_mod}")
        theta = args.x_arg or 0.0
        if beta == 1 and math.remainder(theta, math.pi) != 0:
            raise UsageError("beta=1 needs a real x: --x-arg must be 0 or pi")
        x = cmath.rect(args.x_mod, theta)
        if beta == 1:
            x = complex(math.copysign(args.x_mod, x.real) if args.x_mod else 0.0, 0.0)
        return x
    x = default if args.x is None else args.x
    if x.imag != 0 and beta == 1:
        raise UsageError("beta=1 needs a real x (nonzero imaginary part given)")
    if x.imag != 0 and beta == 4:
        raise UsageError("beta=4 needs a real quaternion scalar in --x; "
                         "give a phase with --x-mod/--x-arg")
    return x


def _spec(args):
    if args.m > args.n:
        raise UsageError(f"truncation size M={args.m} exceeds N={args.n}")
    return EnsembleSpec(args.beta, args.n, args.m)


def _order(args):
    if getattr(args, "gamma", None) is not None:
        return float(args.gamma)
    return 2 * args.k


def _base_params(spec, order, x):
    params = {"beta": spec.beta, "N": spec.n_total, "M": spec.m_trunc, "order": order}
    if x is not None:
        params.update(_x_params(x))
    return params


def cmd_exact(args, threads):
    spec = _spec(args)
    x = _resolve_x(args, spec.beta)
    if args.gamma is not None and not float(args.gamma).is_integer():
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            est = noninteger_moment(spec, args.gamma, x, weight_cap=args.weight_cap)
        params = _base_params(spec, float(args.gamma), x)
        params["weight_cap"] = args.weight_cap
        params["tail_bound"] = est.tail_bound if math.isfinite(est.tail_bound) else None
        params["converged"] = not caught
        return [_record("exact", params, est.value, None, "partition_series")]
    order = _order(args)
    if order % 2:
        raise UsageError("exact series needs an even order 2k; use --gamma with |x| > 1 "
                         "for other real orders")
    k = int(order) // 2
    poly = exact_moment(spec, k)
    return [_record("exact", _base_params(spec, order, x), float(poly(x)), None, "partition_series")]


def _quad(args):
    return QuadratureSpec(nodes_per_dim=args.nodes, rule=args.rule,
                          mc_samples=args.mc_samples, seed=args.seed)


def cmd_duality(args, threads):
    spec = _spec(args)
    x = _resolve_x(args, spec.beta)
    q = _quad(args)
    k = args.k
    params = _base_params(spec, 2 * k + 1 if args.odd else 2 * k, x)
    params["rule"] = q.rule
    if args.sigma is not None:
        params["sigma"] = args.sigma
    if args.odd:
        if spec.beta != 1:
            raise UsageError("--odd requires --beta 1")
        value = odd_moment_real(spec, k, x.real, args.sigma, q)
        return [_record("duality", params, value, None, "dual_integral_odd")]
    if k < 1:
        raise UsageError("duality needs k >= 1")
    if q.rule == "ordered_simplex_mc":
        est = duality_moment_mc(spec, k, x, args.sigma, q)
        params["seed"] = args.seed
        params["samples"] = args.mc_samples
        return [_record("duality", params, est.mean, est.stderr, "dual_integral_mc")]
    value = duality_moment_general(spec, k, x, args.sigma, q)
    return [_record("duality", params, value, None, "dual_integral")]


def cmd_mc(args, threads):
    spec = _spec(args)
    default = 1 + 0j if args.sampler == "bhny" else 0j
    x = _resolve_x(args, spec.beta, default)
    order = _order(args)
    if args.samples < 2:
        raise UsageError("--samples must be at least 2")
    est = mc_moment(spec, MomentQuery(order, x), args.samples, seed=args.seed,
                    sampler=args.sampler, workers=threads)
    params = _base_params(spec, order, x)
    params.update({"sampler": args.sampler, "samples": args.samples, "seed": args.seed})
    return [_record("mc", params, est.mean, est.stderr, f"mc_{args.sampler}")]


def cmd_boundary(args, threads):
    g = args.gamma
    if args.group is not None:
        value = haar_group_moment(args.group, args.n, g).value
        params = {"group": args.group, "N": args.n, "order": g}
        return [_record("boundary", params, value, None, "gamma_product")]
    if args.beta is None or args.m is None:
        raise UsageError("boundary needs --beta and --m (or --group)")
    spec = _spec(args)
    params = _base_params(spec, g, None)
    if args.origin:
        value = logdet_mgf(spec, g).value
        params.update(_x_params(0j))
        return [_record("boundary", params, value, None, "gamma_product_origin")]
    params.update(_x_params(cmath.exp(1j * args.theta)))
    params["theta"] = args.theta
    value = boundary_moment(spec, g, args.theta).value
    return [_record("boundary", params, value, None, "gamma_product")]


def cmd_asympt(args, threads):
    q = QuadratureSpec(nodes_per_dim=args.nodes)
    if args.regime == "strong":
        if args.n is None:
            raise UsageError("the strong regime needs --n")
        spec = _spec(args)
        x = _resolve_x(args, spec.beta)
        params = _base_params(spec, 2 * args.k, x)
        params["mu"] = spec.mu
        value = strong_approx(spec, args.k, x, q)
        return [_record("asympt", params, value, None, "strong_leading_order(mu=M/N)")]
    if args.kappa is None or args.u is None:
        raise UsageError("the weak regime needs --kappa and --u")
    if args.u <= 0:
        raise UsageError(f"--u must be positive, got {args.u}")
    if 2 * args.u > args.m:
        raise UsageError("--u must satisfy 2u <= M so that |x|^2 = 1 - 2u/M >= 0")
    spec = EnsembleSpec(args.beta, args.m + args.kappa, args.m)
    x = complex(math.sqrt(1 - 2 * args.u / args.m))
    params = _base_params(spec, 2 * args.k, x)
    params.update({"kappa": args.kappa, "u": args.u})
    value = weak_approx(args.beta, args.kappa, args.k, args.u, args.m, q)
    return [_record("asympt", params, value, None, "weak_leading_order")]


def cmd_clt(args, threads):
    beta = args.beta
    if args.sweep is not None:
        out = []
        for row in boundary_cumulant_sweep(beta, args.kappa, args.sweep):
            params = {"beta": beta, "N": row["M"] + args.kappa, "M": row["M"], "order": 2,
                      "kappa": args.kappa, "mean": row["mean"], "third": row["third"],
                      "skewness": row["skewness"], "variance_ratio": row["variance_ratio"]}
            out.append(_record("clt", params, row["variance"], None, "boundary_cumulants"))
        return out
    if args.regime == "origin":
        if args.n is None or args.m is None:
            raise UsageError("the origin regime needs --n and --m")
        spec = _spec(args)
        p = clt_params_origin(spec)
        params = {"beta": beta, "N": spec.n_total, "M": spec.m_trunc}
    elif args.regime == "strong":
        if args.mu is None:
            raise UsageError("the strong regime needs --mu")
        p = clt_params_boundary(beta, "strong", args.mu)
        params = {"beta": beta, "mu": args.mu}
    else:
        p = clt_params_boundary(beta, "weak", m_trunc=args.m)
        params = {"beta": beta}
        if args.m is not None:
            params["M"] = args.m
    params.update({"e_beta": p.e_beta, "v_beta": p.v_beta, "mean": p.mean, "regime": p.regime})
    return [_record("clt", params, p.variance, None, "clt_params")]


def cmd_validate(args, threads):
    numbers = args.criteria or sorted(CRITERIA)
    bad = [n for n in numbers if n not in CRITERIA]
    if bad:
        raise UsageError(f"unknown criteria {bad}; valid: 1..{len(CRITERIA)}")
    records = []
    for n in numbers:
        res = run_criterion(n, seed=args.seed, workers=threads)
        params = {"criterion": n, "title": res.title, "detail": res.detail, "passed": res.passed}
        rec = _record("validate", params, 1.0 if res.passed else 0.0, None, "acceptance")
        rec["_line"] = res.line(timing=args.timing)
        rec["_seconds"] = res.seconds
        records.append(rec)
    return records


COMMANDS = {
    "exact": cmd_exact,
    "duality": cmd_duality,
    "mc": cmd_mc,
    "boundary": cmd_boundary,
    "asympt": cmd_asympt,
    "clt": cmd_clt,
    "validate": cmd_validate,
}


# ---------------------------------------------------------------- output

def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_json_safe(x) for x in v]
    return v


def _csv_row(rec):
    p = rec["parameters"]
    return [rec["command"], p.get("beta", ""), p.get("N", ""), p.get("M", ""),
            p.get("order", p.get("criterion", "")), p.get("x_re", ""), p.get("x_im", ""),
            rec["value"], "" if rec["stderr"] is None else rec["stderr"], rec["method"],
            "" if rec["runtime_ms"] is None else rec["runtime_ms"]]


def _emit(records, fmt, out, text=False):
    if text:
        for rec in records:
            out.write(rec["_line"] + "\n")
        return
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(_csv_row(rec))
        out.write(buf.getvalue())
        return
    for rec in records:
        clean = {k: v for k, v in rec.items() if not k.startswith("_")}
        out.write(json.dumps(_json_safe(clean), allow_nan=False) + "\n")


def run(argv=None, out=None, err=None) -> int:
    """Run the CLI; returns the exit status."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        threads = args.threads if args.threads is not None else _default_threads()
        start = time.perf_counter()
        records = COMMANDS[args.command](args, threads)
        elapsed_ms = int(round(1000 * (time.perf_counter() - start)))
    except UsageError as exc:
        err.write(f"trunchar: error: {exc}\n")
        return 2
    except (DomainError, InsufficientNodesError) as exc:
        err.write(f"trunchar: error: precondition violated: {exc}\n")
        return 2
    if args.timing:
        for rec in records:
            if "_seconds" in rec:
                rec["runtime_ms"] = int(round(1000 * rec["_seconds"]))
            else:
                rec["runtime_ms"] = elapsed_ms
    _emit(records, args.format, out, text=getattr(args, "text", False))
    if args.command == "validate":
        return 0 if all(r["parameters"]["passed"] for r in records) else 1
    return 0


def main(argv=None):
    sys.exit(run(argv))
