"""Command-line front end: ``bridgegap <command> [flags]``.

Exit status is 0 on success, 1 when a computation fails and 2 on a usage
error.  CSV output uses LF line endings and a plain decimal point; JSON
output carries every parameter needed to repeat the run.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from decimal import Decimal
from fractions import Fraction

import mpmath

from . import __version__
from .distribution import cdf_many, quantile
from .errors import BridgeGapError
from .montecarlo import chunk_rng, mc_cdf, mc_sample, simulate_bridge_majorant
from .precision import DEFAULT_BITS, make_context
from .reference import compare_tables
from .stehfest import gs_invert, gs_weights, min_bits_for

__all__ = ["main", "build_parser", "format_value", "max_digits"]

COMMANDS = ("cdf", "table", "quantile", "mc-cdf", "mc-sample", "gs-selftest", "paths", "compare")
SELFTEST_K = (10, 30, 60, 100)


class UsageError(Exception):
    pass


def max_digits(bits: int) -> int:
    return math.floor(bits * math.log10(2)) - 10


def format_value(v, digits: int = 12) -> str:
    """``digits`` significant digits, always in d.ddd...e<exp> form."""
    if not hasattr(v, "_mpf_"):
        # plain numbers only; context mpf values keep their full precision
        v = mpmath.mpf(v)
    s = mpmath.nstr(v, digits, min_fixed=1, max_fixed=0, strip_zeros=False)
    if "e" not in s:
        s += "e0"
    return s.replace("e+", "e")


def _float_text(v: float) -> str:
    return repr(float(v))


def _grid(start: str, end: str, step: str) -> list[str]:
    a, b, h = Decimal(start), Decimal(end), Decimal(step)
    if h <= 0 or b < a:
        raise UsageError("grid needs step > 0 and end >= start")
    n = int((b - a) / h + Decimal("1e-9"))
    places = max(-a.as_tuple().exponent, -h.as_tuple().exponent, 0)
    return [str((a + i * h).quantize(Decimal(1).scaleb(-places))) for i in range(n + 1)]


def _threads_value(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("BM_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"BM_THREADS must be a positive integer, got {env!r}")
        if n < 1:
            raise UsageError("BM_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bridgegap", description="cdf, quantiles and Monte Carlo for the bridge/majorant gap M")
    parser.add_argument("--version", action="version", version=f"bridgegap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, eps_default):
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--threads", type=_positive_int, default=None, help="worker count (env BM_THREADS)")
        p.add_argument("--digits", type=_positive_int, default=12)
        p.add_argument("--bits", type=int, default=DEFAULT_BITS)
        p.add_argument("--eps", type=_positive_float, default=eps_default)

    def gs(p):
        p.add_argument("--K", type=_positive_int, default=100)
        p.add_argument("--fixed-N", dest="fixed_n", type=_positive_int, default=None)

    p = sub.add_parser("cdf", help="P(M <= x) at one or more points")
    p.add_argument("--x", required=True, nargs="+")
    gs(p)
    common(p, 1e-60)

    p = sub.add_parser("table", help="cdf on a regular grid")
    p.add_argument("--start", default="0.33")
    p.add_argument("--end", default="2.54")
    p.add_argument("--step", default="0.01")
    gs(p)
    common(p, 1e-60)

    p = sub.add_parser("quantile", help="x with P(M <= x) = p, by bisection")
    p.add_argument("--p", required=True, nargs="+", type=float)
    p.add_argument("--tol", type=_positive_float, default=1e-7, help="stop once |F(x) - p| < tol")
    gs(p)
    common(p, 1e-60)

    p = sub.add_parser("mc-cdf", help="stick-breaking Monte Carlo estimate of P(M <= x)")
    p.add_argument("--x", required=True, nargs="+", type=_positive_float)
    p.add_argument("--C", type=_positive_int, default=10**5)
    p.add_argument("--J", type=_positive_int, default=None, help="stick count (default from eps)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    common(p, 1e-3)

    p = sub.add_parser("mc-sample", help="draws of M from the Donsker sampler")
    p.add_argument("--J", type=_positive_int, default=100)
    p.add_argument("--N", type=_positive_int, default=10**4)
    p.add_argument("--C", type=_positive_int, default=10**4)
    p.add_argument("--seed", type=int, default=0)
    common(p, 1e-3)

    p = sub.add_parser("gs-selftest", help="weight identities and the inversion error law")
    p.add_argument("--K", type=_positive_int, nargs="+", default=list(SELFTEST_K))
    common(p, 1e-60)

    p = sub.add_parser("paths", help="bridge paths on a dyadic grid with their concave majorants")
    p.add_argument("--mesh", type=int, default=12, help="grid mesh 2^-mesh")
    p.add_argument("--C", type=_positive_int, default=1, help="number of paths; more than one prints max gaps")
    p.add_argument("--seed", type=int, default=0)
    common(p, 1e-3)

    p = sub.add_parser("compare", help="compare an x,value table with the bundled reference")
    p.add_argument("computed")
    p.add_argument("--reference", default="bundled", help="'bundled' or a CSV file")
    p.add_argument("--tol", type=_positive_float, default=5e-12, help="relative tolerance for x >= 0.40")
    common(p, 1e-60)
    return parser


def _validate(args) -> None:
    if args.bits < 64:
        raise UsageError("--bits must be at least 64")
    if args.digits > max_digits(args.bits):
        raise UsageError(f"--digits {args.digits} exceeds the {max_digits(args.bits)} digits justified at {args.bits} bits")
    if getattr(args, "K", None) is not None and args.command in ("cdf", "table", "quantile"):
        if args.K > 512:
            raise UsageError("--K must be at most 512")
        if args.bits < min_bits_for(args.K):
            raise UsageError(f"--K {args.K} needs --bits >= {min_bits_for(args.K)}")
        if not args.eps < 1:
            raise UsageError("--eps must be below 1")
    if args.command in ("cdf", "table"):
        xs = args.x if args.command == "cdf" else _grid(args.start, args.end, args.step)
        try:
            vals = [Decimal(x) for x in xs]
        except ArithmeticError:
            raise UsageError("--x values must be decimal numbers")
        if any(not v > 0 for v in vals):
            raise UsageError("x values must be positive")
        args.points = [str(v) for v in vals]
    if args.command == "quantile":
        if any(not 0 < p < 1 for p in args.p):
            raise UsageError("--p values must lie in (0, 1)")
    if args.command in ("mc-cdf", "mc-sample", "paths"):
        if not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
    if args.command == "mc-cdf":
        if args.J is None and not args.eps < 0.25:
            raise UsageError("--eps must lie in (0, 1/4)")
        if not 0 < args.alpha < 1:
            raise UsageError("--alpha must lie in (0, 1)")
    if args.command == "paths" and not 4 <= args.mesh <= 20:
        raise UsageError("--mesh must lie in [4, 20]")
    if args.command == "gs-selftest" and any(k > 512 for k in args.K):
        raise UsageError("--K must be at most 512")


# -- commands: each returns (params, header, rows, diagnostics) ----------------

def _cdf_params(args, **extra):
    params = {"K": args.K, "bits": args.bits, "eps": args.eps, "N": args.fixed_n if args.fixed_n else "adaptive", "digits": args.digits}
    params.update(extra)
    return params


def _run_cdf(args, threads):
    ctx = make_context(args.bits)
    evals = cdf_many(args.points, K=args.K, eps=args.eps, fixed_n=args.fixed_n, ctx=ctx, workers=threads)
    rows, diags = [], []
    for x, ev in zip(args.points, evals):
        rows.append({"x": x, "value": format_value(ev.value, args.digits)})
        diags.append(
            {
                "x": x,
                "N_used": ev.N_used,
                "N0": ev.n0,
                "N_max": max(ev.point_n),
                "tail_bound": format_value(ev.truncation_bound, 6),
                "clamped": ev.clamped,
                "below_validated_range": ev.below_validated_range,
            }
        )
    extra = {"x": args.points} if args.command == "cdf" else {"start": args.start, "end": args.end, "step": args.step}
    return _cdf_params(args, **extra), ["x", "value"], rows, diags


def _run_quantile(args, threads):
    ctx = make_context(args.bits)
    rows, diags = [], []
    for p in args.p:
        q = quantile(p, threshold=args.tol, K=args.K, eps=args.eps, ctx=ctx, workers=threads)
        rows.append(
            {
                "p": _float_text(p),
                "quantile": format_value(q.x, max(args.digits, 9)),
                "residual": format_value(q.residual, 6),
                "iterations": str(q.iterations),
            }
        )
        diags.append({"p": _float_text(p), "bracket": [q.bracket[0], q.bracket[1]]})
    params = _cdf_params(args, p=[_float_text(p) for p in args.p], tol=args.tol)
    return params, ["p", "quantile", "residual", "iterations"], rows, diags


def _run_mc_cdf(args, threads):
    rows, diags = [], []
    for x in args.x:
        est = mc_cdf(x, eps=args.eps, C=args.C, alpha=args.alpha, seed=args.seed, J=args.J, threads=threads)
        rows.append({"x": _float_text(x), "value": _float_text(est.estimate)})
        diags.append(
            {
                "x": _float_text(x),
                "J": est.J,
                "ci_low": est.ci_low,
                "ci_high": est.ci_high,
                "std_error": est.std_error,
            }
        )
    params = {"x": [_float_text(x) for x in args.x], "eps": args.eps, "C": args.C, "J": args.J or "from eps", "alpha": args.alpha, "seed": args.seed}
    return params, ["x", "value"], rows, diags


def _run_mc_sample(args, threads):
    sample = mc_sample(args.J, args.N, args.C, seed=args.seed, threads=threads)
    rows = [{"draw": _float_text(d)} for d in sample.draws]
    diags = [{"mean": float(sample.draws.mean()), "sd": float(sample.draws.std(ddof=1)) if args.C > 1 else 0.0}]
    params = {"J": args.J, "N": args.N, "C": args.C, "seed": args.seed, "chunk": sample.plan.chunk}
    return params, ["draw"], rows, diags


def _run_paths(args, threads):
    params = {"mesh": args.mesh, "C": args.C, "seed": args.seed}
    if args.C == 1:
        path = simulate_bridge_majorant(args.mesh, chunk_rng(args.seed, 0))
        rows = [
            {"t": _float_text(t), "bridge": _float_text(v), "majorant": _float_text(m)}
            for t, v, m in zip(path.grid, path.values, path.majorant)
        ]
        diags = [{"max_gap": path.max_gap, "argmax_t": float(path.grid[path.argmax])}]
        return params, ["t", "bridge", "majorant"], rows, diags
    gaps = [simulate_bridge_majorant(args.mesh, chunk_rng(args.seed, i)).max_gap for i in range(args.C)]
    return params, ["draw"], [{"draw": _float_text(g)} for g in gaps], []


def _run_selftest(args, threads):
    ctx = make_context(args.bits)
    rows, diags = [], []
    for K in args.K:
        w = gs_weights(K)
        identity = sum(w.scaled()) == Fraction(1)
        run_ctx = ctx if ctx.bits >= min_bits_for(K) else make_context(min_bits_for(K) + 64)
        mp = run_ctx.mp
        approx = gs_invert(lambda s, c: 1 / (s + 1), 1, w, run_ctx)
        err = abs(approx / mp.exp(-1) - 1)
        law = mpmath.mpf(10) ** (-0.8 * K)
        rows.append(
            {
                "K": str(K),
                "weight_identity": "exact" if identity else "FAILED",
                "rel_error": format_value(err, 3),
                "law": format_value(law, 3),
                "within_law": str(bool(err <= 100 * law)).lower(),
            }
        )
        diags.append({"K": K, "bits": run_ctx.bits, "max_abs_weight_log10": round(max(math.log10(abs(x.numerator)) for x in w.xi), 2)})
    params = {"K": args.K, "bits": args.bits}
    ok = all(r["weight_identity"] == "exact" and r["within_law"] == "true" for r in rows)
    return params, ["K", "weight_identity", "rel_error", "law", "within_law"], rows, diags, ok


def _run_compare(args, threads):
    report = compare_tables(args.computed, args.reference, tight_rel=args.tol)
    rows = [
        {
            "x": str(r.x),
            "computed": str(r.computed),
            "reference": str(r.reference),
            "abs_dev": format_value(r.abs_dev, 3),
            "rel_dev": format_value(r.rel_dev, 3),
            "regime": r.regime,
            "pass": str(r.passed).lower(),
            "matched": str(r.matched) if r.matched is not None else "",
        }
        for r in report.rows
    ]
    summary = {"rows": len(report.rows), "failed": len(report.failures()), "missing": [str(m) for m in report.missing], "passed": report.passed}
    params = {"computed": str(args.computed), "reference": str(args.reference), "tol": args.tol}
    header = ["x", "computed", "reference", "abs_dev", "rel_dev", "regime", "pass", "matched"]
    return params, header, rows, [summary], report.passed


RUNNERS = {
    "cdf": _run_cdf,
    "table": _run_cdf,
    "quantile": _run_quantile,
    "mc-cdf": _run_mc_cdf,
    "mc-sample": _run_mc_sample,
    "paths": _run_paths,
    "gs-selftest": _run_selftest,
    "compare": _run_compare,
}


def _render(args, params, header, rows, diags) -> str:
    if args.format == "json":
        doc = {
            "params": {"command": args.command, "version": __version__, **params},
            "results": rows,
            "diagnostics": diags,
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(r[h] for h in header) + "\n")
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _validate(args)
        threads = _threads_value(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bridgegap: error: {exc}", file=sys.stderr)
        return 2

    try:
        out = RUNNERS[args.command](args, threads)
    except BridgeGapError as exc:
        bound = getattr(exc, "bound", None)
        detail = f" (bound: {bound})" if bound else ""
        print(f"bridgegap: {args.command} failed in module {exc.module}: {exc}{detail}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"bridgegap: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    ok = True
    if len(out) == 5:
        *out, ok = out
    text = _render(args, *out)
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
    if not ok:
        print(f"bridgegap: {args.command}: check failed", file=sys.stderr)
        return 1
    return 0
