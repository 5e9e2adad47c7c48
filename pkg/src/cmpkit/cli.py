"""Command-line front end: ``cmpkit eval ...``, ``cmpkit table convergence``, ``cmpkit fit``."""

from __future__ import annotations

import argparse
import math
import sys
import warnings

from .dist import CmbParams, CmpParams, cmp_log_norm_const, cmp_log_pmf, default_tol
from .moments import cmp_mean_deviation, cmp_mode, cmp_moment_summary
from .stein import delta_bound, stein_factor_g, thm31_bound
from .study import convergence_table, loglog_fit, read_csv, save_csv, write_csv
from .transforms import negative_dependence_check, poincare_estimate, tv_poisson_bound


def _num(x: float) -> str:
    """Twelve significant digits, printed as the shortest float repr."""
    return repr(float(f"{float(x):.12g}"))


def _emit(pairs) -> None:
    for key, value in pairs:
        if isinstance(value, bool):
            text = str(value).lower()
        elif isinstance(value, float):
            text = _num(value)
        else:
            text = str(value)
        print(f"{key}={text}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from exc


def _cmp(args) -> CmpParams:
    if args.lam is None or args.nu is None:
        raise _Usage("--lambda and --nu are required")
    return CmpParams(args.lam, args.nu)


class _Usage(Exception):
    pass


def _eval(args) -> None:
    what = args.what
    tol = args.tol
    if what == "pmf":
        params = _cmp(args)
        if args.j is None:
            raise _Usage("--j is required for eval pmf")
        lp = cmp_log_pmf(params, args.j, tol)
        _emit([("pmf", math.exp(lp)), ("logpmf", lp)])
    elif what == "norm":
        ev = cmp_log_norm_const(_cmp(args), tol)
        _emit([("logZ", ev.value), ("abs_error_bound", ev.abs_error_bound), ("terms_used", ev.terms_used)])
    elif what == "moments":
        s = cmp_moment_summary(_cmp(args), tol)
        pairs = [
            ("mean", s.mean),
            ("variance", s.variance),
            ("skewness", s.skewness),
            ("excess_kurtosis", s.excess_kurtosis),
            ("abs_error_bound", s.abs_error_bound),
        ]
        if s.skewness_asymptotic is not None:
            pairs += [("skewness_asymptotic", s.skewness_asymptotic), ("excess_kurtosis_asymptotic", s.excess_kurtosis_asymptotic)]
        _emit(pairs)
    elif what == "mode":
        mode = cmp_mode(_cmp(args))
        _emit([("mode", ",".join(str(m) for m in mode) if isinstance(mode, tuple) else mode)])
    elif what == "meandev":
        exact, direct = cmp_mean_deviation(_cmp(args), tol)
        _emit([("exact", exact), ("direct", direct.value), ("abs_error_bound", direct.abs_error_bound)])
    elif what == "ordering":
        params = _cmp(args)
        if args.n:
            if len(args.n) != 1:
                raise _Usage("eval ordering takes a single --n")
            n = args.n[0]
            params = CmbParams(n, params.lam / float(n) ** params.nu, params.nu)
        reverse = params.nu < 1
        rep = negative_dependence_check(params, reverse=reverse)
        pairs = [
            ("order", "U+1<=st U^(1)" if reverse else "U^(1)<=st U+1"),
            ("holds", rep.holds),
            ("max_violation", rep.max_violation),
        ]
        if isinstance(params, CmpParams):
            pairs.append(("tv_poisson_bound", tv_poisson_bound(params, tol)))
        if params.nu >= 1:
            pairs.append(("poincare", poincare_estimate(params)))
        _emit(pairs)
    elif what == "stein":
        params = _cmp(args)
        pairs = [("g", stein_factor_g(params)), ("delta_bound", delta_bound(params))]
        for n in args.n or []:
            rep = thm31_bound(n, params.lam, params.nu)
            pairs += [(f"n{n}_bound", rep.bound), (f"n{n}_exact_tv", rep.exact_tv), (f"n{n}_tv_error", rep.exact_tv_error)]
        _emit(pairs)


def _table(args) -> None:
    if args.lam is None or args.nu is None or not args.n:
        raise _Usage("table convergence needs --lambda, --nu and --n")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = convergence_table(args.lam, args.nu, args.n)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.out:
        save_csv(rows, args.out)
    else:
        write_csv(rows, sys.stdout)


def _fit(args) -> None:
    if not args.inp:
        raise _Usage("fit needs --in")
    fit = loglog_fit(read_csv(args.inp))
    _emit([("slope", fit.slope), ("intercept", fit.intercept), ("r_squared", fit.r_squared), ("n_points", fit.n_points)])


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--n", type=_int_list)
    p.add_argument("--j", type=int)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out")
    p.add_argument("--in", dest="inp")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmpkit", description="CMP and CMB distribution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    ev = sub.add_parser("eval", help="single-point evaluations")
    ev.add_argument("what", choices=["pmf", "norm", "moments", "mode", "meandev", "ordering", "stein"])
    _common(ev)
    tb = sub.add_parser("table", help="bound tables")
    tb.add_argument("which", choices=["convergence"])
    _common(tb)
    ft = sub.add_parser("fit", help="log-log slope of a convergence CSV")
    _common(ft)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.tol is None:
        args.tol = default_tol()
    handlers = {"eval": _eval, "table": _table, "fit": _fit}
    try:
        handlers[args.command](args)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
