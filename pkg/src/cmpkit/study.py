"""Convergence study of CMB(n, lam/n**nu, nu) towards CMP(lam, nu)."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np
from scipy import stats

from .dist import CmbParams
from .stein import special_lambda_bound, thm31_bound

CSV_HEADER = ("n", "exact_tv", "tv_error", "thm31_bound", "special_bound")


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    exact_tv: float
    tv_error: float
    thm31_bound: float
    special_bound: float | None = None


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int


def convergence_table(lam: float, nu: float, n_list: Iterable[int]) -> list[ConvergenceRow]:
    """One row per admissible n, sorted by n.

    ``special_bound`` is the bound for the moment-matched target
    CMP(E Y**nu, nu), reported alongside for comparison.
    """
    rows = []
    for n in sorted(set(int(n) for n in n_list)):
        if not lam < float(n) ** nu:
            warnings.warn(f"skipping n={n}: lambda={lam} is not below n**nu", RuntimeWarning, stacklevel=2)
            continue
        rep = thm31_bound(n, lam, nu)
        special = special_lambda_bound(CmbParams(n, lam / float(n) ** nu, nu))
        rows.append(ConvergenceRow(n, rep.exact_tv, rep.exact_tv_error, rep.bound, special))
    return rows


def loglog_fit(rows: Sequence[ConvergenceRow]) -> SlopeFit:
    """Least-squares line through (log n, log exact_tv)."""
    usable = [r for r in rows if r.exact_tv > 0]
    if len(usable) < 2:
        raise ValueError("need at least two rows with positive distance")
    x = np.log([r.n for r in usable])
    y = np.log([r.exact_tv for r in usable])
    if np.ptp(x) == 0:
        raise ValueError("need at least two distinct n")
    fit = stats.linregress(x, y)
    r2 = min(1.0, max(0.0, float(fit.rvalue) ** 2))
    return SlopeFit(float(fit.slope), float(fit.intercept), r2, len(usable))


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_csv(rows: Sequence[ConvergenceRow], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.n, _fmt(r.exact_tv), _fmt(r.tv_error), _fmt(r.thm31_bound), _fmt(r.special_bound)])


def save_csv(rows: Sequence[ConvergenceRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        write_csv(rows, fh)


def read_csv(path: str | Path) -> list[ConvergenceRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        rows = []
        for rec in reader:
            special = rec["special_bound"]
            rows.append(
                ConvergenceRow(
                    int(rec["n"]),
                    float(rec["exact_tv"]),
                    float(rec["tv_error"]),
                    float(rec["thm31_bound"]),
                    float(special) if special else None,
                )
            )
    return rows


def geometric_ns(start: int, stop: int, count: int) -> list[int]:
    """Roughly geometric integer grid from start to stop inclusive."""
    return sorted(set(int(round(v)) for v in np.geomspace(start, stop, count)))


def doubling_ratios(rows: Sequence[ConvergenceRow]) -> list[float]:
    """exact_tv(2n) / exact_tv(n) for each n whose double is also present."""
    by_n = {r.n: r.exact_tv for r in rows}
    return [by_n[2 * n] / by_n[n] for n in sorted(by_n) if 2 * n in by_n and by_n[n] > 0]
