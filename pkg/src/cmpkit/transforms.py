"""Power-bias transform, stochastic-order checks, total variation, Poisson
concentration bounds and the Poincare constant of CMP and CMB laws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._series import EPS, accurate_sum
from .dist import (
    CmbParams,
    CmpParams,
    FinitePmf,
    cmb_truncated_pmf,
    cmp_truncated_pmf,
)
from .moments import cmb_moment, cmp_mean_var

ORDER_SLACK = 1e-12
POINCARE_TAIL = 1e-10


@dataclass(frozen=True)
class OrderReport:
    holds: bool
    max_violation: float
    witness_index: int | None
    tolerance: float


def power_bias(pmf: FinitePmf, nu: float) -> FinitePmf:
    """The nu-power-biased law j**nu P(W=j) / E W**nu on the window."""
    if nu < 0:
        raise ValueError("bias exponent must be non-negative")
    if nu == 0:
        return pmf
    start = max(pmf.offset, 1)
    ks = np.arange(start, pmf.end + 1, dtype=float)
    probs = pmf.probs[start - pmf.offset :]
    weighted = ks**nu * probs
    mean = accurate_sum(weighted)
    if not mean > 0:
        raise ValueError("all mass sits at zero, so the biased law is undefined")
    tail = pmf.tail_bound * (pmf.end + 1.0) ** nu / mean
    return FinitePmf(start, weighted / mean, tail)


def _aligned(p: FinitePmf, q: FinitePmf) -> tuple[int, np.ndarray, np.ndarray]:
    lo = min(p.offset, q.offset)
    hi = max(p.end, q.end)
    a = np.zeros(hi - lo + 1)
    b = np.zeros(hi - lo + 1)
    a[p.offset - lo : p.end - lo + 1] = p.probs
    b[q.offset - lo : q.end - lo + 1] = q.probs
    return lo, a, b


def _survival(probs: np.ndarray) -> np.ndarray:
    """S[i] = sum of probs[i+1:]."""
    rev = np.cumsum(probs[::-1])[::-1]
    return np.append(rev[1:], 0.0)


def st_order_leq(p: FinitePmf, q: FinitePmf, tol: float = ORDER_SLACK) -> OrderReport:
    """Check P(U > t) <= P(V > t) for every t, allowing for truncated mass."""
    lo, a, b = _aligned(p, q)
    diff = _survival(a) - _survival(b)
    i = int(np.argmax(diff))
    worst = max(0.0, float(diff[i]))
    allowance = tol + p.tail_bound + q.tail_bound
    return OrderReport(worst <= allowance, worst, lo + i if worst > 0 else None, allowance)


def _law(params: CmpParams | CmbParams, tail_eps: float = 1e-14) -> FinitePmf:
    if isinstance(params, CmbParams):
        return cmb_truncated_pmf(params)
    return cmp_truncated_pmf(params, tail_eps)


def negative_dependence_check(params: CmpParams | CmbParams, reverse: bool = False) -> OrderReport:
    """Size-bias comparison U^(1) <=_st U + 1 for nu >= 1.

    With ``reverse`` the over-dispersed direction U + 1 <=_st U^(1) is checked
    instead, which is the form that holds when nu < 1.
    """
    if params.nu < 1 and not reverse:
        raise ValueError("for nu < 1 the ordering reverses; pass reverse=True")
    law = _law(params)
    biased = power_bias(law, 1.0)
    shifted = law.shift(1)
    if reverse:
        return st_order_leq(shifted, biased)
    return st_order_leq(biased, shifted)


def tv_distance(p: FinitePmf, q: FinitePmf) -> tuple[float, float]:
    """Half the L1 distance over the union window, and a bound on the truncation effect."""
    _, a, b = _aligned(p, q)
    return 0.5 * accurate_sum(np.abs(a - b)), p.tail_bound + q.tail_bound


def tv_poisson_bound(params: CmpParams, tol: float | None = None) -> float:
    """|mu - Var| / mu, the bound on the distance from CMP to Po(mu)."""
    mu, var = cmp_mean_var(params, tol)
    if params.nu >= 1:
        return (mu - var) / mu
    return (var - mu) / mu


def convex_upper_tail_bound(mu: float, t: float) -> float:
    """Bound on P(X >= mu + t) for X <=_cx Po(mu)."""
    if not (mu > 0 and t > 0):
        raise ValueError("mu and t must be positive")
    return math.exp(t - (mu + t) * math.log1p(t / mu))


def convex_lower_tail_bound(mu: float, t: float) -> float:
    """Bound on P(X <= mu - t) for X <=_cx Po(mu); needs 0 < t < mu."""
    if not (mu > 0 and t > 0):
        raise ValueError("mu and t must be positive")
    if t >= mu:
        raise ValueError("the lower-tail bound needs t < mu")
    return math.exp(-t + (mu - t) * -math.log1p(-t / mu))


def convex_tail_bounds(mu: float, t: float) -> tuple[float, float | None]:
    """(upper, lower) Poisson-type tail bounds; lower is None once t >= mu."""
    upper = convex_upper_tail_bound(mu, t)
    lower = convex_lower_tail_bound(mu, t) if t < mu else None
    return upper, lower


def _solve_path_laplacian(w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L x = b for the weighted path Laplacian, sum(b) = 0, x[0] = 0.

    Flux through edge i is -B_i with B_i the cumulative sum of b; the upper
    half uses suffix sums so tiny edge weights see tiny fluxes.
    """
    n = b.size
    prefix = np.cumsum(b)[:-1]
    suffix = -np.cumsum(b[::-1])[::-1][1:]
    mid = int(np.argmax(w))
    flux = np.where(np.arange(n - 1) < mid, prefix, suffix)
    steps = -flux / w
    return np.concatenate([[0.0], np.cumsum(steps)])


def poincare_estimate(
    params: CmpParams | CmbParams,
    window: int | None = None,
    *,
    max_iter: int = 10_000,
    rtol: float = 1e-12,
) -> float:
    """Inverse spectral gap sup Var g / E (g(U+1) - g(U))**2 on a truncated window."""
    if params.nu < 1:
        raise ValueError("the Poincare sandwich is established for nu >= 1 only")
    if isinstance(params, CmbParams):
        law = cmb_truncated_pmf(params)
        probs = np.asarray(law.probs)
        tail = 0.0
        if window is not None:
            tail = float(probs[window + 1 :].sum())
            probs = probs[: window + 1]
    else:
        law = cmp_truncated_pmf(params, POINCARE_TAIL / 100)
        probs = np.asarray(law.probs)
        tail = law.tail_bound
        if window is not None:
            if window + 1 < probs.size:
                tail += float(probs[window + 1 :].sum())
                probs = probs[: window + 1]
            else:
                extended = cmp_truncated_pmf(params, 1e-300)
                probs = np.asarray(extended.probs)[: window + 1]
                tail = max(0.0, 1.0 - accurate_sum(probs))
    if tail > POINCARE_TAIL:
        raise ValueError(f"window leaves tail mass {tail:.3g} above {POINCARE_TAIL}")
    # drop underflowed ends, which carry no mass at double precision
    keep = np.flatnonzero(probs > 1e-290)
    probs = probs[keep[0] : keep[-1] + 1]
    if probs.size < 2:
        raise ValueError("window too small for a spectral estimate")
    d = probs / accurate_sum(probs)
    w = d[:-1]
    ks = np.arange(d.size, dtype=float)

    def project(y):
        return y - accurate_sum(d * y)

    def rayleigh(y):
        return accurate_sum(d * y * y) / accurate_sum(w * np.diff(y) ** 2)

    y = project(ks)
    r_old = rayleigh(y)
    for _ in range(max_iter):
        y = project(_solve_path_laplacian(w, d * y))
        y /= math.sqrt(accurate_sum(d * y * y))
        r = rayleigh(y)
        if abs(r - r_old) <= rtol * abs(r):
            return r
        r_old = r
    return r


def variance_and_mean(params: CmpParams | CmbParams) -> tuple[float, float]:
    """(Var, mean) for the Poincare sandwich."""
    if isinstance(params, CmbParams):
        m1 = cmb_moment(params, 1)
        m2 = cmb_moment(params, 2)
        return m2 - m1 * m1, m1
    mu, var = cmp_mean_var(params)
    return var, mu
