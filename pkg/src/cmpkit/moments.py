"""Moments, cumulants, modes, median and mean deviation of CMP and CMB laws,
plus the modified Bessel series used for the nu = 2 closed forms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from . import _series
from ._series import EPS, accurate_sum
from .dist import (
    CmbParams,
    CmpParams,
    SeriesEval,
    _cmb_probs,
    asymptotic_ratio_from_sweep,
    cmb_log_norm_const,
    cmp_log_norm_const,
    cmp_truncated_pmf,
    default_tol,
)

MAX_CUMULANT_ORDER = 8


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    abs_error_bound: float
    skewness_asymptotic: float | None = None
    excess_kurtosis_asymptotic: float | None = None


@dataclass(frozen=True)
class CumulantVector:
    kappas: tuple[float, ...]
    errors: tuple[float, ...]

    def __getitem__(self, n: int) -> float:
        """kappa_n, 1-based."""
        return self.kappas[n - 1]


def falling_factorial(j: int, r: int) -> int:
    if j < 0 or r < 0:
        raise ValueError("falling factorial needs non-negative arguments")
    if r > j:
        return 0
    return math.perm(j, r)


@lru_cache(maxsize=None)
def stirling2(k: int, r: int) -> int:
    """Stirling number of the second kind via S(k,r) = r S(k-1,r) + S(k-1,r-1)."""
    if r > k or r < 0:
        raise ValueError("stirling2 requires 0 <= r <= k")
    if k == r:
        return 1
    if r == 0:
        return 0
    return r * stirling2(k - 1, r) + stirling2(k - 1, r - 1)


def stirling2_explicit(k: int, r: int) -> int:
    """Alternating-sum form (1/r!) sum_j (-1)**(r-j) C(r,j) j**k."""
    total = sum((-1) ** (r - j) * math.comb(r, j) * j**k for j in range(r + 1))
    return total // math.factorial(r)


# --- series expectations --------------------------------------------------

# A bounded function is (f, a, b) with |f(k)| <= a + b * |k - center|**power on the support.
BoundedFn = tuple[Callable, float, float]


def _ratio_evals(sw, bounds_ab) -> list[SeriesEval]:
    """Turn sweep sums into expectations with certified error bounds."""
    out = []
    s, e0 = sw.total, sw.err_total
    for (a, b), total, err in zip(bounds_ab, sw.sums, sw.errs):
        v = total / s
        tail = a * sw.tail + b * sw.tail_h
        bound = (tail + abs(v) * sw.tail) / s + (err + abs(v) * e0) / s + 2 * EPS * abs(v)
        out.append(SeriesEval(v, bound, sw.n_terms))
    return out


def _expect(
    params: CmpParams,
    funcs: Sequence[BoundedFn],
    tol: float,
    *,
    center: float = 0.0,
    power: float = 0.0,
) -> list[SeriesEval]:
    sw = _series.sweep(params.lam, params.nu, tol, [s[0] for s in funcs], center=center, power=power)
    return _ratio_evals(sw, [(a, b) for _, a, b in funcs])


def _factorial_power(r: int, nu: float):
    def f(k):
        out = np.zeros_like(k)
        big = k >= r
        kb = k[big]
        out[big] = np.exp(nu * (gammaln(kb + 1.0) - gammaln(kb - r + 1.0)))
        return out

    return f


def cmp_factorial_power_moment(params: CmpParams, r: int, tol: float | None = None) -> SeriesEval:
    """E[((X)_r)**nu] by direct series; the exact value is lam**r."""
    if r < 1:
        raise ValueError("order must be a positive integer")
    if params.nu == 0:
        raise ValueError("factorial-power moments need nu > 0")
    tol = default_tol() if tol is None else tol
    power = r * params.nu
    return _expect(params, [(_factorial_power(r, params.nu), 0.0, 1.0)], tol, power=power)[0]


def cmp_factorial_moment(params: CmpParams, r: int, tol: float | None = None) -> SeriesEval:
    """Ordinary factorial moment E[(X)_r] by direct series."""
    tol = default_tol() if tol is None else tol
    return _expect(params, [(_factorial_power(r, 1.0), 0.0, 1.0)], tol, power=float(r))[0]


def cmp_moment(params: CmpParams, k: int, tol: float | None = None) -> SeriesEval:
    """Raw moment E X**k by direct series."""
    if k < 1:
        raise ValueError("order must be a positive integer")
    tol = default_tol() if tol is None else tol
    return _expect(params, [(lambda x: x**k, 0.0, 1.0)], tol, power=float(k))[0]


def cmp_moment_via_stirling(params: CmpParams, k: int, tol: float | None = None) -> SeriesEval:
    """E X**k assembled from factorial moments through Stirling numbers."""
    tol = default_tol() if tol is None else tol
    funcs = [(_factorial_power(r, 1.0), 0.0, 1.0) for r in range(1, k + 1)]
    fm = _expect(params, funcs, tol, power=float(k))
    value = math.fsum(stirling2(k, r) * e.value for r, e in enumerate(fm, start=1))
    err = math.fsum(stirling2(k, r) * e.abs_error_bound for r, e in enumerate(fm, start=1))
    return SeriesEval(value, err + EPS * abs(value) * k, fm[0].terms_used)


def cmp_moment_asymptotic(params: CmpParams, k: int) -> float:
    if params.nu == 0:
        raise ValueError("moment asymptotics need nu > 0")
    return params.lam ** (k / params.nu)


def _centered_sweep(params: CmpParams, order: int, tol: float):
    m = _series.cmp_mode_index(params.lam, params.nu)
    sw = _series.sweep(params.lam, params.nu, tol, center=float(m), power=float(order), poly_order=order)
    return sw, _ratio_evals(sw, [(1.0, 1.0)] * order)


def _centered_moments(params: CmpParams, order: int, tol: float) -> tuple[int, list[SeriesEval]]:
    """Moments of X - m about the series mode m, orders 1..order."""
    sw, mu = _centered_sweep(params, order, tol)
    return sw.mode, mu


def _raw_ratios_from_centered(params: CmpParams, m: int, mu: list[SeriesEval], k_max: int) -> list[SeriesEval]:
    """E X**k / lam**(k/nu) for k = 1..k_max by binomial expansion about m."""
    x = params.lam ** (1.0 / params.nu)
    q = m / x
    out = []
    for k in range(1, k_max + 1):
        terms = [q**k]
        errs = []
        for j in range(1, k + 1):
            c = math.comb(k, j) * q ** (k - j) / x**j
            terms.append(c * mu[j - 1].value)
            errs.append(abs(c) * mu[j - 1].abs_error_bound)
        value = math.fsum(terms)
        err = math.fsum(errs) + 4 * k * EPS * math.fsum(abs(t) for t in terms)
        out.append(SeriesEval(value, err, mu[0].terms_used))
    return out


def cmp_moment_ratio(params: CmpParams, k: int, tol: float | None = None) -> SeriesEval:
    """E X**k / lam**(k/nu), formed from mode-centred moments to keep precision."""
    tol = default_tol() if tol is None else tol
    m, mu = _centered_moments(params, k, tol)
    return _raw_ratios_from_centered(params, m, mu, k)[-1]


def _cumulants_from_centered(center: int, mu: list[SeriesEval]) -> CumulantVector:
    mv = [1.0] + [e.value for e in mu]
    me = [0.0] + [e.abs_error_bound for e in mu]
    kap: list[float] = []
    kerr: list[float] = []
    for n in range(1, len(mu) + 1):
        terms = [mv[n]]
        err = me[n]
        for j in range(1, n):
            c = math.comb(n - 1, j - 1)
            terms.append(-c * kap[j - 1] * mv[n - j])
            err += c * (kerr[j - 1] * abs(mv[n - j]) + abs(kap[j - 1]) * me[n - j] + kerr[j - 1] * me[n - j])
        val = math.fsum(terms)
        err += 2 * EPS * math.fsum(abs(t) for t in terms)
        kap.append(val)
        kerr.append(err)
    # cumulants beyond the first do not see the shift
    kap[0] += center
    kerr[0] += EPS * abs(kap[0])
    return CumulantVector(tuple(kap), tuple(kerr))


def _monomial_err(coeff: float, factors: Sequence[tuple[float, float, int]]) -> float:
    """Bound on |coeff * prod x**k| moving when each x moves by at most e."""
    hi = lo = abs(coeff)
    for x, e, k in factors:
        hi *= (abs(x) + e) ** k
        lo *= abs(x) ** k
    return hi - lo


def _refined_cumulants(params: CmpParams, tol: float, first: CumulantVector) -> CumulantVector:
    """kappa_1..kappa_4 from a second sweep centred at the first-pass mean.

    The summed polynomials are the first-pass influence functions of the
    cumulants, so their expectations are small corrections and the rounding
    of every term is weighed by how much that term actually moves kappa_n.
    Moments taken separately would instead count the cancelling errors of
    the fourth moment and the squared variance twice.
    """
    c, m2, m3, k4 = first.kappas[:4]
    c0 = 3.0 * m2 * m2 - k4
    polys = [
        [0.0, 1.0],
        [-m2, 0.0, 1.0],
        [-m3, -3.0 * m2, 0.0, 1.0],
        [c0, -4.0 * m3, -6.0 * m2, 0.0, 1.0],
    ]
    sw = _series.sweep(params.lam, params.nu, tol, center=c, power=4.0, polys=polys)
    # beyond the window |d| >= r, so |q(d)| <= |q_0| + sum_i |q_i| r**(i-4) |d|**4
    r = min(sw.hi - c, c - sw.lo) if sw.lo > 0 else sw.hi - c
    if r >= 1.0:
        ab = [(abs(q[0]), math.fsum(abs(x) * r ** (i - 4) for i, x in enumerate(q) if i)) for q in polys]
    else:
        ab = [(math.fsum(abs(x) for x in q), math.fsum(abs(x) for x in q[1:])) for q in polys]
    evals = _ratio_evals(sw, ab)
    (d, ed), (p2, e2), (p3, e3), (p4, e4) = [(e.value, e.abs_error_bound) for e in evals]

    def assemble(base: float, base_err: float, terms):
        """Sum base + monomials with propagated and rounding error."""
        vals = [base] + [coef * math.prod(x**k for x, _, k in fs) for coef, fs in terms]
        err = base_err + math.fsum(_monomial_err(coef, fs) for coef, fs in terms)
        total = math.fsum(vals)
        return total, err + 5 * _series.U * math.fsum(abs(v) for v in vals) + _series.U * abs(total)

    k1 = (c + d, ed + _series.U * abs(c + d))
    k2 = assemble(m2, 0.0, [(1.0, [(p2, e2, 1)]), (-1.0, [(d, ed, 2)])])
    k3 = assemble(m3, 0.0, [(1.0, [(p3, e3, 1)]), (-3.0, [(d, ed, 1), (p2, e2, 1)]), (2.0, [(d, ed, 3)])])
    # 3 m2**2 - c0 is the first-pass kappa_4, recomputed from the floats used
    m2sq = 3.0 * m2 * m2
    base4 = m2sq - c0
    base4_err = 2 * _series.U * m2sq + _series.U * abs(base4)
    k4_ = assemble(
        base4,
        base4_err,
        [
            (1.0, [(p4, e4, 1)]),
            (-3.0, [(p2, e2, 2)]),
            (-4.0, [(d, ed, 1), (p3, e3, 1)]),
            (12.0, [(d, ed, 2), (p2, e2, 1)]),
            (-6.0, [(d, ed, 4)]),
        ],
    )
    kap = (k1, k2, k3, k4_)
    return CumulantVector(tuple(k for k, _ in kap), tuple(e for _, e in kap))


def cmp_cumulants(params: CmpParams, m: int, tol: float | None = None, *, refine: bool = False) -> CumulantVector:
    """kappa_1..kappa_m from moments about the mode via the moment-cumulant recurrence.

    ``tol`` is the relative tail tolerance of the underlying sums.  High-order
    cumulants of wide laws cancel heavily, so those need a much smaller value
    than the default to come out accurately; the reported errors say how well
    each cumulant is determined.  With ``refine`` (orders up to 4) a second
    sweep centred at the mean tightens the error bounds of kappa_2..kappa_4.
    """
    if m < 1:
        raise ValueError("need at least one cumulant")
    if m > MAX_CUMULANT_ORDER:
        raise ValueError(f"cumulants beyond order {MAX_CUMULANT_ORDER} are not supported")
    tol = default_tol() if tol is None else tol
    if refine and m > 4:
        raise ValueError("refined cumulants are available up to order 4")
    center, mu = _centered_moments(params, max(m, 4) if refine else m, tol)
    cv = _cumulants_from_centered(center, mu)
    if refine:
        r = _refined_cumulants(params, tol, cv)
        return CumulantVector(r.kappas[:m], r.errors[:m])
    return cv


def cmp_cumulant_ratios(params: CmpParams, m: int = 4, tol: float | None = None) -> list[SeriesEval]:
    """kappa_n * nu**(n-1) / lam**(1/nu) for n = 1..m."""
    cv = cmp_cumulants(params, m, tol)
    x = params.lam ** (1.0 / params.nu)
    out = []
    for n in range(1, m + 1):
        s = params.nu ** (n - 1) / x
        out.append(SeriesEval(cv[n] * s, cv.errors[n - 1] * s, 0))
    return out


def cmp_moment_summary(params: CmpParams, tol: float | None = None) -> MomentSummary:
    cv = cmp_cumulants(params, 4, tol, refine=True)
    k1, k2, k3, k4 = cv.kappas
    e1, e2, e3, e4 = cv.errors
    sd = math.sqrt(k2)
    g1 = k3 / sd**3
    g2 = k4 / k2**2
    # first-order propagation of the cumulant errors
    g1_err = e3 / sd**3 + 1.5 * abs(g1) * e2 / k2
    g2_err = e4 / k2**2 + 2 * abs(g2) * e2 / k2
    g1_asym = g2_asym = None
    if params.nu > 0:
        g1_asym = params.lam ** (-1 / (2 * params.nu)) / math.sqrt(params.nu)
        g2_asym = params.lam ** (-1 / params.nu) / params.nu
    return MomentSummary(
        mean=k1,
        variance=k2,
        skewness=g1,
        excess_kurtosis=g2,
        abs_error_bound=max(e1, e2, g1_err, g2_err),
        skewness_asymptotic=g1_asym,
        excess_kurtosis_asymptotic=g2_asym,
    )


@dataclass(frozen=True)
class AsymptoticProfile:
    """Ratios of exact quantities to their large-lam leading terms, with error bounds."""

    norm_const: SeriesEval
    moments: tuple[SeriesEval, ...]
    cumulants: tuple[SeriesEval, ...]
    skewness: SeriesEval
    excess_kurtosis: SeriesEval


def cmp_asymptotic_profile(params: CmpParams, k_max: int = 4, tol: float = 1e-20) -> AsymptoticProfile:
    """All large-lam ratios from a mode-centred sweep plus a mean-centred one.

    The normalizer ratio is V/Z with V the leading asymptotic form, so it
    tends to one like the others.
    """
    if params.nu == 0:
        raise ValueError("asymptotics need nu > 0")
    order = max(k_max, 4)
    sw, mu = _centered_sweep(params, order, tol)
    z_ratio = asymptotic_ratio_from_sweep(sw, params)
    raw = _raw_ratios_from_centered(params, sw.mode, mu, k_max)
    cv = _refined_cumulants(params, tol, _cumulants_from_centered(sw.mode, mu[:4]))
    nu = params.nu
    x = params.lam ** (1.0 / nu)
    cum = []
    for n in range(1, 5):
        s = nu ** (n - 1) / x
        cum.append(SeriesEval(cv[n] * s, cv.errors[n - 1] * s, sw.n_terms))
    k2, k3, k4 = cv[2], cv[3], cv[4]
    e2, e3, e4 = cv.errors[1:4]
    g1 = k3 / k2**1.5
    g2 = k4 / k2**2
    a1 = x ** -0.5 / math.sqrt(nu)
    a2 = 1.0 / (x * nu)
    g1_err = (e3 + 1.5 * abs(k3) * e2 / k2) / k2**1.5 * (1 + e2 / k2) + 4 * EPS * abs(g1)
    g2_err = (e4 + 2 * abs(k4) * e2 / k2) / k2**2 * (1 + e2 / k2) ** 2 + 4 * EPS * abs(g2)
    return AsymptoticProfile(
        norm_const=z_ratio,
        moments=tuple(raw),
        cumulants=tuple(cum),
        skewness=SeriesEval(g1 / a1, g1_err / a1, sw.n_terms),
        excess_kurtosis=SeriesEval(g2 / a2, g2_err / a2, sw.n_terms),
    )


def cmp_mean_var(params: CmpParams, tol: float | None = None) -> tuple[float, float]:
    cv = cmp_cumulants(params, 2, tol)
    return cv[1], cv[2]


def cmp_variance_from_mean_derivative(params: CmpParams, rel_step: float = 1e-5, tol: float | None = None) -> float:
    """lam * d(E X)/d lam by central differences."""
    tol = 1e-15 if tol is None else tol
    lam, nu = params.lam, params.nu
    h = lam * rel_step
    up = cmp_mean_var(CmpParams(lam + h, nu), tol)[0]
    down = cmp_mean_var(CmpParams(lam - h, nu), tol)[0]
    return lam * (up - down) / (2 * h)


# --- modes, median, mean deviation ---------------------------------------


def _integral(a: float, rel: float = 1e-9) -> int | None:
    r = round(a)
    if r >= 1 and abs(a - r) <= rel * max(1.0, abs(a)):
        return int(r)
    return None


def cmp_mode(params: CmpParams) -> int | tuple[int, int]:
    """floor(lam**(1/nu)), or the adjacent pair when lam**(1/nu) is an integer."""
    if params.nu == 0:
        return 0
    a = params.lam ** (1.0 / params.nu)
    r = _integral(a)
    if r is not None:
        return (r - 1, r)
    return int(math.floor(a))


def cmb_mode(params: CmbParams) -> int | tuple[int, int]:
    n, p, nu = params.n, params.p, params.nu
    if p == 0.0:
        return 0
    if p == 1.0:
        return n
    if nu == 0:
        raise ValueError("the CMB mode formula needs nu > 0")
    a = (n + 1) / (1.0 + ((1.0 - p) / p) ** (1.0 / nu))
    r = _integral(a)
    if r is not None:
        return (r - 1, r)
    return int(math.floor(a))


def pmf_argmax(probs: np.ndarray, offset: int = 0, rel: float = 1e-12) -> tuple[int, ...]:
    """All indices whose probability is within ``rel`` of the maximum."""
    top = float(np.max(probs))
    return tuple(int(i) + offset for i in np.flatnonzero(probs >= top * (1 - rel)))


def cmp_median_and_bound(params: CmpParams, tol: float | None = None) -> tuple[int, bool]:
    """Median and whether |E X - median| <= sd holds."""
    pmf = cmp_truncated_pmf(params, tol)
    cdf = np.cumsum(pmf.probs)
    median = int(np.searchsorted(cdf, 0.5, side="left"))
    mean, var = cmp_mean_var(params, tol)
    return median, abs(mean - median) <= math.sqrt(var)


def cmp_mean_deviation(params: CmpParams, tol: float | None = None) -> tuple[float, SeriesEval]:
    """E|X**nu - lam| in closed form and by direct summation."""
    lam, nu = params.lam, params.nu
    if nu == 0:
        raise ValueError("mean deviation formula needs nu > 0")
    tol = default_tol() if tol is None else tol
    m = int(math.floor(lam ** (1.0 / nu)))
    log_z = cmp_log_norm_const(params, tol).value
    exact = 2.0 * math.exp((m + 1) * math.log(lam) - nu * float(gammaln(m + 1.0)) - log_z)
    direct = _expect(params, [(lambda k: np.abs(k**nu - lam), lam, 1.0)], tol, power=nu)[0]
    return exact, direct


# --- CMB moments -----------------------------------------------------------


def cmb_expect(params: CmbParams, f) -> float:
    probs = _cmb_probs(params)
    ks = np.arange(params.n + 1, dtype=float)
    return accurate_sum(np.asarray(f(ks), dtype=float) * probs)


def cmb_moment(params: CmbParams, a: float) -> float:
    """E Y**a for real a >= 0."""
    return cmb_expect(params, lambda k: k**a)


def cmb_factorial_power_moment(params: CmbParams, r: int) -> float:
    """(C_{n-r} / C_n) ((n)_r)**nu p**r."""
    n, p, nu = params.n, params.p, params.nu
    if not 1 <= r <= n - 1:
        raise ValueError(f"order must lie in 1..{n - 1}")
    if p == 0.0:
        return 0.0
    log_ratio = cmb_log_norm_const(CmbParams(n - r, p, nu)) - cmb_log_norm_const(params)
    log_ff = float(gammaln(n + 1.0) - gammaln(n - r + 1.0))
    return math.exp(log_ratio + nu * log_ff + r * math.log(p))


def cmb_factorial_power_moment_direct(params: CmbParams, r: int) -> float:
    return cmb_expect(params, _factorial_power(r, params.nu))


# --- Bessel ----------------------------------------------------------------


def bessel_i(r: int, x: float, tol: float = 1e-16) -> SeriesEval:
    """Modified Bessel function I_r(x) from its power series with certified tail."""
    if r < 0 or int(r) != r:
        raise ValueError("order must be a non-negative integer")
    if not x > 0:
        raise ValueError("argument must be positive")
    log_half = math.log(x / 2.0)
    k_peak = max(0, int(x / 2.0))
    size = max(32, 2 * k_peak + 32)
    while True:
        ks = np.arange(size, dtype=float)
        lt = (r + 2 * ks) * log_half - gammaln(ks + 1.0) - gammaln(r + ks + 1.0)
        top = float(np.max(lt))
        w = np.exp(lt - top)
        s = np.cumsum(w)
        log_q = 2 * log_half - np.log(ks + 1.0) - np.log(r + ks + 1.0)
        with np.errstate(divide="ignore"):
            tail = np.where(log_q < 0, w * np.exp(log_q) / -np.expm1(log_q), np.inf)
        ok = np.flatnonzero((ks > x / 2.0) & (tail <= tol * s))
        if ok.size:
            j = int(ok[0])
            total = math.fsum(w[: j + 1].tolist())
            scale = math.exp(top)
            value = scale * total
            err = scale * float(tail[j]) + 8 * EPS * (1 + abs(top)) * value
            return SeriesEval(value, err, j + 1)
        size *= 2


def nu2_closed_forms(lam: float, m_max: int = 3) -> dict[str, float]:
    """Bessel-ratio expressions for CMP(lam, 2): mean, variance, factorial moments."""
    x = 2.0 * math.sqrt(lam)
    i = [bessel_i(r, x).value for r in range(max(m_max, 2) + 1)]
    out = {
        "norm_const": i[0],
        "mean": math.sqrt(lam) * i[1] / i[0],
        "variance": lam * (1.0 - (i[1] / i[0]) ** 2),
        "tv_poisson_bound": math.sqrt(lam) * (i[1] / i[0] - i[2] / i[1]),
    }
    for m in range(1, m_max + 1):
        out[f"factorial_moment_{m}"] = lam ** (m / 2.0) * i[m] / i[0]
    return out


def turan_holds(r: int, x: float) -> bool:
    """I_r(x)**2 > I_{r+1}(x) I_{r-1}(x)."""
    return bessel_i(r, x).value ** 2 > bessel_i(r + 1, x).value * bessel_i(r - 1, x).value
