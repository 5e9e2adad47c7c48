"""Log-space series machinery shared by the CMP routines.

All CMP sums are taken over terms ``t_k = lam**k / (k!)**nu`` expressed
relative to the mode term ``t_m``.  The sweep walks outward from the mode
in growing chunks and stops on each side once a geometric bound certifies
the discarded tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.special import gammaln

EPS = float(np.finfo(float).eps)
# unit roundoff
U = EPS / 2

# below this index lgamma differences are taken directly
_STIRLING_MIN = 50
_FSUM_MAX = 1 << 16
_CHUNK0 = 64
_CHUNK_MAX = 1 << 20
_BLOCK = 128
# numpy sums a contiguous block of 128 with 8 accumulators and a 3-level tree
_BLOCK_ULPS = 16 + 3 + 1
MAX_MODE = 1e15


def accurate_sum(values) -> float:
    """Exactly rounded sum; long arrays are summed in blocks of 128 first."""
    arr = np.asarray(values, dtype=float)
    if arr.size <= _FSUM_MAX:
        return math.fsum(arr.tolist())
    cut = arr.size - arr.size % _BLOCK
    blocks = arr[:cut].reshape(-1, _BLOCK).sum(axis=1).tolist()
    return math.fsum(blocks + arr[cut:].tolist())


def summation_error(abs_sum: float, n: int) -> float:
    """Rounding bound for :func:`accurate_sum` over ``n`` terms."""
    if n <= _FSUM_MAX:
        return EPS * abs_sum
    return (_BLOCK_ULPS * U + EPS) * abs_sum


def logsumexp_sorted(log_terms) -> float:
    """log(sum(exp(log_terms))) with ascending-order compensated accumulation."""
    lt = np.sort(np.asarray(log_terms, dtype=float))
    top = lt[-1]
    if not np.isfinite(top):
        return top
    return top + math.log(math.fsum(np.exp(lt - top).tolist()))


def stirling_correction(x):
    """Tail of the Stirling series: lgamma(x+1) - [(x+1/2)log x - x + log(2pi)/2].

    Beyond 1e6 the leading term alone is within 3e-21.
    """
    x = np.asarray(x, dtype=float)
    if x.size and float(np.min(x)) >= 1e6:
        return (1.0 / 12.0) / x
    x2 = x * x
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x


def _psi(u):
    """(1+u)log1p(u) - u, accurate for small |u|."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 0.05
    out = np.empty_like(u)
    if not np.all(small):
        ub = u[~small]
        out[~small] = (1.0 + ub) * np.log1p(ub) - ub
    if np.any(small):
        us = u[small]
        umax = float(np.max(np.abs(us)))
        # enough series terms for full double precision at this |u|
        n_terms = 17 if umax == 0 else min(17, 3 + int(math.ceil(math.log(2e-17) / math.log(umax))))
        acc = np.full_like(us, ((-1.0) ** n_terms) / (n_terms * (n_terms - 1)))
        for j in range(n_terms - 1, 1, -1):
            acc = acc * us + ((-1.0) ** j) / (j * (j - 1))
        out[small] = acc * us * us
    return out


def cmp_mode_index(lam: float, nu: float) -> int:
    """floor(lam**(1/nu)); 0 for the geometric case nu == 0."""
    if nu == 0:
        return 0
    x = lam ** (1.0 / nu)
    if x > MAX_MODE:
        raise ValueError(f"series mode {x:.3g} is beyond the supported range")
    return int(math.floor(x))


def log_gap(lam: float, nu: float, m: int) -> float:
    """log(lam) - nu*log(m), evaluated at extended precision."""
    if m == 0:
        return math.log(lam)
    with mpmath.workdps(40):
        return float(mpmath.log(mpmath.mpf(lam)) - mpmath.mpf(nu) * mpmath.log(m))


def log_term_ratio(ks, m: int, lam: float, nu: float, gap: float | None = None, with_scale: bool = False):
    """log(t_k / t_m) for an array of indices ``ks``.

    With ``with_scale`` also returns ``s_k`` such that the absolute rounding
    error of the log is below ``U * s_k``, counting one unit roundoff per
    operation on the magnitudes it touches.
    """
    ks = np.asarray(ks, dtype=float)
    d = ks - m
    log_lam = math.log(lam)
    out = np.empty_like(ks)
    scale = np.empty_like(ks) if with_scale else None
    big = ks >= _STIRLING_MIN if m >= _STIRLING_MIN else np.zeros(ks.shape, dtype=bool)
    all_big = bool(np.all(big))
    if all_big or np.any(big):
        if gap is None:
            gap = log_gap(lam, nu, m)
        sel = slice(None) if all_big else big
        kb = ks[sel]
        db = d[sel]
        u = db / m
        mpsi = _psi(u)
        mpsi *= m
        l1p = np.log1p(u)
        sc_k = stirling_correction(kb)
        sc_m = float(stirling_correction(m))
        lg = sc_k - sc_m
        lg += 0.5 * l1p
        lg += mpsi
        dg = db * gap
        ob = dg - nu * lg
        out[sel] = ob
        if with_scale:
            au = np.abs(u)
            # the series form of psi is good to 8 ulps; the log1p form cancels
            err = 12.0 * np.abs(mpsi)
            if float(np.max(au)) >= 0.05:
                err += np.where(au < 0.05, 0.0, 2.0 * m * ((1.0 + au) * np.abs(l1p) + au))
            err += 2.0 * np.abs(l1p)
            err += 0.5 * au / (1.0 + u)
            err += 4.0 * np.abs(sc_k) + (4.0 * abs(sc_m) + 1e-4)
            err *= nu
            err += 2.0 * np.abs(dg)
            err += np.abs(ob)
            scale[sel] = err
    if not all_big:
        small = ~big
        ks_ = ks[small]
        g_k = gammaln(ks_ + 1.0)
        g_m = float(gammaln(m + 1.0))
        out[small] = d[small] * log_lam - nu * (g_k - g_m)
        if with_scale:
            # gammaln is taken as good to 16 ulps
            diff = np.abs(g_k - g_m)
            scale[small] = 2.0 * np.abs(d[small] * log_lam) + nu * (17.0 * (np.abs(g_k) + abs(g_m)) + diff) + np.abs(out[small])
    if with_scale:
        return out, scale
    return out


def log_mode_term(lam: float, nu: float, m: int) -> float:
    return m * math.log(lam) - nu * float(gammaln(m + 1.0))


def log_mode_term_error(lam: float, nu: float, m: int) -> float:
    return 8 * EPS * (abs(m * math.log(lam)) + nu * float(gammaln(m + 1.0)) + 1.0)


def log_mode_term_minus_asymptotic(lam: float, nu: float, m: int) -> float:
    """log t_m minus the log of the leading large-lam normalizer.

    Evaluated without forming either large logarithm so that the ratio of the
    series to its asymptotic form stays accurate far into the asymptotic range.
    """
    x = lam ** (1.0 / nu)
    if m < _STIRLING_MIN:
        log_asym = nu * x - 0.5 * (nu - 1.0) / nu * math.log(lam) - 0.5 * (nu - 1.0) * math.log(2 * math.pi) - 0.5 * math.log(nu)
        return log_mode_term(lam, nu, m) - log_asym
    f = x - m
    core = m * math.log1p(f / m) - f - float(stirling_correction(m))
    return nu * core - 0.5 * nu * math.log1p(-f / x) - 0.5 * math.log(2 * math.pi * x) + 0.5 * math.log(nu)


@dataclass
class Sweep:
    """Result of a certified outward sweep.

    All sums are in units of the mode term ``t_m``.  ``sums`` holds the sums
    of ``h_i(k) t_k / t_m`` for each callable, then for each polynomial, then
    the centred power sums ``(k - center)**j t_k / t_m`` for
    ``j = 1..poly_order``;
    ``abs_sums`` and ``errs`` give the matching absolute-value sums and
    rounding bounds.  ``tail`` bounds the discarded part of ``sum t_k / t_m``
    and ``tail_h`` the discarded part of ``sum |k - center|**power t_k / t_m``.
    """

    lo: int
    hi: int
    mode: int
    log_tm: float
    total: float
    total_h: float
    err_total: float
    sums: list[float]
    abs_sums: list[float]
    errs: list[float]
    tail: float
    tail_h: float
    n_terms: int
    chunks: list = field(default_factory=list)

    @property
    def rel_term_error(self) -> float:
        """Bound on the relative rounding error of ``total``."""
        return self.err_total / self.total


def _abs_pow(x, power: float):
    """|x|**power, by repeated multiplication for small integer powers."""
    ax = np.abs(x)
    if power == int(power) and 0 < power <= 8:
        out = ax
        for _ in range(int(power) - 1):
            out = out * ax
        return out
    return ax**power


def _stop_index(lw, log_h, log_rho0, log_rhoh, s0, s1, log_side):
    """First index where both geometric tails are certified small, else None.

    Returns the index together with the two tail bounds (in t_m units).
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ok0 = log_rho0 < 0
        okh = log_rhoh < 0
        lt0 = np.where(ok0, lw + log_rho0 - np.log(-np.expm1(np.minimum(log_rho0, -1e-300))), np.inf)
        lth = np.where(okh, lw + log_h + log_rhoh - np.log(-np.expm1(np.minimum(log_rhoh, -1e-300))), np.inf)
        stop = ok0 & okh & (lt0 <= log_side + np.log(s0)) & (lth <= log_side + np.log(np.maximum(s1, 1e-300)))
    idx = np.flatnonzero(stop)
    if not idx.size:
        return None
    j = int(idx[0])
    t0 = math.exp(lt0[j]) if np.isfinite(lt0[j]) else 0.0
    th = math.exp(lth[j]) if np.isfinite(lth[j]) else 0.0
    return j, t0, th


def sweep(
    lam: float,
    nu: float,
    tol: float,
    funcs: Sequence[Callable] = (),
    *,
    center: float = 0.0,
    power: float = 0.0,
    poly_order: int = 0,
    polys: Sequence[Sequence[float]] = (),
    full_lower: bool = False,
    keep: bool = False,
) -> Sweep:
    """Sum ``t_k / t_m`` and weighted variants outward from the mode.

    Each side stops once its geometric tail bound falls below ``tol / 2``
    times the running partial sum, for both the plain terms and the terms
    weighted by ``|k - center|**power``.  ``funcs``, the polynomials in
    ``k - center`` given by coefficient lists ``polys`` (lowest order first)
    and the centred powers up to ``poly_order`` must be dominated by a
    constant plus ``|k - center|**power`` for the tail bounds to apply.
    Polynomials get rounding bounds from their absolute Horner values, so
    cancelling combinations keep a tight bound.
    """
    if nu < 0 or (nu == 0 and lam >= 1):
        raise ValueError("series diverges for these parameters")
    m = cmp_mode_index(lam, nu)
    gap = log_gap(lam, nu, m) if m >= _STIRLING_MIN else None
    log_lam = math.log(lam)
    log_side = math.log(tol / 2.0)
    n_out = len(funcs) + len(polys) + poly_order
    parts = {key: [] for key in ("s0", "s1", "e0")}
    f_parts = [([], [], []) for _ in range(n_out)]
    n_terms = 0
    chunks = []

    def weight_h(ks, w):
        return _abs_pow(ks - center, power) * w if power else w

    def consume(ks, w, hw, sc):
        nonlocal n_terms
        # exp adds at most 2 ulps; the 1.01 covers exp(e) - 1 > e
        ew = w * (U * (sc + 2.0) * 1.01)
        n = ks.size
        parts["s0"].append(accurate_sum(w))
        parts["s1"].append(accurate_sum(hw))
        parts["e0"].append(accurate_sum(ew) * (1 + 64 * EPS) + summation_error(parts["s0"][-1], n))
        outputs = []
        for fn in funcs:
            h = np.asarray(fn(ks), dtype=float)
            outputs.append((h * w, np.abs(h) * ew, 8.0))
        if polys or poly_order:
            d = ks - center
            ad = np.abs(d)
        for coeffs in polys:
            h = np.full_like(ks, float(coeffs[-1]))
            ah = np.full_like(ks, abs(float(coeffs[-1])))
            for c in reversed(coeffs[:-1]):
                h = h * d + c
                ah = ah * ad + abs(c)
            deg = len(coeffs) - 1
            outputs.append((h * w, np.abs(h) * ew + (3 * deg * U) * ah * w, 1.0))
        if poly_order:
            p, pe = w, ew
            for j in range(1, poly_order + 1):
                p = p * d
                pe = pe * ad
                outputs.append((p, pe, 2.0 * j))
        for (vals, verr, ulps), (s, a, e) in zip(outputs, f_parts):
            s.append(accurate_sum(vals))
            a_sum = accurate_sum(np.abs(vals))
            a.append(a_sum)
            e.append(accurate_sum(verr) * (1 + 64 * EPS) + (ulps * U) * a_sum + summation_error(a_sum, n))
        n_terms += n

    def partial(key):
        return math.fsum(parts[key])

    def up_geometry(ks):
        log_r = log_lam - nu * np.log(ks + 1.0)
        if not power:
            return np.zeros_like(ks), log_r, log_r
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.abs(ks - center)
            log_fac = np.where(ks > center, power * (np.log(dist + 1.0) - np.log(dist)), np.inf)
            return power * np.log(dist), log_r, log_r + log_fac

    def down_geometry(ks):
        with np.errstate(divide="ignore", invalid="ignore"):
            log_s = np.where(ks >= 1, nu * np.log(ks) - log_lam, np.inf)
            if not power:
                return np.zeros_like(ks), log_s, log_s
            dist = np.abs(ks - center)
            # below the center |k - c| grows as k decreases
            log_fac = np.where(ks < center, power * (np.log(dist + 1.0) - np.log(dist)), 0.0)
            log_h = np.where(ks < center, power * np.log(np.maximum(dist, 1e-300)), power * np.log(np.maximum(dist, 1.0)))
            return log_h, log_s, log_s + log_fac

    def try_stop(ks, lw, w, hw, geometry):
        """Probe the chunk end first; scan the whole chunk only if it passes."""
        base0, base1 = partial("s0"), partial("s1")
        end0 = base0 + accurate_sum(w)
        end1 = base1 + accurate_sum(hw)
        g = geometry(ks[-1:])
        if _stop_index(lw[-1:], *g, np.array([end0]), np.array([end1]), log_side) is None:
            return None
        s0 = base0 + np.cumsum(w)
        s1 = base1 + np.cumsum(hw)
        return _stop_index(lw, *geometry(ks), s0, s1, log_side)

    def chunk(ks):
        lw, sc = log_term_ratio(ks, m, lam, nu, gap, with_scale=True)
        w = np.exp(lw)
        if keep:
            chunks.append((ks, lw))
        return lw, sc, w, weight_h(ks, w)

    def trim_kept(count):
        if keep:
            ks, lw = chunks[-1]
            chunks[-1] = (ks[:count], lw[:count])

    # upward from the mode
    start, size = m, _CHUNK0
    hi, tail_up, tail_h_up = m, 0.0, 0.0
    while True:
        ks = np.arange(start, start + size, dtype=float)
        lw, sc, w, hw = chunk(ks)
        found = try_stop(ks, lw, w, hw, up_geometry)
        if found is not None:
            j, tail_up, tail_h_up = found
            consume(ks[: j + 1], w[: j + 1], hw[: j + 1], sc[: j + 1])
            trim_kept(j + 1)
            hi = int(ks[j])
            break
        consume(ks, w, hw, sc)
        start += size
        size = min(size * 2, _CHUNK_MAX)

    # downward below the mode
    lo, tail_lo, tail_h_lo = m, 0.0, 0.0
    top = m - 1
    size = _CHUNK0
    while top >= 0:
        bottom = max(0, top - size + 1)
        ks = np.arange(top, bottom - 1, -1, dtype=float)
        lw, sc, w, hw = chunk(ks)
        if not full_lower:
            found = try_stop(ks, lw, w, hw, down_geometry)
            if found is not None:
                j, tail_lo, tail_h_lo = found
                consume(ks[: j + 1], w[: j + 1], hw[: j + 1], sc[: j + 1])
                trim_kept(j + 1)
                lo = int(ks[j])
                break
        consume(ks, w, hw, sc)
        lo = bottom
        top = bottom - 1
        size = min(size * 2, _CHUNK_MAX)

    total = partial("s0")
    sums = [math.fsum(s) for s, _, _ in f_parts]
    return Sweep(
        lo=lo,
        hi=hi,
        mode=m,
        log_tm=log_mode_term(lam, nu, m),
        total=total,
        total_h=partial("s1"),
        # the chunk partials are combined by fsum, so one more rounding
        err_total=partial("e0") + EPS * total,
        sums=sums,
        abs_sums=[math.fsum(a) for _, a, _ in f_parts],
        errs=[math.fsum(e) + EPS * abs(sv) for (_, _, e), sv in zip(f_parts, sums)],
        tail=tail_up + tail_lo,
        tail_h=tail_h_up + tail_h_lo,
        n_terms=n_terms,
        chunks=chunks,
    )
