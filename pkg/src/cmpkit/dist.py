"""Parameters, normalizing constants and mass functions for CMP, CMB, CMPB
and finitely mixed CMP distributions.

Every truncated quantity carries an explicit bound on what was discarded;
truncated mass functions are never renormalized.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from . import _series
from ._series import EPS, accurate_sum, logsumexp_sorted

DEFAULT_TOL = 1e-12


def default_tol() -> float:
    """Default tolerance, overridable through ``CMPKIT_TOL``."""
    env = os.environ.get("CMPKIT_TOL")
    return float(env) if env else DEFAULT_TOL


@dataclass(frozen=True)
class CmpParams:
    lam: float
    nu: float

    def __post_init__(self):
        lam, nu = float(self.lam), float(self.nu)
        if not (math.isfinite(lam) and math.isfinite(nu)):
            raise ValueError("CMP parameters must be finite")
        if not ((lam > 0 and nu > 0) or (0 < lam < 1 and nu == 0)):
            raise ValueError(f"inadmissible CMP parameters lam={lam}, nu={nu}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "nu", nu)


@dataclass(frozen=True)
class CmbParams:
    n: int
    p: float
    nu: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("CMB trial count must be a positive integer")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("CMB success probability must lie in [0, 1]")
        if not self.nu >= 0:
            raise ValueError("CMB dispersion must be non-negative")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "nu", float(self.nu))


@dataclass(frozen=True)
class CmpbParams:
    p_list: tuple[float, ...]
    nu: float

    def __post_init__(self):
        ps = tuple(float(p) for p in self.p_list)
        if not ps:
            raise ValueError("CMPB needs at least one trial")
        if any(not 0.0 <= p <= 1.0 for p in ps):
            raise ValueError("CMPB probabilities must lie in [0, 1]")
        if not self.nu >= 0:
            raise ValueError("CMPB dispersion must be non-negative")
        object.__setattr__(self, "p_list", ps)
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def n(self) -> int:
        return len(self.p_list)


@dataclass(frozen=True)
class MixingDistribution:
    """Finitely supported law of the random CMP rate."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(v), float(w)) for v, w in self.atoms)
        if not atoms:
            raise ValueError("mixing distribution needs at least one atom")
        if any(v < 0 for v, _ in atoms):
            raise ValueError("mixing atoms must be non-negative")
        if any(w <= 0 for _, w in atoms):
            raise ValueError("mixing weights must be positive")
        if abs(math.fsum(w for _, w in atoms) - 1.0) > 1e-12:
            raise ValueError("mixing weights must sum to 1")
        object.__setattr__(self, "atoms", atoms)

    def mean_abs_deviation(self, lam: float) -> float:
        return math.fsum(w * abs(v - lam) for v, w in self.atoms)


@dataclass(frozen=True)
class SeriesEval:
    value: float
    abs_error_bound: float
    terms_used: int

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class FinitePmf:
    """Probabilities on ``offset .. offset+len(probs)-1``.

    ``tail_bound`` bounds the probability outside the window; it also bounds
    the total amount by which the window probabilities understate the truth.
    """

    offset: int
    probs: np.ndarray = field(repr=False)
    tail_bound: float = 0.0

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1:
            raise ValueError("probs must be one-dimensional")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("probs must be finite and non-negative")
        if self.tail_bound < 0:
            raise ValueError("tail_bound must be non-negative")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.probs.size)

    @property
    def end(self) -> int:
        """Last index of the window."""
        return self.offset + self.probs.size - 1

    def total(self) -> float:
        return accurate_sum(self.probs)

    def prob(self, j: int) -> float:
        i = j - self.offset
        return float(self.probs[i]) if 0 <= i < self.probs.size else 0.0

    def expect(self, f) -> float:
        """Window expectation of ``f`` (vectorized over the support)."""
        return accurate_sum(np.asarray(f(self.support), dtype=float) * self.probs)

    def shift(self, k: int) -> FinitePmf:
        return FinitePmf(self.offset + k, self.probs, self.tail_bound)


def _check_tol(tol: float) -> None:
    if not tol > 0:
        raise ValueError("tolerance must be positive")


# --- CMP -------------------------------------------------------------------


def cmp_log_norm_const(params: CmpParams, tol: float | None = None) -> SeriesEval:
    """log Z(lam, nu) with a certified absolute error bound."""
    tol = default_tol() if tol is None else tol
    _check_tol(tol)
    lam, nu = params.lam, params.nu
    if nu == 0:
        value = -math.log1p(-lam)
        return SeriesEval(value, 4 * EPS * abs(value) + EPS, 0)
    sw = _series.sweep(lam, nu, tol)
    rel_tail = sw.tail / sw.total
    value = sw.log_tm + math.log(sw.total) + 0.5 * math.log1p(rel_tail)
    err = (
        0.5 * math.log1p(rel_tail)
        + _series.log_mode_term_error(lam, nu, sw.mode)
        + 2 * sw.rel_term_error
        + EPS * abs(value)
    )
    return SeriesEval(value, err, sw.n_terms)


def cmp_norm_const_asymptotic(params: CmpParams) -> float:
    """Leading large-lam approximation of Z(lam, nu)."""
    lam, nu = params.lam, params.nu
    if nu == 0:
        raise ValueError("asymptotic normalizer requires nu > 0")
    log_v = nu * lam ** (1 / nu) - (nu - 1) / (2 * nu) * math.log(lam) - (nu - 1) / 2 * math.log(2 * math.pi) - 0.5 * math.log(nu)
    return math.exp(log_v)


def cmp_asymptotic_ratio(params: CmpParams, tol: float | None = None) -> SeriesEval:
    """Asymptotic normalizer divided by Z, computed without large logarithms."""
    tol = default_tol() if tol is None else tol
    if params.nu == 0:
        raise ValueError("asymptotic normalizer requires nu > 0")
    return asymptotic_ratio_from_sweep(_series.sweep(params.lam, params.nu, tol), params)


def asymptotic_ratio_from_sweep(sw: _series.Sweep, params: CmpParams) -> SeriesEval:
    lam, nu = params.lam, params.nu
    rel_tail = sw.tail / sw.total
    log_diff = _series.log_mode_term_minus_asymptotic(lam, nu, sw.mode) + math.log(sw.total) + 0.5 * math.log1p(rel_tail)
    ratio = math.exp(-log_diff)
    err = ratio * (0.5 * rel_tail + 2 * sw.rel_term_error + 64 * EPS * (1 + abs(log_diff)))
    return SeriesEval(ratio, err, sw.n_terms)


def cmp_log_pmf(params: CmpParams, j, tol: float | None = None):
    j_arr = np.asarray(j)
    if np.any(j_arr < 0) or np.any(j_arr != np.floor(j_arr)):
        raise ValueError("support points must be non-negative integers")
    log_z = cmp_log_norm_const(params, tol).value
    jj = j_arr.astype(float)
    if params.nu == 0:
        out = jj * math.log(params.lam) - log_z
    else:
        out = jj * math.log(params.lam) - params.nu * gammaln(jj + 1.0) - log_z
    return float(out) if np.ndim(out) == 0 else out


def cmp_pmf(params: CmpParams, j, tol: float | None = None):
    out = np.exp(cmp_log_pmf(params, j, tol))
    return float(out) if np.ndim(out) == 0 else out


def cmp_truncated_pmf(params: CmpParams, tail_eps: float | None = None) -> FinitePmf:
    """CMP probabilities on ``[0, K]`` with certified mass beyond ``K``.

    Probabilities are scaled by an upper bound on Z, so the window sum plus
    ``tail_bound`` is one and each window entry understates the truth.
    """
    tail_eps = default_tol() if tail_eps is None else tail_eps
    _check_tol(tail_eps)
    lam, nu = params.lam, params.nu
    if nu == 0:
        # geometric: P(X > K) = lam**(K+1)
        k_end = max(0, math.ceil(math.log(tail_eps) / math.log(lam)) - 1)
        ks = np.arange(k_end + 1, dtype=float)
        probs = (1.0 - lam) * np.exp(ks * math.log(lam))
        return FinitePmf(0, probs, lam ** (k_end + 1))
    sw = _series.sweep(lam, nu, tail_eps, full_lower=True, keep=True)
    ks = np.concatenate([c[0] for c in sw.chunks])
    lw = np.concatenate([c[1] for c in sw.chunks])
    order = np.argsort(ks)
    ks, lw = ks[order], lw[order]
    z_upper = sw.total + sw.tail
    probs = np.exp(lw - math.log(z_upper))
    return FinitePmf(0, probs, sw.tail / z_upper)


def cmp_cdf(params: CmpParams, j: int, tol: float | None = None) -> float:
    """Partial sum of the mass function; understates the truth by at most the tail bound."""
    if j < 0:
        return 0.0
    pmf = cmp_truncated_pmf(params, tol)
    return accurate_sum(pmf.probs[: int(j) + 1])


def cmp_quantile(params: CmpParams, q: float, tol: float | None = None) -> int:
    """Smallest ``j`` with ``cdf(j) >= q``."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    pmf = cmp_truncated_pmf(params, tol)
    cdf = np.cumsum(pmf.probs)
    idx = int(np.searchsorted(cdf, q, side="left"))
    if idx >= cdf.size:
        raise ValueError("quantile lies beyond the truncation window; lower the tolerance")
    return pmf.offset + idx


def cmp_pgf(params: CmpParams, s: float, tol: float | None = None) -> float:
    """E s**X = Z(s lam, nu) / Z(lam, nu)."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("pgf argument must lie in [0, 1]")
    if s == 0.0:
        return math.exp(-cmp_log_norm_const(params, tol).value)
    scaled = CmpParams(s * params.lam, params.nu)
    return math.exp(cmp_log_norm_const(scaled, tol).value - cmp_log_norm_const(params, tol).value)


# --- CMB -------------------------------------------------------------------


def _log_binom(n: int, k):
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def _cmb_log_terms(n: int, p: float, nu: float) -> np.ndarray:
    ks = np.arange(n + 1, dtype=float)
    out = nu * _log_binom(n, ks)
    with np.errstate(divide="ignore", invalid="ignore"):
        if p == 0.0:
            out = np.where(ks == 0, out, -np.inf)
        elif p == 1.0:
            out = np.where(ks == n, out, -np.inf)
        else:
            out = out + ks * math.log(p) + (n - ks) * math.log1p(-p)
    return out


def cmb_log_norm_const(params: CmbParams) -> float:
    return logsumexp_sorted(_cmb_log_terms(params.n, params.p, params.nu))


def cmb_norm_const(params: CmbParams) -> float:
    """C_n = sum_i binom(n,i)**nu p**i (1-p)**(n-i)."""
    return math.exp(cmb_log_norm_const(params))


def _cmb_probs(params: CmbParams) -> np.ndarray:
    lt = _cmb_log_terms(params.n, params.p, params.nu)
    return np.exp(lt - logsumexp_sorted(lt))


def cmb_pmf(params: CmbParams, j: int) -> float:
    if int(j) != j or not 0 <= j <= params.n:
        raise ValueError(f"support point {j} outside 0..{params.n}")
    return float(_cmb_probs(params)[int(j)])


def cmb_truncated_pmf(params: CmbParams) -> FinitePmf:
    return FinitePmf(0, _cmb_probs(params), 0.0)


# --- CMPB ------------------------------------------------------------------


def poisson_binomial_weights(p_list: Sequence[float]) -> np.ndarray:
    """S_k = P(k successes) for independent trials, by sequential convolution."""
    s = np.zeros(len(p_list) + 1)
    s[0] = 1.0
    for i, p in enumerate(p_list, start=1):
        s[1 : i + 1] = s[1 : i + 1] * (1.0 - p) + s[:i] * p
        s[0] *= 1.0 - p
    return s


def cmpb_pmf(params: CmpbParams) -> FinitePmf:
    """CMPB mass function: Poisson-binomial weights reweighted by binom(n,k)**(nu-1)."""
    n = params.n
    s = poisson_binomial_weights(params.p_list)
    with np.errstate(divide="ignore"):
        lt = np.log(s) + (params.nu - 1.0) * _log_binom(n, np.arange(n + 1))
    return FinitePmf(0, np.exp(lt - logsumexp_sorted(lt)), 0.0)


def cmpb_brute_force(params: CmpbParams) -> np.ndarray:
    """Exhaustive 2**n subset enumeration of the CMPB mass function."""
    n = params.n
    ps = params.p_list
    acc: list[list[float]] = [[] for _ in range(n + 1)]
    for bits in itertools.product((0, 1), repeat=n):
        prod = 1.0
        for b, p in zip(bits, ps):
            prod *= p if b else 1.0 - p
        acc[sum(bits)].append(prod)
    unnorm = np.array([math.comb(n, k) ** (params.nu - 1.0) * math.fsum(a) for k, a in enumerate(acc)])
    return unnorm / math.fsum(unnorm)


# --- mixed CMP -------------------------------------------------------------


def _atom_pmf(value: float, nu: float, tail_eps: float) -> FinitePmf:
    if value == 0.0:
        return FinitePmf(0, np.array([1.0]), 0.0)
    return cmp_truncated_pmf(CmpParams(value, nu), tail_eps)


def mixed_cmp_pmf(mix: MixingDistribution, nu: float, j: int, tol: float | None = None) -> float:
    """sum_a w_a * P(CMP(v_a, nu) = j); an atom at zero is a point mass at 0."""
    if j < 0:
        raise ValueError("support points must be non-negative")
    total = []
    for v, w in mix.atoms:
        if v == 0.0:
            total.append(w * (1.0 if j == 0 else 0.0))
        else:
            total.append(w * cmp_pmf(CmpParams(v, nu), j, tol))
    return math.fsum(total)


def mixed_cmp_truncated_pmf(mix: MixingDistribution, nu: float, tail_eps: float | None = None) -> FinitePmf:
    tail_eps = default_tol() if tail_eps is None else tail_eps
    parts = [(w, _atom_pmf(v, nu, tail_eps)) for v, w in mix.atoms]
    size = max(p.end for _, p in parts) + 1
    probs = np.zeros(size)
    for w, p in parts:
        probs[p.offset : p.end + 1] += w * p.probs
    tail = math.fsum(w * p.tail_bound for w, p in parts)
    return FinitePmf(0, probs, tail)


# --- CMP/CMB conditioning --------------------------------------------------


def conditional_cmb_check(lam1: float, lam2: float, nu: float, n: int) -> float:
    """Max deviation between X1 | X1+X2=n and CMB(n, lam1/(lam1+lam2), nu)."""
    CmpParams(lam1, nu)
    CmpParams(lam2, nu)
    if n < 1:
        raise ValueError("n must be at least 1")
    j = np.arange(n + 1, dtype=float)
    # joint pmf up to the common factor 1/(Z1 Z2)
    lt = j * math.log(lam1) - nu * gammaln(j + 1) + (n - j) * math.log(lam2) - nu * gammaln(n - j + 1)
    cond = np.exp(lt - logsumexp_sorted(lt))
    cmb = _cmb_probs(CmbParams(n, lam1 / (lam1 + lam2), nu))
    return float(np.max(np.abs(cond - cmb)))
